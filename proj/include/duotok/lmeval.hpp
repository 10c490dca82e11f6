#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/tokens.hpp"

namespace duotok::lmeval {

using duotok::Route;
using tokens::DualTrackSequence;

// Next-token predictor contract. Implementations return log-probabilities
// whose exponentials sum to 1 within 1e-6.
struct Predictor {
    virtual ~Predictor() = default;

    virtual std::int64_t vocab_size(Route route) const = 0;

    // Distribution over the next token of `route` given that track's history.
    virtual std::vector<double> log_probs(Route route, std::span<const std::uint32_t> context) const = 0;

    // Distribution over the next accompaniment token given the full vocal
    // sequence and the accompaniment prefix. The default ignores the vocals,
    // which reduces conditional evaluation to the unconditional case.
    virtual std::vector<double> conditional_log_probs(std::span<const std::uint32_t> vocal_full,
                                                      std::span<const std::uint32_t> accomp_prefix) const {
        (void)vocal_full;
        return log_probs(Route::Accompaniment, accomp_prefix);
    }
};

// Add-alpha smoothed bigram model with a start state for position 0.
struct CountLm final : Predictor {
    std::int64_t k = 0;
    double alpha = 1.0;
    Matrix counts;  // (k+1) x k; row k holds sequence-initial counts

    std::int64_t vocab_size(Route) const override { return k; }
    std::vector<double> log_probs(Route route, std::span<const std::uint32_t> context) const override;
};

CountLm train_count_lm(const std::vector<DualTrackSequence> &corpus, Route route, double alpha);

// Uniform baseline over a fixed vocabulary.
struct UniformPredictor final : Predictor {
    std::int64_t k = 0;

    explicit UniformPredictor(std::int64_t vocab) : k(vocab) {}
    std::int64_t vocab_size(Route) const override { return k; }
    std::vector<double> log_probs(Route, std::span<const std::uint32_t>) const override {
        return std::vector<double>(static_cast<std::size_t>(k), -std::log(static_cast<double>(k)));
    }
};

// Dispatches to one predictor per route. Conditioning falls back to the
// accompaniment predictor's own default.
struct DualPredictor final : Predictor {
    std::shared_ptr<Predictor> vocal;
    std::shared_ptr<Predictor> accomp;

    std::int64_t vocab_size(Route route) const override {
        return (route == Route::Vocal ? vocal : accomp)->vocab_size(route);
    }
    std::vector<double> log_probs(Route route, std::span<const std::uint32_t> context) const override {
        return (route == Route::Vocal ? vocal : accomp)->log_probs(route, context);
    }
    std::vector<double> conditional_log_probs(std::span<const std::uint32_t> vocal_full,
                                              std::span<const std::uint32_t> accomp_prefix) const override {
        return accomp->conditional_log_probs(vocal_full, accomp_prefix);
    }
};

// Position-indexed distributions loaded from a DTLP file. Rows are stored
// exactly as read (so write/read round-trips are identities); serving
// subtracts each row's log-sum-exp, which keeps the predictor contract
// intact under f32 storage rounding.
struct ExternalPredictor final : Predictor {
    Route route = Route::Vocal;
    std::int64_t k = 0;
    Matrix rows;  // T x k raw log-probabilities

    std::int64_t vocab_size(Route) const override { return k; }
    std::vector<double> log_probs(Route route_in, std::span<const std::uint32_t> context) const override;
};

// DTLP container: magic "DTLP", version u16, route u8, K u32, T u64, then
// T rows of K little-endian f32 log-probabilities.
void write_logprobs(const std::string &path, const ExternalPredictor &pred);
ExternalPredictor read_logprobs(const std::string &path);

// Mean over sequences of the per-token mean negative log-probability under
// teacher forcing.
double avg_cross_entropy(const Predictor &pred, const std::vector<DualTrackSequence> &corpus,
                         Route route);

// Fraction of positions whose target ranks inside the top k, ties resolved
// toward the lowest index.
std::vector<double> topk_accuracy(const Predictor &pred, const std::vector<DualTrackSequence> &corpus,
                                  Route route, const std::vector<std::int64_t> &ks);

// exp(H) * 1024 / S: perplexity rescaled to an equivalent 1024-way problem.
double ppl_at_1024(double cross_entropy_nats, std::int64_t vocab_size);

// exp(mean(H)) * 1024 / S, the geometric mean of the per-route PPL values.
double overall_ppl(const std::vector<double> &per_route_entropies, std::int64_t vocab_size);

// Mean negative log-probability of accompaniment tokens after a prefix of
// `tau` frames, conditioning on the full vocal track.
double conditional_eval(const Predictor &pred, const DualTrackSequence &seq, std::int64_t tau);

// 2-second prefix at the stream's token rate.
std::int64_t default_prefix_frames(double rate);

inline constexpr std::array<std::int64_t, 4> kDefaultTopK = {1, 5, 10, 50};

struct RouteReport {
    Route route = Route::Vocal;
    double cross_entropy = 0.0;  // nats/token
    double ppl = 0.0;
    std::vector<double> topk;
};

struct EvalReport {
    std::vector<RouteReport> routes;
    double overall = 0.0;
    double conditional_entropy = 0.0;
    double conditional_ppl = 0.0;
};

// Full protocol: per-route cross-entropy, top-k, PPL@1024, the overall value,
// and vocal-conditioned accompaniment entropy with prefix tau.
EvalReport evaluate(const Predictor &pred, const std::vector<DualTrackSequence> &corpus,
                    std::int64_t tau, const std::vector<std::int64_t> &ks = {1, 5, 10, 50});

// CSV with columns route,H_nats,ppl_at_1024,top1,top5,top10,top50; the
// overall and conditional rows leave the top-k cells empty.
void write_report_csv(const std::string &path, const EvalReport &report);

}  // namespace duotok::lmeval

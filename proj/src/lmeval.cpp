#include "duotok/lmeval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "duotok/io.hpp"

namespace duotok::lmeval {

namespace {

void check_normalized(const std::vector<double> &log_probs) {
    double sum = 0.0;
    for (double lp : log_probs) sum += std::exp(lp);
    if (std::abs(sum - 1.0) > 1e-6)
        throw DataError("predictor returned an unnormalized distribution (sum " +
                        std::to_string(sum) + ")");
}

// Rank of the target under "ties go to the lowest index": the number of
// tokens that beat it outright plus earlier-indexed ties.
std::int64_t rank_of(const std::vector<double> &log_probs, std::uint32_t target) {
    double tv = log_probs[target];
    std::int64_t rank = 0;
    for (std::size_t j = 0; j < log_probs.size(); ++j) {
        if (log_probs[j] > tv) ++rank;
        else if (log_probs[j] == tv && j < target) ++rank;
    }
    return rank;
}

}  // namespace

std::vector<double> CountLm::log_probs(Route, std::span<const std::uint32_t> context) const {
    std::int64_t prev = context.empty() ? k : static_cast<std::int64_t>(context.back());
    require(prev <= k, "context token out of range");
    double row_total = 0.0;
    for (std::int64_t j = 0; j < k; ++j) row_total += counts(prev, j) + alpha;
    std::vector<double> out(static_cast<std::size_t>(k));
    for (std::int64_t j = 0; j < k; ++j)
        out[static_cast<std::size_t>(j)] = std::log((counts(prev, j) + alpha) / row_total);
    return out;
}

CountLm train_count_lm(const std::vector<DualTrackSequence> &corpus, Route route, double alpha) {
    require(alpha > 0.0, "alpha must be positive");
    require(!corpus.empty(), "empty corpus");
    std::int64_t k = 0;
    for (const DualTrackSequence &seq : corpus)
        k = std::max<std::int64_t>(k, seq.track(route).vocab_size);
    require(k >= 2, "corpus has no usable vocabulary");

    CountLm lm;
    lm.k = k;
    lm.alpha = alpha;
    lm.counts = Matrix(k + 1, k);
    for (const DualTrackSequence &seq : corpus) {
        const auto &idx = seq.track(route).indices;
        std::int64_t prev = k;  // start state
        for (std::uint32_t token : idx) {
            lm.counts(prev, static_cast<std::int64_t>(token)) += 1.0;
            prev = static_cast<std::int64_t>(token);
        }
    }
    return lm;
}

std::vector<double> ExternalPredictor::log_probs(Route route_in,
                                                 std::span<const std::uint32_t> context) const {
    if (route_in != route)
        throw DataError(std::string("external predictor serves route ") + route_name(route) +
                        ", asked for " + route_name(route_in));
    std::int64_t pos = static_cast<std::int64_t>(context.size());
    if (pos >= rows.rows)
        throw DataError("external predictor has " + std::to_string(rows.rows) +
                        " positions, asked for position " + std::to_string(pos));
    double hi = -std::numeric_limits<double>::infinity();
    for (std::int64_t j = 0; j < k; ++j) hi = std::max(hi, rows(pos, j));
    if (hi == -std::numeric_limits<double>::infinity())
        throw DataError("external predictor row " + std::to_string(pos) + " carries no mass");
    double sum = 0.0;
    for (std::int64_t j = 0; j < k; ++j) sum += std::exp(rows(pos, j) - hi);
    double lse = hi + std::log(sum);
    std::vector<double> out(static_cast<std::size_t>(k));
    for (std::int64_t j = 0; j < k; ++j) out[static_cast<std::size_t>(j)] = rows(pos, j) - lse;
    return out;
}

static const char kMagic[4] = {'D', 'T', 'L', 'P'};

void write_logprobs(const std::string &path, const ExternalPredictor &pred) {
    require(pred.k >= 2, "vocabulary size must be at least 2");
    require(pred.rows.cols == pred.k, "row width must equal K");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    io::write_magic(out, kMagic);
    io::write_version(out);
    io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(pred.route));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(pred.k));
    io::write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(pred.rows.rows));
    for (double v : pred.rows.data) io::write_pod<float>(out, static_cast<float>(v));
    if (!out) throw DataError("write failed: " + path);
}

ExternalPredictor read_logprobs(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    io::expect_magic(in, kMagic, "DTLP");
    io::expect_version(in, "DTLP");
    auto route = io::read_pod<std::uint8_t>(in, "route");
    if (route > 1) throw FormatError("DTLP: invalid route byte");
    auto k = io::read_pod<std::uint32_t>(in, "K");
    auto t = io::read_pod<std::uint64_t>(in, "T");
    if (k < 2) throw FormatError("DTLP: vocabulary size below 2");

    ExternalPredictor pred;
    pred.route = static_cast<Route>(route);
    pred.k = static_cast<std::int64_t>(k);
    pred.rows = Matrix(static_cast<std::int64_t>(t), pred.k);
    for (double &v : pred.rows.data) {
        float f = io::read_pod<float>(in, "log-probability");
        if (std::isnan(f)) throw FormatError("DTLP: NaN log-probability");
        v = f;
    }
    return pred;
}

double avg_cross_entropy(const Predictor &pred, const std::vector<DualTrackSequence> &corpus,
                         Route route) {
    require(!corpus.empty(), "empty corpus");
    double total = 0.0;
    for (const DualTrackSequence &seq : corpus) {
        const auto &idx = seq.track(route).indices;
        require(!idx.empty(), "empty sequence in corpus");
        double acc = 0.0;
        for (std::size_t t = 0; t < idx.size(); ++t) {
            std::vector<double> lp = pred.log_probs(route, std::span(idx.data(), t));
            check_normalized(lp);
            require(idx[t] < lp.size(), "target token outside predictor vocabulary");
            acc -= lp[idx[t]];
        }
        total += acc / static_cast<double>(idx.size());
    }
    return total / static_cast<double>(corpus.size());
}

std::vector<double> topk_accuracy(const Predictor &pred, const std::vector<DualTrackSequence> &corpus,
                                  Route route, const std::vector<std::int64_t> &ks) {
    require(!corpus.empty(), "empty corpus");
    require(!ks.empty(), "need at least one k");
    std::int64_t vocab = pred.vocab_size(route);
    for (std::int64_t k : ks) require(k >= 1 && k < vocab, "k must satisfy 1 <= k < K");

    std::vector<std::int64_t> hits(ks.size(), 0);
    std::int64_t positions = 0;
    for (const DualTrackSequence &seq : corpus) {
        const auto &idx = seq.track(route).indices;
        for (std::size_t t = 0; t < idx.size(); ++t) {
            std::vector<double> lp = pred.log_probs(route, std::span(idx.data(), t));
            std::int64_t rank = rank_of(lp, idx[t]);
            for (std::size_t i = 0; i < ks.size(); ++i)
                if (rank < ks[i]) hits[i] += 1;
            ++positions;
        }
    }
    require(positions > 0, "corpus has no positions");
    std::vector<double> out(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i)
        out[i] = static_cast<double>(hits[i]) / static_cast<double>(positions);
    return out;
}

double ppl_at_1024(double cross_entropy_nats, std::int64_t vocab_size) {
    require(vocab_size >= 2, "vocabulary size must be at least 2");
    require(cross_entropy_nats >= 0.0, "cross-entropy must be nonnegative");
    return std::exp(cross_entropy_nats) * 1024.0 / static_cast<double>(vocab_size);
}

double overall_ppl(const std::vector<double> &per_route_entropies, std::int64_t vocab_size) {
    require(!per_route_entropies.empty(), "need at least one entropy value");
    double mean = 0.0;
    for (double h : per_route_entropies) {
        require(h >= 0.0, "cross-entropy must be nonnegative");
        mean += h;
    }
    mean /= static_cast<double>(per_route_entropies.size());
    return ppl_at_1024(mean, vocab_size);
}

double conditional_eval(const Predictor &pred, const DualTrackSequence &seq, std::int64_t tau) {
    std::int64_t total = seq.length();
    require(tau >= 0, "tau must be nonnegative");
    if (tau >= total)
        throw std::invalid_argument("tau (" + std::to_string(tau) +
                                    ") must be smaller than the sequence length (" +
                                    std::to_string(total) + ")");
    const auto &vocal = seq.vocal.indices;
    const auto &accomp = seq.accomp.indices;
    double acc = 0.0;
    for (std::int64_t t = tau; t < total; ++t) {
        std::vector<double> lp = pred.conditional_log_probs(
            std::span(vocal.data(), vocal.size()),
            std::span(accomp.data(), static_cast<std::size_t>(t)));
        check_normalized(lp);
        require(accomp[static_cast<std::size_t>(t)] < lp.size(),
                "target token outside predictor vocabulary");
        acc -= lp[accomp[static_cast<std::size_t>(t)]];
    }
    return acc / static_cast<double>(total - tau);
}

std::int64_t default_prefix_frames(double rate) {
    require(rate > 0.0, "rate must be positive");
    return static_cast<std::int64_t>(std::llround(2.0 * rate));
}

EvalReport evaluate(const Predictor &pred, const std::vector<DualTrackSequence> &corpus,
                    std::int64_t tau, const std::vector<std::int64_t> &ks) {
    require(!corpus.empty(), "empty corpus");
    EvalReport report;
    std::vector<double> entropies;
    std::int64_t vocab = 0;
    for (Route route : {Route::Vocal, Route::Accompaniment}) {
        RouteReport rr;
        rr.route = route;
        rr.cross_entropy = avg_cross_entropy(pred, corpus, route);
        rr.ppl = ppl_at_1024(rr.cross_entropy, pred.vocab_size(route));
        rr.topk = topk_accuracy(pred, corpus, route, ks);
        entropies.push_back(rr.cross_entropy);
        vocab = pred.vocab_size(route);
        report.routes.push_back(std::move(rr));
    }
    report.overall = overall_ppl(entropies, vocab);

    double cond = 0.0;
    std::int64_t counted = 0;
    for (const DualTrackSequence &seq : corpus) {
        if (tau >= seq.length()) continue;  // sequences shorter than the prefix contribute nothing
        cond += conditional_eval(pred, seq, tau);
        ++counted;
    }
    require(counted > 0, "no sequence longer than the conditional prefix");
    report.conditional_entropy = cond / static_cast<double>(counted);
    report.conditional_ppl = ppl_at_1024(report.conditional_entropy, vocab);
    return report;
}

void write_report_csv(const std::string &path, const EvalReport &report) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "route,H_nats,ppl_at_1024,top1,top5,top10,top50\n";
    for (const RouteReport &rr : report.routes) {
        out << route_name(rr.route) << ',' << rr.cross_entropy << ',' << rr.ppl;
        for (double acc : rr.topk) out << ',' << acc;
        out << '\n';
    }
    out << "overall,," << report.overall << ",,,,\n";
    out << "cond," << report.conditional_entropy << ',' << report.conditional_ppl << ",,,,\n";
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace duotok::lmeval

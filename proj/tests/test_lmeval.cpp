#include <cmath>
#include <fstream>

#include "doctest.h"
#include "duotok/lmeval.hpp"
#include "duotok/rng.hpp"
#include "helpers.hpp"

using namespace duotok;
using lmeval::CountLm;
using lmeval::ExternalPredictor;
using lmeval::UniformPredictor;
using tokens::DualTrackSequence;
using tokens::TrackTokens;

namespace {

DualTrackSequence make_seq(std::vector<std::uint32_t> vocal_idx,
                           std::vector<std::uint32_t> accomp_idx, std::uint32_t vocab,
                           double rate = 25.0) {
    TrackTokens v{Route::Vocal, vocab, rate, std::move(vocal_idx)};
    TrackTokens a{Route::Accompaniment, vocab, rate, std::move(accomp_idx)};
    return tokens::align(std::move(v), std::move(a));
}

// Knows the corpus and puts (almost) all mass on the true next token.
struct OraclePredictor final : lmeval::Predictor {
    const std::vector<DualTrackSequence> *corpus;
    std::int64_t k;

    std::int64_t vocab_size(Route) const override { return k; }
    std::vector<double> log_probs(Route route, std::span<const std::uint32_t> ctx) const override {
        // find the sequence whose prefix matches; positions are unique here
        // because tests use a single sequence per corpus
        const auto &idx = (*corpus)[0].track(route).indices;
        std::vector<double> lp(static_cast<std::size_t>(k), -1e9);
        double rest = std::log(1e-12 / static_cast<double>(k - 1));
        for (auto &v : lp) v = rest;
        lp[idx[ctx.size()]] = std::log(1.0 - 1e-12);
        return lp;
    }
};

// Near-uniform with a tiny deterministic tilt so ranking has no ties.
struct JitteredUniform final : lmeval::Predictor {
    std::int64_t k;

    explicit JitteredUniform(std::int64_t vocab) : k(vocab) {}
    std::int64_t vocab_size(Route) const override { return k; }
    std::vector<double> log_probs(Route, std::span<const std::uint32_t>) const override {
        std::vector<double> p(static_cast<std::size_t>(k));
        double total = 0.0;
        for (std::int64_t j = 0; j < k; ++j) {
            p[static_cast<std::size_t>(j)] =
                1.0 + 1e-6 * static_cast<double>((j * 2654435761u) % 1000);
            total += p[static_cast<std::size_t>(j)];
        }
        for (auto &v : p) v = std::log(v / total);
        return p;
    }
};

}  // namespace

TEST_SUITE("lmeval") {

TEST_CASE("perfect predictor reaches zero cross-entropy and full top-k") {
    std::vector<DualTrackSequence> corpus = {
        make_seq({3, 1, 4, 1, 5}, {2, 7, 1, 8, 2}, 16)};
    OraclePredictor oracle;
    oracle.corpus = &corpus;
    oracle.k = 16;

    CHECK(lmeval::avg_cross_entropy(oracle, corpus, Route::Vocal) == doctest::Approx(0.0).epsilon(1e-9));
    auto accs = lmeval::topk_accuracy(oracle, corpus, Route::Accompaniment, {1, 5, 10});
    for (double a : accs) CHECK(a == 1.0);
}

TEST_CASE("uniform predictor scores ln K everywhere") {
    std::vector<DualTrackSequence> corpus = {
        make_seq({0, 1, 2, 3}, {3, 2, 1, 0}, 32)};
    UniformPredictor uniform(32);
    CHECK(lmeval::avg_cross_entropy(uniform, corpus, Route::Vocal) ==
          doctest::Approx(std::log(32.0)));
    CHECK(lmeval::conditional_eval(uniform, corpus[0], 2) == doctest::Approx(std::log(32.0)));
}

TEST_CASE("bigram counts match hand-computed conditionals on a cycle") {
    // vocal stream 0,1,2,0,1,2,0 -> transitions 0->1 x2, 1->2 x2, 2->0 x2,
    // start-> 0 x1; with alpha = 1 and K = 3:
    // p(1|0) = (2+1)/(2+3) = 0.6
    std::vector<DualTrackSequence> corpus = {
        make_seq({0, 1, 2, 0, 1, 2, 0}, {0, 0, 0, 0, 0, 0, 0}, 3)};
    CountLm lm = lmeval::train_count_lm(corpus, Route::Vocal, 1.0);
    std::vector<std::uint32_t> ctx = {0};
    auto lp = lm.log_probs(Route::Vocal, std::span(ctx.data(), 1));
    CHECK(std::exp(lp[1]) == doctest::Approx(0.6));
    CHECK(std::exp(lp[0]) == doctest::Approx(0.2));
    CHECK(std::exp(lp[2]) == doctest::Approx(0.2));

    // start state: p(0|start) = (1+1)/(1+3) = 0.5
    auto first = lm.log_probs(Route::Vocal, {});
    CHECK(std::exp(first[0]) == doctest::Approx(0.5));

    // cross-entropy from the hand-built table
    double hand = -(std::log(0.5) + 2.0 * std::log(0.6) + 2.0 * std::log(0.6) +
                    2.0 * std::log(0.6)) / 7.0;
    CHECK(lmeval::avg_cross_entropy(lm, corpus, Route::Vocal) == doctest::Approx(hand));
}

TEST_CASE("large alpha washes the bigram out to near uniform") {
    std::vector<DualTrackSequence> corpus = {
        make_seq({0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 1, 1}, 4)};
    CountLm lm = lmeval::train_count_lm(corpus, Route::Vocal, 1e6);
    std::vector<std::uint32_t> ctx = {0};
    auto lp = lm.log_probs(Route::Vocal, std::span(ctx.data(), 1));
    for (double v : lp) CHECK(std::exp(v) == doctest::Approx(0.25).epsilon(1e-4));

    // small alpha keeps the self-transition near deterministic:
    // p(0|0) = (7 + 0.01) / (7 + 0.04)
    CountLm sharp = lmeval::train_count_lm(corpus, Route::Vocal, 0.01);
    auto lp2 = sharp.log_probs(Route::Vocal, std::span(ctx.data(), 1));
    CHECK(std::exp(lp2[0]) == doctest::Approx(7.01 / 7.04));
}

TEST_CASE("bigram on its own corpus beats the uniform predictor") {
    rng::SplitMix64 g(31);
    std::vector<std::uint32_t> vocal, accomp;
    std::uint32_t state = 0;
    for (int i = 0; i < 400; ++i) {
        state = (state + 1 + static_cast<std::uint32_t>(rng::uniform_below(g, 2))) % 8;
        vocal.push_back(state);
        accomp.push_back((state * 3) % 8);
    }
    std::vector<DualTrackSequence> corpus = {make_seq(vocal, accomp, 8)};
    CountLm lm = lmeval::train_count_lm(corpus, Route::Vocal, 0.5);
    double h = lmeval::avg_cross_entropy(lm, corpus, Route::Vocal);
    CHECK(h < std::log(8.0));
}

TEST_CASE("topk accuracy at chance level under a jittered uniform predictor") {
    const std::int64_t k = 1024;
    rng::SplitMix64 g(41);
    std::vector<std::uint32_t> vocal, accomp;
    for (int i = 0; i < 100000; ++i) {
        vocal.push_back(static_cast<std::uint32_t>(rng::uniform_below(g, k)));
        accomp.push_back(static_cast<std::uint32_t>(rng::uniform_below(g, k)));
    }
    std::vector<DualTrackSequence> corpus = {make_seq(vocal, accomp, k)};
    JitteredUniform pred(k);
    auto accs = lmeval::topk_accuracy(pred, corpus, Route::Vocal, {1});
    double p = 1.0 / static_cast<double>(k);
    double sd = std::sqrt(p * (1.0 - p) / 100000.0);
    CHECK(accs[0] >= p - 4.5 * sd);
    CHECK(accs[0] <= p + 4.5 * sd);
}

TEST_CASE("topk is monotone in k and k = K-1 misses only the argmin") {
    const std::int64_t k = 16;
    std::vector<DualTrackSequence> corpus = {
        make_seq({0, 5, 9, 15, 3}, {1, 2, 3, 4, 5}, static_cast<std::uint32_t>(k))};
    JitteredUniform pred(k);
    auto accs = lmeval::topk_accuracy(pred, corpus, Route::Vocal, {1, 5, 10, 15});
    for (std::size_t i = 1; i < accs.size(); ++i) CHECK(accs[i] >= accs[i - 1]);

    // with k = K-1 only the argmin-jitter token is outside the top set
    auto lp = pred.log_probs(Route::Vocal, {});
    std::int64_t argmin = 0;
    for (std::int64_t j = 1; j < k; ++j)
        if (lp[static_cast<std::size_t>(j)] < lp[static_cast<std::size_t>(argmin)]) argmin = j;
    std::vector<std::uint32_t> v(10, static_cast<std::uint32_t>(argmin));
    std::vector<std::uint32_t> a(10, 0);
    std::vector<DualTrackSequence> miss = {make_seq(v, a, static_cast<std::uint32_t>(k))};
    auto acc2 = lmeval::topk_accuracy(pred, miss, Route::Vocal, {15});
    CHECK(acc2[0] == 0.0);

    CHECK_THROWS_AS(lmeval::topk_accuracy(pred, corpus, Route::Vocal, {16}), std::invalid_argument);
}

TEST_CASE("ppl_at_1024 normalization identities") {
    for (std::int64_t s : {2LL, 1024LL, 4096LL, 32768LL})
        CHECK(lmeval::ppl_at_1024(std::log(static_cast<double>(s)), s) ==
              doctest::Approx(1024.0).epsilon(1e-9));
    CHECK(lmeval::ppl_at_1024(0.0, 2048) == doctest::Approx(0.5));
    // inverting the published per-route value: H = ln(3.759 * 32768 / 1024)
    double h = std::log(3.759 * 32768.0 / 1024.0);
    CHECK(lmeval::ppl_at_1024(h, 32768) == doctest::Approx(3.759).epsilon(1e-9));
}

TEST_CASE("overall ppl is the geometric mean of the per-route values") {
    const std::int64_t s = 32768;
    auto h = [&](double ppl) { return std::log(ppl * static_cast<double>(s) / 1024.0); };
    CHECK(lmeval::overall_ppl({h(3.759), h(6.0024)}, s) == doctest::Approx(4.75).epsilon(0.005));
    CHECK(lmeval::overall_ppl({h(6.933), h(9.4622)}, s) == doctest::Approx(8.10).epsilon(0.005));
    CHECK(lmeval::overall_ppl({h(5.0), h(5.0)}, s) == doctest::Approx(5.0));
}

TEST_CASE("conditional eval reduces to the unconditional tail for vocal-blind predictors") {
    rng::SplitMix64 g(51);
    std::vector<std::uint32_t> vocal, accomp;
    for (int i = 0; i < 60; ++i) {
        vocal.push_back(static_cast<std::uint32_t>(rng::uniform_below(g, 8)));
        accomp.push_back(static_cast<std::uint32_t>(rng::uniform_below(g, 8)));
    }
    std::vector<DualTrackSequence> corpus = {make_seq(vocal, accomp, 8)};
    CountLm lm = lmeval::train_count_lm(corpus, Route::Accompaniment, 1.0);

    const std::int64_t tau = 10;
    double cond = lmeval::conditional_eval(lm, corpus[0], tau);

    double manual = 0.0;
    for (std::int64_t t = tau; t < 60; ++t) {
        auto lp = lm.log_probs(Route::Accompaniment,
                               std::span(accomp.data(), static_cast<std::size_t>(t)));
        manual -= lp[accomp[static_cast<std::size_t>(t)]];
    }
    manual /= static_cast<double>(60 - tau);
    CHECK(cond == doctest::Approx(manual).epsilon(1e-12));

    CHECK_THROWS_AS(lmeval::conditional_eval(lm, corpus[0], 60), std::invalid_argument);
}

TEST_CASE("default conditional prefix is two seconds of tokens") {
    CHECK(lmeval::default_prefix_frames(25.0) == 50);
    CHECK(lmeval::default_prefix_frames(100.0) == 200);
}

TEST_CASE("DTLP round trip, renormalization, and corruption checks") {
    testutil::TempDir dir("dtlp");
    ExternalPredictor pred;
    pred.route = Route::Accompaniment;
    pred.k = 8;
    pred.rows = Matrix(5, 8);
    rng::SplitMix64 g(61);
    for (std::int64_t t = 0; t < 5; ++t) {
        double total = 0.0;
        for (std::int64_t j = 0; j < 8; ++j) {
            pred.rows(t, j) = rng::uniform01(g) + 0.1;
            total += pred.rows(t, j);
        }
        for (std::int64_t j = 0; j < 8; ++j) pred.rows(t, j) = std::log(pred.rows(t, j) / total);
    }
    lmeval::write_logprobs(dir.file("p.dtlp"), pred);
    ExternalPredictor back = lmeval::read_logprobs(dir.file("p.dtlp"));
    CHECK(back.route == Route::Accompaniment);
    CHECK(back.k == 8);
    CHECK(back.rows.rows == 5);
    for (std::int64_t t = 0; t < 5; ++t)
        for (std::int64_t j = 0; j < 8; ++j)
            CHECK(back.rows(t, j) == static_cast<double>(static_cast<float>(pred.rows(t, j))));

    // stored rows are raw; serving normalizes them exactly
    std::vector<std::uint32_t> ctx = {0, 1};
    auto lp = back.log_probs(Route::Accompaniment, std::span(ctx.data(), 2));
    REQUIRE(lp.size() == 8);
    double sum = 0.0;
    for (double v : lp) sum += std::exp(v);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(back.log_probs(Route::Vocal, {}), DataError);

    // a second write of the loaded rows is byte-identical
    lmeval::write_logprobs(dir.file("p2.dtlp"), back);
    std::ifstream f1(dir.file("p.dtlp"), std::ios::binary);
    std::ifstream f2(dir.file("p2.dtlp"), std::ios::binary);
    std::vector<char> b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::vector<char> b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);

    // truncated payload
    {
        std::ifstream in(dir.file("p.dtlp"), std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        std::ofstream out(dir.file("cut.dtlp"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    }
    CHECK_THROWS_AS(lmeval::read_logprobs(dir.file("cut.dtlp")), FormatError);
}

TEST_CASE("evaluate assembles the whole report") {
    rng::SplitMix64 g(71);
    std::vector<DualTrackSequence> corpus;
    for (int s = 0; s < 3; ++s) {
        std::vector<std::uint32_t> vocal, accomp;
        for (int i = 0; i < 80; ++i) {
            vocal.push_back(static_cast<std::uint32_t>(rng::uniform_below(g, 12)));
            accomp.push_back(static_cast<std::uint32_t>(rng::uniform_below(g, 12)));
        }
        corpus.push_back(make_seq(vocal, accomp, 12));
    }
    UniformPredictor uniform(12);
    auto report = lmeval::evaluate(uniform, corpus, 10, {1, 5, 10});
    REQUIRE(report.routes.size() == 2);
    for (const auto &rr : report.routes) {
        CHECK(rr.cross_entropy == doctest::Approx(std::log(12.0)));
        CHECK(rr.ppl == doctest::Approx(1024.0).epsilon(1e-9));  // the normalization identity
        CHECK(rr.topk.size() == 3);
    }
    CHECK(report.overall == doctest::Approx(1024.0).epsilon(1e-6));
    CHECK(report.conditional_entropy == doctest::Approx(std::log(12.0)));

    testutil::TempDir dir("report");
    lmeval::write_report_csv(dir.file("r.csv"), report);
    std::ifstream in(dir.file("r.csv"));
    std::string header;
    std::getline(in, header);
    CHECK(header == "route,H_nats,ppl_at_1024,top1,top5,top10,top50");
}

}  // TEST_SUITE

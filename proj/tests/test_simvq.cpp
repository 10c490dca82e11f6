#include <cmath>

#include "doctest.h"
#include "duotok/simvq.hpp"
#include "helpers.hpp"

using namespace duotok;
using simvq::Codebook;
using simvq::DualCodebookBank;

namespace {

// Frozen-assignment loss used by the finite-difference oracle:
// mean_t ||e_t - C_{k_t} W||^2 with k fixed.
double frozen_loss(const FeatureSequence &e, const Codebook &cb,
                   const std::vector<std::uint32_t> &assignments, const Matrix &w) {
    double acc = 0.0;
    std::int64_t d = e.dim();
    for (std::int64_t t = 0; t < e.frames(); ++t) {
        const double *code = cb.c.row(static_cast<std::int64_t>(assignments[static_cast<std::size_t>(t)]));
        for (std::int64_t j = 0; j < d; ++j) {
            double q = 0.0;
            for (std::int64_t i = 0; i < d; ++i) q += code[i] * w(i, j);
            double diff = e.values(t, j) - q;
            acc += diff * diff;
        }
    }
    return acc / static_cast<double>(e.frames());
}

}  // namespace

TEST_SUITE("simvq") {

TEST_CASE("effective codebook: identity, scaling, naive matmul oracle") {
    auto cb = simvq::init_codebook(1, 8, 4);
    CHECK(simvq::effective_codebook(cb).data == cb.c.data);  // W = I at init

    cb.w = Matrix::identity(4);
    for (std::int64_t i = 0; i < 4; ++i) cb.w(i, i) = 2.0;
    Matrix doubled = simvq::effective_codebook(cb);
    for (std::size_t i = 0; i < cb.c.data.size(); ++i)
        CHECK(doubled.data[i] == doctest::Approx(2.0 * cb.c.data[i]));

    cb.w = testutil::random_matrix(55, 4, 4);
    Matrix fast = simvq::effective_codebook(cb);
    Matrix slow = simvq::effective_codebook_serial(cb);
    CHECK(fast.data == slow.data);
    for (std::int64_t k = 0; k < 8; ++k)
        for (std::int64_t j = 0; j < 4; ++j) {
            double acc = 0.0;
            for (std::int64_t i = 0; i < 4; ++i) acc += cb.c(k, i) * cb.w(i, j);
            CHECK(std::abs(fast(k, j) - acc) <= 1e-12);
        }
}

TEST_CASE("quantize returns exact rows with zero loss on codebook points") {
    auto bank = simvq::init_bank(3, 8, 4);
    FeatureSequence e;
    e.frame_rate = 25.0;
    e.values = Matrix(3, 4);
    for (std::int64_t j = 0; j < 4; ++j) {
        e.values(0, j) = bank.vocal.c(5, j);
        e.values(1, j) = bank.vocal.c(0, j);
        e.values(2, j) = bank.vocal.c(7, j);
    }
    auto res = simvq::quantize(e, bank, Route::Vocal, 0.25);
    CHECK(res.indices == std::vector<std::uint32_t>{5, 0, 7});
    CHECK(res.codebook_term == 0.0);
    CHECK(res.commitment_term == 0.0);
    CHECK(simvq::vq_loss(res, 0.25) == 0.0);
    // quantized rows are exact copies
    for (std::int64_t j = 0; j < 4; ++j) CHECK(res.quantized(0, j) == bank.vocal.c(5, j));
}

TEST_CASE("quantize matches brute force on random instances") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::int64_t k = 4 + static_cast<std::int64_t>(seed % 4) * 8;
        std::int64_t d = 2 + static_cast<std::int64_t>(seed % 3) * 2;
        auto bank = simvq::init_bank(seed, k, d);
        bank.accomp.w = testutil::random_matrix(seed + 100, d, d);
        FeatureSequence e = testutil::random_features(seed + 200, 64, d);

        auto res = simvq::quantize(e, bank, Route::Accompaniment, 0.25);
        Matrix effective = simvq::effective_codebook_serial(bank.accomp);
        CHECK(res.indices == testutil::nn_oracle(e.values, effective));
        CHECK(simvq::quantize_serial(e, bank, Route::Accompaniment, 0.25).indices == res.indices);
    }
}

TEST_CASE("tie-break picks the lowest index") {
    auto bank = simvq::init_bank(11, 12, 3);
    for (std::int64_t j = 0; j < 3; ++j) bank.vocal.c(9, j) = bank.vocal.c(3, j);
    FeatureSequence e;
    e.frame_rate = 25.0;
    e.values = Matrix(1, 3);
    for (std::int64_t j = 0; j < 3; ++j) e.values(0, j) = bank.vocal.c(3, j) + 0.01;
    auto res = simvq::quantize(e, bank, Route::Vocal, 0.0);
    CHECK(res.indices[0] == 3);
}

TEST_CASE("permuting frames permutes indices identically") {
    auto bank = simvq::init_bank(21, 16, 4);
    FeatureSequence e = testutil::random_features(22, 40, 4);
    auto base = simvq::quantize(e, bank, Route::Vocal, 0.25);

    FeatureSequence reversed;
    reversed.frame_rate = e.frame_rate;
    reversed.values = Matrix(40, 4);
    for (std::int64_t t = 0; t < 40; ++t)
        for (std::int64_t j = 0; j < 4; ++j) reversed.values(t, j) = e.values(39 - t, j);
    auto flipped = simvq::quantize(reversed, bank, Route::Vocal, 0.25);
    for (std::int64_t t = 0; t < 40; ++t)
        CHECK(flipped.indices[static_cast<std::size_t>(t)] ==
              base.indices[static_cast<std::size_t>(39 - t)]);
}

TEST_CASE("vq_loss combines the two terms linearly in beta") {
    simvq::QuantizeResult res;
    res.codebook_term = 0.8;
    res.commitment_term = 0.8;
    CHECK(simvq::vq_loss(res, 0.0) == doctest::Approx(0.8));
    CHECK(simvq::vq_loss(res, 1.0) == doctest::Approx(1.6));
    CHECK(simvq::vq_loss(res, 0.25) == doctest::Approx(1.0));
}

TEST_CASE("vq_grad_w is zero at a perfect fit") {
    auto cb = simvq::init_codebook(31, 8, 4);
    FeatureSequence e;
    e.frame_rate = 25.0;
    e.values = Matrix(8, 4);
    for (std::int64_t t = 0; t < 8; ++t)
        for (std::int64_t j = 0; j < 4; ++j) e.values(t, j) = cb.c(t, j);
    std::vector<std::uint32_t> assignments = {0, 1, 2, 3, 4, 5, 6, 7};
    Matrix grad = simvq::vq_grad_w(e, cb, assignments);
    for (double v : grad.data) CHECK(v == doctest::Approx(0.0));
}

TEST_CASE("vq_grad_w matches central finite differences") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::int64_t d = 3 + static_cast<std::int64_t>(seed % 3);
        auto cb = simvq::init_codebook(seed + 40, 10, d);
        cb.w = testutil::random_matrix(seed + 50, d, d, 0.5);
        for (std::int64_t i = 0; i < d; ++i) cb.w(i, i) += 1.0;
        FeatureSequence e = testutil::random_features(seed + 60, 20, d);
        auto res = simvq::quantize_serial(e, {cb, cb}, Route::Vocal, 0.25);

        Matrix grad = simvq::vq_grad_w(e, cb, res.indices);
        CHECK(simvq::vq_grad_w_serial(e, cb, res.indices).data == grad.data);
        const double step = 1e-5;
        for (std::int64_t i = 0; i < d; ++i)
            for (std::int64_t j = 0; j < d; ++j) {
                Matrix up = cb.w, down = cb.w;
                up(i, j) += step;
                down(i, j) -= step;
                double numeric =
                    (frozen_loss(e, cb, res.indices, up) - frozen_loss(e, cb, res.indices, down)) /
                    (2.0 * step);
                double denom = std::max({std::abs(numeric), std::abs(grad(i, j)), 1e-6});
                CHECK(std::abs(numeric - grad(i, j)) / denom < 1e-4);
            }
    }
}

TEST_CASE("vq_grad_w on a basis row touches only that row") {
    std::int64_t d = 5;
    auto cb = simvq::init_codebook(70, 6, d);
    for (std::int64_t j = 0; j < d; ++j) cb.c(2, j) = 0.0;
    cb.c(2, 3) = 1.0;  // e_3 basis row
    FeatureSequence e = testutil::random_features(71, 1, d);
    std::vector<std::uint32_t> assignments = {2};
    Matrix grad = simvq::vq_grad_w(e, cb, assignments);
    for (std::int64_t i = 0; i < d; ++i)
        for (std::int64_t j = 0; j < d; ++j) {
            if (i == 3) continue;
            CHECK(grad(i, j) == 0.0);
        }
    bool any = false;
    for (std::int64_t j = 0; j < d; ++j) any = any || grad(3, j) != 0.0;
    CHECK(any);
}

TEST_CASE("vq_grad_w rejects stale assignments") {
    auto cb = simvq::init_codebook(80, 4, 3);
    FeatureSequence e = testutil::random_features(81, 2, 3);
    std::vector<std::uint32_t> stale = {0, 9};
    CHECK_THROWS_AS(simvq::vq_grad_w(e, cb, stale), std::invalid_argument);
}

TEST_CASE("adamw_step: zero gradient, zero lr, and the first-step closed form") {
    std::int64_t d = 3;
    auto cb = simvq::init_codebook(90, 4, d);
    auto state = simvq::init_adamw_state(d);
    Matrix w0 = cb.w;

    // zero gradient with zero decay leaves W untouched
    simvq::AdamWParams no_decay{0.9, 0.96, 0.0, 1e-8};
    simvq::adamw_step(cb, Matrix(d, d), state, 0.01, no_decay);
    CHECK(cb.w.data == w0.data);
    CHECK(state.step == 1);

    // lr = 0 leaves W untouched but still updates the moments
    Matrix g = testutil::random_matrix(91, d, d);
    simvq::adamw_step(cb, g, state, 0.0);
    CHECK(cb.w.data == w0.data);
    bool moments_moved = false;
    for (double v : state.m.data) moments_moved = moments_moved || v != 0.0;
    CHECK(moments_moved);

    // first step from fresh state: delta = -lr*(g/(|g|+eps) + wd*W)
    auto cb2 = simvq::init_codebook(92, 4, d);
    auto fresh = simvq::init_adamw_state(d);
    Matrix w_before = cb2.w;
    double lr = 0.05;
    simvq::AdamWParams params;  // defaults (0.9, 0.96, 0.1)
    simvq::adamw_step(cb2, g, fresh, lr, params);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
        double ghat = g.data[i];  // m_hat = g, v_hat = g^2 after bias correction
        double expected = w_before.data[i] -
                          lr * (ghat / (std::abs(g.data[i]) + params.eps) +
                                params.weight_decay * w_before.data[i]);
        CHECK(cb2.w.data[i] == doctest::Approx(expected).epsilon(1e-12));
    }

    Matrix bad(d, d);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(simvq::adamw_step(cb2, bad, fresh, lr), DataError);
}

TEST_CASE("lr schedule: ramp, peak, trough, periodicity") {
    simvq::ScheduleConfig sch{1e-4, 3000, 30000};
    CHECK(simvq::lr_at(0, sch) == 0.0);
    CHECK(simvq::lr_at(1500, sch) == doctest::Approx(5e-5));
    CHECK(simvq::lr_at(3000, sch) == doctest::Approx(1e-4));
    CHECK(simvq::lr_at(3000 + 15000, sch) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(simvq::lr_at(3000 + 30000, sch) == doctest::Approx(1e-4));
    CHECK(simvq::lr_at(3000 + 7500, sch) == doctest::Approx(simvq::lr_at(3000 + 37500, sch)));
}

TEST_CASE("codebook_stats: degenerate, uniform, and histogram oracle") {
    auto one = simvq::codebook_stats(std::vector<std::uint32_t>(64, 0), 8);
    CHECK(one.utilization == doctest::Approx(1.0 / 8.0));
    CHECK(one.entropy == 0.0);

    std::vector<std::uint32_t> cycle(64);
    for (std::size_t i = 0; i < 64; ++i) cycle[i] = static_cast<std::uint32_t>(i % 8);
    auto full = simvq::codebook_stats(cycle, 8);
    CHECK(full.utilization == 1.0);
    CHECK(full.entropy == doctest::Approx(std::log(8.0)));

    rng::SplitMix64 g(7);
    std::vector<std::uint32_t> random_idx(64);
    for (auto &v : random_idx) v = static_cast<std::uint32_t>(rng::uniform_below(g, 8));
    std::vector<double> hist(8, 0.0);
    for (auto v : random_idx) hist[v] += 1.0;
    double expect_entropy = 0.0;
    std::int64_t distinct = 0;
    for (double c : hist) {
        if (c == 0.0) continue;
        ++distinct;
        expect_entropy -= (c / 64.0) * std::log(c / 64.0);
    }
    auto stats = simvq::codebook_stats(random_idx, 8);
    CHECK(stats.utilization == doctest::Approx(static_cast<double>(distinct) / 8.0));
    CHECK(stats.entropy == doctest::Approx(expect_entropy));

    CHECK_THROWS_AS(simvq::codebook_stats({}, 8), std::invalid_argument);
}

TEST_CASE("train_w: zero-gradient fixed point and decay-only drift") {
    // features exactly on the codes, zero weight decay: loss 0 forever
    auto bank = simvq::init_bank(100, 8, 3);
    simvq::Batch batch;
    batch.route = Route::Vocal;
    batch.features.frame_rate = 25.0;
    batch.features.values = Matrix(8, 3);
    for (std::int64_t t = 0; t < 8; ++t)
        for (std::int64_t j = 0; j < 3; ++j) batch.features.values(t, j) = bank.vocal.c(t, j);

    simvq::TrainOptions opts;
    opts.steps = 10;
    opts.schedule = {0.01, 1, 100};
    opts.optimizer.weight_decay = 0.0;
    Matrix w_before = bank.vocal.w;
    auto log = simvq::train_w({batch}, bank, opts);
    for (const auto &rec : log) CHECK(rec.vq_loss == 0.0);
    CHECK(bank.vocal.w.data == w_before.data);

    // with decay on, a zero-gradient update is exactly -lr*wd*W
    auto bank2 = simvq::init_bank(100, 8, 3);
    auto bank3 = bank2;
    simvq::AdamWState st = simvq::init_adamw_state(3);
    simvq::adamw_step(bank3.vocal, Matrix(3, 3), st, 0.01);
    for (std::size_t i = 0; i < bank2.vocal.w.data.size(); ++i) {
        double expected = bank2.vocal.w.data[i] * (1.0 - 0.01 * 0.1);
        CHECK(bank3.vocal.w.data[i] == doctest::Approx(expected));
    }
}

TEST_CASE("train_w reduces the loss on clustered features") {
    // 8 well-separated 2-D clusters; 500 steps must lower the 20-step
    // moving average between the first and last windows.
    const std::int64_t k = 16, d = 2;
    auto bank = simvq::init_bank(200, k, d);
    rng::SplitMix64 g(201);
    std::vector<simvq::Batch> batches;
    for (int b = 0; b < 4; ++b) {
        simvq::Batch batch;
        batch.route = b % 2 == 0 ? Route::Vocal : Route::Accompaniment;
        batch.features.frame_rate = 25.0;
        batch.features.values = Matrix(128, d);
        for (std::int64_t t = 0; t < 128; ++t) {
            int cluster = static_cast<int>(rng::uniform_below(g, 8));
            double angle = 2.0 * 3.14159265358979323846 * cluster / 8.0;
            batch.features.values(t, 0) = 3.0 * std::cos(angle) + 0.05 * rng::gaussian(g);
            batch.features.values(t, 1) = 3.0 * std::sin(angle) + 0.05 * rng::gaussian(g);
        }
        batches.push_back(std::move(batch));
    }

    simvq::TrainOptions opts;
    opts.steps = 500;
    opts.schedule = {0.05, 20, 480};
    auto log = simvq::train_w(batches, bank, opts);

    auto window_mean = [&](std::size_t start) {
        double acc = 0.0;
        for (std::size_t i = start; i < start + 20; ++i) acc += log[i].vq_loss;
        return acc / 20.0;
    };
    CHECK(window_mean(480) < window_mean(0));
}

TEST_CASE("routing isolation: vocal-only stream leaves accompaniment untouched") {
    auto bank = simvq::init_bank(300, 8, 3);
    Matrix accomp_w = bank.accomp.w;
    Matrix accomp_c = bank.accomp.c;

    simvq::Batch batch;
    batch.route = Route::Vocal;
    batch.features = testutil::random_features(301, 64, 3);
    simvq::TrainOptions opts;
    opts.steps = 50;
    opts.schedule = {0.05, 5, 100};
    simvq::train_w({batch}, bank, opts);

    CHECK(bank.accomp.w.data == accomp_w.data);
    CHECK(bank.accomp.c.data == accomp_c.data);
    CHECK(bank.vocal.w.data != Matrix::identity(3).data);
}

TEST_CASE("DTCB round trip and validation") {
    testutil::TempDir dir("dtcb");
    auto cb = simvq::init_codebook(400, 8, 4);
    cb.w = testutil::random_matrix(401, 4, 4);
    simvq::write_codebook(dir.file("cb.dtcb"), cb);
    auto back = simvq::read_codebook(dir.file("cb.dtcb"));
    CHECK(back.c.data == cb.c.data);
    CHECK(back.w.data == cb.w.data);

    CHECK_THROWS_AS(simvq::read_codebook(dir.file("missing.dtcb")), DataError);
}

}  // TEST_SUITE

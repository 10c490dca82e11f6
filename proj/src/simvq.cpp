#include "duotok/simvq.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "duotok/io.hpp"
#include "duotok/rng.hpp"

namespace duotok::simvq {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void effective_row(const Codebook &cb, std::int64_t k, Matrix &out) {
    std::int64_t d = cb.dim();
    const double *code = cb.c.row(k);
    double *dst = out.row(k);
    for (std::int64_t j = 0; j < d; ++j) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < d; ++i) acc += code[i] * cb.w(i, j);
        dst[j] = acc;
    }
}

void nearest_row(const Matrix &points, const Matrix &codes, std::int64_t t, std::uint32_t *out) {
    std::int64_t d = points.cols;
    const double *p = points.row(t);
    std::int64_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < codes.rows; ++k) {
        const double *c = codes.row(k);
        double dist = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            double diff = p[j] - c[j];
            dist += diff * diff;
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = k;
        }
    }
    out[t] = static_cast<std::uint32_t>(best);
}

template <bool Parallel>
QuantizeResult quantize_impl(const FeatureSequence &e, const Codebook &cb, double beta) {
    require(beta >= 0.0, "beta must be nonnegative");
    require(e.frames() > 0, "empty feature sequence");
    require(e.dim() == cb.dim(), "feature dim does not match codebook dim");

    Matrix effective = Parallel ? effective_codebook(cb) : effective_codebook_serial(cb);
    std::int64_t u = e.frames();
    std::int64_t d = e.dim();

    QuantizeResult res;
    res.indices.resize(static_cast<std::size_t>(u));
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t t = 0; t < u; ++t) nearest_row(e.values, effective, t, res.indices.data());
    } else {
        for (std::int64_t t = 0; t < u; ++t) nearest_row(e.values, effective, t, res.indices.data());
    }

    res.quantized = Matrix(u, d);
    double acc = 0.0;
    for (std::int64_t t = 0; t < u; ++t) {
        const double *code = effective.row(static_cast<std::int64_t>(res.indices[static_cast<std::size_t>(t)]));
        double *q = res.quantized.row(t);
        const double *p = e.values.row(t);
        double dist = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            q[j] = code[j];
            double diff = p[j] - code[j];
            dist += diff * diff;
        }
        acc += dist;
    }
    res.codebook_term = acc / static_cast<double>(u);
    res.commitment_term = res.codebook_term;
    return res;
}

void grad_row(const FeatureSequence &e, const Codebook &cb,
              const std::vector<std::uint32_t> &assignments, const Matrix &residual,
              std::int64_t i, Matrix &grad) {
    // grad[i][j] = (-2/U) sum_t C[k_t][i] * residual[t][j]; the t-loop runs in
    // a fixed order per output row, so the result does not depend on the
    // thread count.
    std::int64_t u = e.frames();
    std::int64_t d = e.dim();
    double *g = grad.row(i);
    for (std::int64_t t = 0; t < u; ++t) {
        double ci = cb.c(static_cast<std::int64_t>(assignments[static_cast<std::size_t>(t)]), i);
        if (ci == 0.0) continue;
        const double *r = residual.row(t);
        for (std::int64_t j = 0; j < d; ++j) g[j] += ci * r[j];
    }
    double scale = -2.0 / static_cast<double>(u);
    for (std::int64_t j = 0; j < d; ++j) g[j] *= scale;
}

template <bool Parallel>
Matrix grad_impl(const FeatureSequence &e, const Codebook &cb,
                 const std::vector<std::uint32_t> &assignments) {
    require(static_cast<std::size_t>(e.frames()) == assignments.size(),
            "one assignment per frame required");
    require(e.dim() == cb.dim(), "feature dim does not match codebook dim");
    for (std::uint32_t k : assignments)
        if (k >= static_cast<std::uint32_t>(cb.size()))
            throw std::invalid_argument("stale assignment: index out of range");

    std::int64_t u = e.frames();
    std::int64_t d = e.dim();
    Matrix effective = Parallel ? effective_codebook(cb) : effective_codebook_serial(cb);
    Matrix residual(u, d);
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t t = 0; t < u; ++t) {
            const double *code = effective.row(static_cast<std::int64_t>(assignments[static_cast<std::size_t>(t)]));
            const double *p = e.values.row(t);
            double *r = residual.row(t);
            for (std::int64_t j = 0; j < d; ++j) r[j] = p[j] - code[j];
        }
    } else {
        for (std::int64_t t = 0; t < u; ++t) {
            const double *code = effective.row(static_cast<std::int64_t>(assignments[static_cast<std::size_t>(t)]));
            const double *p = e.values.row(t);
            double *r = residual.row(t);
            for (std::int64_t j = 0; j < d; ++j) r[j] = p[j] - code[j];
        }
    }

    Matrix grad(d, d);
    if constexpr (Parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < d; ++i) grad_row(e, cb, assignments, residual, i, grad);
    } else {
        for (std::int64_t i = 0; i < d; ++i) grad_row(e, cb, assignments, residual, i, grad);
    }
    return grad;
}

}  // namespace

Codebook init_codebook(std::uint64_t seed, std::int64_t k, std::int64_t d) {
    require(k >= 2, "codebook needs at least two entries");
    require(d > 0, "code dimension must be positive");
    Codebook cb;
    cb.seed = seed;
    cb.c = Matrix(k, d);
    rng::SplitMix64 g(seed);
    for (double &v : cb.c.data) v = rng::gaussian(g);
    cb.w = Matrix::identity(d);
    return cb;
}

DualCodebookBank init_bank(std::uint64_t seed, std::int64_t k, std::int64_t d) {
    DualCodebookBank bank;
    bank.vocal = init_codebook(seed, k, d);
    bank.accomp = init_codebook(seed + 1, k, d);
    return bank;
}

Matrix effective_codebook(const Codebook &cb) {
    require(cb.w.rows == cb.c.cols && cb.w.rows == cb.w.cols, "W must be d x d");
    Matrix out(cb.c.rows, cb.c.cols);
#pragma omp parallel for schedule(static)
    for (std::int64_t k = 0; k < cb.c.rows; ++k) effective_row(cb, k, out);
    return out;
}

Matrix effective_codebook_serial(const Codebook &cb) {
    require(cb.w.rows == cb.c.cols && cb.w.rows == cb.w.cols, "W must be d x d");
    Matrix out(cb.c.rows, cb.c.cols);
    for (std::int64_t k = 0; k < cb.c.rows; ++k) effective_row(cb, k, out);
    return out;
}

QuantizeResult quantize(const FeatureSequence &e, const DualCodebookBank &bank, Route route,
                        double beta) {
    return quantize_impl<true>(e, bank.branch(route), beta);
}

QuantizeResult quantize_serial(const FeatureSequence &e, const DualCodebookBank &bank, Route route,
                               double beta) {
    return quantize_impl<false>(e, bank.branch(route), beta);
}

QuantizeResult quantize(const FeatureSequence &e, const Codebook &cb, double beta) {
    return quantize_impl<true>(e, cb, beta);
}

QuantizeResult quantize_serial(const FeatureSequence &e, const Codebook &cb, double beta) {
    return quantize_impl<false>(e, cb, beta);
}

double vq_loss(const QuantizeResult &res, double beta) {
    require(beta >= 0.0, "beta must be nonnegative");
    return res.codebook_term + beta * res.commitment_term;
}

Matrix vq_grad_w(const FeatureSequence &e, const Codebook &cb,
                 const std::vector<std::uint32_t> &assignments) {
    return grad_impl<true>(e, cb, assignments);
}

Matrix vq_grad_w_serial(const FeatureSequence &e, const Codebook &cb,
                        const std::vector<std::uint32_t> &assignments) {
    return grad_impl<false>(e, cb, assignments);
}

AdamWState init_adamw_state(std::int64_t d) {
    AdamWState st;
    st.m = Matrix(d, d);
    st.v = Matrix(d, d);
    return st;
}

void adamw_step(Codebook &cb, const Matrix &grad, AdamWState &state, double lr,
                const AdamWParams &params) {
    require(lr >= 0.0, "learning rate must be nonnegative");
    require(grad.same_shape(cb.w), "gradient shape must match W");
    require(state.m.same_shape(cb.w) && state.v.same_shape(cb.w), "optimizer state shape mismatch");
    if (!all_finite(grad)) throw DataError("adamw_step: non-finite gradient");

    state.step += 1;
    double bc1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
        double g = grad.data[i];
        state.m.data[i] = params.beta1 * state.m.data[i] + (1.0 - params.beta1) * g;
        state.v.data[i] = params.beta2 * state.v.data[i] + (1.0 - params.beta2) * g * g;
        double m_hat = state.m.data[i] / bc1;
        double v_hat = state.v.data[i] / bc2;
        cb.w.data[i] -= lr * (m_hat / (std::sqrt(v_hat) + params.eps) +
                              params.weight_decay * cb.w.data[i]);
    }
}

double lr_at(std::int64_t step, const ScheduleConfig &sch) {
    require(step >= 0, "step must be nonnegative");
    require(sch.warmup_steps >= 1, "warmup_steps must be at least 1");
    require(sch.cycle_steps >= 1, "cycle_steps must be at least 1");
    if (step < sch.warmup_steps)
        return sch.peak_lr * static_cast<double>(step) / static_cast<double>(sch.warmup_steps);
    std::int64_t pos = (step - sch.warmup_steps) % sch.cycle_steps;
    double phase = kTwoPi * static_cast<double>(pos) / static_cast<double>(sch.cycle_steps);
    return sch.peak_lr * 0.5 * (1.0 + std::cos(phase));
}

CodebookStats codebook_stats(const std::vector<std::uint32_t> &indices, std::int64_t k) {
    require(!indices.empty(), "empty index sequence");
    require(k > 0, "codebook size must be positive");
    std::vector<std::int64_t> hist(static_cast<std::size_t>(k), 0);
    for (std::uint32_t idx : indices) {
        require(idx < static_cast<std::uint32_t>(k), "index out of range");
        hist[idx] += 1;
    }
    std::int64_t distinct = 0;
    double entropy = 0.0;
    double n = static_cast<double>(indices.size());
    for (std::int64_t count : hist) {
        if (count == 0) continue;
        ++distinct;
        double p = static_cast<double>(count) / n;
        entropy -= p * std::log(p);
    }
    return {static_cast<double>(distinct) / static_cast<double>(k), entropy};
}

std::vector<TrainRecord> train_w(const std::vector<Batch> &batches, DualCodebookBank &bank,
                                 const TrainOptions &opts) {
    require(!batches.empty(), "need at least one batch");
    require(opts.steps >= 1, "need at least one step");
    for (const Batch &b : batches)
        require(b.features.dim() == bank.dim(), "batch dim does not match bank dim");

    AdamWState state_vocal = init_adamw_state(bank.dim());
    AdamWState state_accomp = init_adamw_state(bank.dim());

    std::vector<TrainRecord> log;
    log.reserve(static_cast<std::size_t>(opts.steps));
    for (std::int64_t step = 0; step < opts.steps; ++step) {
        const Batch &batch = batches[static_cast<std::size_t>(step) % batches.size()];
        Codebook &cb = bank.branch(batch.route);
        AdamWState &state = batch.route == Route::Vocal ? state_vocal : state_accomp;

        QuantizeResult res = quantize(batch.features, bank, batch.route, opts.beta);
        Matrix grad = vq_grad_w(batch.features, cb, res.indices);
        double lr = lr_at(step, opts.schedule);
        adamw_step(cb, grad, state, lr, opts.optimizer);

        CodebookStats stats = codebook_stats(res.indices, cb.size());
        log.push_back({step, batch.route, lr, vq_loss(res, opts.beta), stats.utilization,
                       stats.entropy});
    }
    return log;
}

static const char kMagic[4] = {'D', 'T', 'C', 'B'};

void write_codebook(const std::string &path, const Codebook &cb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    io::write_magic(out, kMagic);
    io::write_version(out);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.size()));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(cb.dim()));
    for (double v : cb.c.data) io::write_pod<double>(out, v);
    for (double v : cb.w.data) io::write_pod<double>(out, v);
    if (!out) throw DataError("write failed: " + path);
}

Codebook read_codebook(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    io::expect_magic(in, kMagic, "DTCB");
    io::expect_version(in, "DTCB");
    auto k = io::read_pod<std::uint32_t>(in, "K");
    auto d = io::read_pod<std::uint32_t>(in, "d");
    if (k < 2 || d == 0) throw FormatError("DTCB: invalid dimensions");
    Codebook cb;
    cb.c = Matrix(k, d);
    cb.w = Matrix(d, d);
    for (double &v : cb.c.data) {
        v = io::read_pod<double>(in, "codebook value");
        if (!std::isfinite(v)) throw FormatError("DTCB: non-finite codebook value");
    }
    for (double &v : cb.w.data) {
        v = io::read_pod<double>(in, "basis value");
        if (!std::isfinite(v)) throw FormatError("DTCB: non-finite basis value");
    }
    return cb;
}

}  // namespace duotok::simvq

#include "duotok/bestrq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "duotok/io.hpp"
#include "duotok/rng.hpp"

namespace duotok::bestrq {

namespace {

void assign_one(const FeatureSequence &features, const RandomQuantizer &rq,
                std::int64_t t, std::vector<double> &proj, std::uint32_t *out) {
    std::int64_t d_in = rq.projection.rows;
    std::int64_t d_proj = rq.projection.cols;
    const double *frame = features.values.row(t);
    for (std::int64_t j = 0; j < d_proj; ++j) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < d_in; ++i) acc += frame[i] * rq.projection(i, j);
        proj[static_cast<std::size_t>(j)] = acc;
    }
    double norm = 0.0;
    for (std::int64_t j = 0; j < d_proj; ++j) norm += proj[static_cast<std::size_t>(j)] * proj[static_cast<std::size_t>(j)];
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (std::int64_t j = 0; j < d_proj; ++j) proj[static_cast<std::size_t>(j)] /= norm;

    std::int64_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::int64_t k = 0; k < rq.codebook.rows; ++k) {
        const double *code = rq.codebook.row(k);
        double dist = 0.0;
        for (std::int64_t j = 0; j < d_proj; ++j) {
            double diff = proj[static_cast<std::size_t>(j)] - code[j];
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
std::vector<std::uint32_t> assign_impl(const FeatureSequence &features, const RandomQuantizer &rq) {
    require(features.dim() == rq.projection.rows, "feature dim does not match quantizer d_in");
    std::int64_t frames = features.frames();
    std::vector<std::uint32_t> out(static_cast<std::size_t>(frames));
    if constexpr (Parallel) {
#pragma omp parallel
        {
            std::vector<double> proj(static_cast<std::size_t>(rq.projection.cols));
#pragma omp for schedule(static)
            for (std::int64_t t = 0; t < frames; ++t) assign_one(features, rq, t, proj, out.data());
        }
    } else {
        std::vector<double> proj(static_cast<std::size_t>(rq.projection.cols));
        for (std::int64_t t = 0; t < frames; ++t) assign_one(features, rq, t, proj, out.data());
    }
    return out;
}

}  // namespace

RandomQuantizer init_random_quantizer(std::uint64_t seed, std::int64_t d_in,
                                      std::int64_t d_proj, std::int64_t k_rq) {
    require(d_in > 0 && d_proj > 0, "dimensions must be positive");
    require(k_rq >= 2, "codebook needs at least two entries");

    RandomQuantizer rq;
    rq.seed = seed;
    rq.projection = Matrix(d_in, d_proj);
    rq.codebook = Matrix(k_rq, d_proj);

    // One sequential stream: projection entries first, then codebook entries.
    rng::SplitMix64 g(seed);
    for (double &v : rq.projection.data) v = rng::gaussian(g);
    for (double &v : rq.codebook.data) v = rng::gaussian(g);
    for (std::int64_t k = 0; k < k_rq; ++k) {
        double *row = rq.codebook.row(k);
        double norm = 0.0;
        for (std::int64_t j = 0; j < d_proj; ++j) norm += row[j] * row[j];
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (std::int64_t j = 0; j < d_proj; ++j) row[j] /= norm;
    }
    return rq;
}

std::vector<std::uint32_t> assign_targets(const FeatureSequence &features, const RandomQuantizer &rq) {
    return assign_impl<true>(features, rq);
}

std::vector<std::uint32_t> assign_targets_serial(const FeatureSequence &features, const RandomQuantizer &rq) {
    return assign_impl<false>(features, rq);
}

MaskPlan sample_mask(std::int64_t frames, double ratio, std::int64_t span_len, std::uint64_t seed) {
    require(ratio > 0.0 && ratio < 1.0, "ratio must be in (0, 1)");
    require(span_len >= 1, "span length must be at least 1");
    require(frames >= span_len, "need at least span_len frames");
    std::int64_t target = static_cast<std::int64_t>(std::llround(ratio * static_cast<double>(frames)));
    if (target < 1) throw std::invalid_argument("sample_mask: ratio*frames is below one frame");

    MaskPlan plan;
    plan.flags.assign(static_cast<std::size_t>(frames), false);
    plan.span_len = span_len;
    plan.target_ratio = ratio;

    // Shuffled candidate starts guarantee coverage without rejection loops.
    std::vector<std::int64_t> starts(static_cast<std::size_t>(frames - span_len + 1));
    std::iota(starts.begin(), starts.end(), 0);
    rng::SplitMix64 g(seed);
    for (std::size_t i = 0; i + 1 < starts.size(); ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng::uniform_below(g, starts.size() - i));
        std::swap(starts[i], starts[j]);
    }

    std::int64_t masked = 0;
    for (std::int64_t s : starts) {
        if (masked >= target) break;
        for (std::int64_t i = s; i < s + span_len; ++i) {
            if (!plan.flags[static_cast<std::size_t>(i)]) {
                plan.flags[static_cast<std::size_t>(i)] = true;
                ++masked;
            }
        }
    }
    return plan;
}

double mlm_loss(const Matrix &log_probs, const std::vector<std::uint32_t> &targets,
                const MaskPlan &plan, MlmReduction reduction) {
    require(static_cast<std::size_t>(log_probs.rows) == targets.size(),
            "one target per frame required");
    require(plan.flags.size() == targets.size(), "mask length must match frame count");
    std::int64_t k = log_probs.cols;
    for (std::int64_t t = 0; t < log_probs.rows; ++t) {
        double sum = 0.0;
        for (std::int64_t j = 0; j < k; ++j) sum += std::exp(log_probs(t, j));
        require(std::abs(sum - 1.0) <= 1e-6, "log-prob row is not normalized");
        require(targets[static_cast<std::size_t>(t)] < static_cast<std::uint32_t>(k),
                "target index out of range");
    }
    double loss = 0.0;
    std::int64_t masked = 0;
    for (std::int64_t t = 0; t < log_probs.rows; ++t) {
        if (!plan.flags[static_cast<std::size_t>(t)]) continue;
        loss -= log_probs(t, static_cast<std::int64_t>(targets[static_cast<std::size_t>(t)]));
        ++masked;
    }
    if (reduction == MlmReduction::MeanMasked && masked > 0)
        loss /= static_cast<double>(masked);
    return loss;
}

static const char kMagic[4] = {'D', 'T', 'R', 'Q'};

void write_quantizer(const std::string &path, const RandomQuantizer &rq) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    io::write_magic(out, kMagic);
    io::write_version(out);
    io::write_pod<std::uint64_t>(out, rq.seed);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rq.projection.rows));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rq.projection.cols));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(rq.codebook.rows));
    if (!out) throw DataError("write failed: " + path);
}

RandomQuantizer read_quantizer(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    io::expect_magic(in, kMagic, "DTRQ");
    io::expect_version(in, "DTRQ");
    auto seed = io::read_pod<std::uint64_t>(in, "seed");
    auto d_in = io::read_pod<std::uint32_t>(in, "d_in");
    auto d_proj = io::read_pod<std::uint32_t>(in, "d_proj");
    auto k_rq = io::read_pod<std::uint32_t>(in, "K_rq");
    if (d_in == 0 || d_proj == 0 || k_rq < 2) throw FormatError("DTRQ: invalid dimensions");
    return init_random_quantizer(seed, d_in, d_proj, k_rq);
}

}  // namespace duotok::bestrq

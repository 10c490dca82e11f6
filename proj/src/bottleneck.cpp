#include "duotok/bottleneck.hpp"

#include <cmath>

#include "duotok/rng.hpp"

namespace duotok::bottleneck {

void validate(const ReplacementConfig &cfg) {
    require(cfg.p >= 0.0 && cfg.p <= 1.0, "replacement probability must be in [0, 1]");
    require(cfg.sigma >= 0.0, "sigma must be nonnegative");
}

ReplacementResult gaussian_replace(const FeatureSequence &h, const ReplacementConfig &cfg, Mode mode) {
    validate(cfg);
    ReplacementResult res;
    res.features = h;
    res.replaced.assign(static_cast<std::size_t>(h.frames()), false);
    if (mode == Mode::Evaluation || cfg.p == 0.0) return res;

    std::int64_t d = h.dim();
    for (std::int64_t t = 0; t < h.frames(); ++t) {
        rng::SplitMix64 g = rng::keyed_stream(cfg.seed, static_cast<std::uint64_t>(t));
        if (rng::uniform01(g) >= cfg.p) continue;
        res.replaced[static_cast<std::size_t>(t)] = true;
        double *row = res.features.values.row(t);
        for (std::int64_t j = 0; j < d; ++j) row[j] = cfg.sigma * rng::gaussian(g);
    }
    return res;
}

double replacement_fraction(const std::vector<bool> &mask) {
    require(!mask.empty(), "empty mask");
    std::int64_t n = 0;
    for (bool b : mask) n += b ? 1 : 0;
    return static_cast<double>(n) / static_cast<double>(mask.size());
}

ToyEncoder make_toy_encoder(std::uint64_t seed, std::int64_t d_in, std::int64_t d) {
    require(d_in > 0 && d > 0, "dimensions must be positive");
    ToyEncoder enc;
    enc.seed = seed;
    enc.weight = Matrix(d_in, d);
    enc.bias.assign(static_cast<std::size_t>(d), 0.0);
    rng::SplitMix64 g(seed);
    // Scaled so outputs stay O(1) for O(1) inputs.
    double scale = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (double &v : enc.weight.data) v = scale * rng::gaussian(g);
    for (double &v : enc.bias) v = 0.1 * rng::gaussian(g);
    return enc;
}

FeatureSequence toy_encode(const Matrix &input, double frame_rate, const ToyEncoder &enc) {
    require(input.cols == enc.weight.rows, "input column count must equal encoder d_in");
    std::int64_t d = enc.weight.cols;
    FeatureSequence out;
    out.frame_rate = frame_rate;
    out.values = Matrix(input.rows, d);
#pragma omp parallel for schedule(static)
    for (std::int64_t t = 0; t < input.rows; ++t) {
        const double *in_row = input.row(t);
        double *out_row = out.values.row(t);
        for (std::int64_t j = 0; j < d; ++j) {
            double acc = enc.bias[static_cast<std::size_t>(j)];
            for (std::int64_t i = 0; i < input.cols; ++i) acc += in_row[i] * enc.weight(i, j);
            out_row[j] = acc;
        }
    }
    return out;
}

}  // namespace duotok::bottleneck

#pragma once

#include <cstdint>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/features.hpp"

namespace duotok::bottleneck {

// Gaussian replacement at the pre-quantization layer: each frame is replaced
// wholesale by N(0, sigma^2 I) noise with probability p. No loss term is
// attached to this; it is purely an input-side regularizer.
struct ReplacementConfig {
    double p = 0.2;
    double sigma = 1.0;
    std::uint64_t seed = 0;
};

void validate(const ReplacementConfig &cfg);

enum class Mode {
    Training,    // noise active
    Evaluation,  // pass-through, mask all false
};

struct ReplacementResult {
    FeatureSequence features;
    std::vector<bool> replaced;  // per frame
};

// Frames with mask false are bit-identical to the input. Draws are keyed by
// (seed, frame index), so a frame's noise does not depend on sequence length.
ReplacementResult gaussian_replace(const FeatureSequence &h, const ReplacementConfig &cfg,
                                   Mode mode = Mode::Training);

double replacement_fraction(const std::vector<bool> &mask);

// Deterministic affine stand-in for the frozen encoder.
struct ToyEncoder {
    Matrix weight;  // d_in x d
    std::vector<double> bias;
    std::uint64_t seed = 0;
};

ToyEncoder make_toy_encoder(std::uint64_t seed, std::int64_t d_in, std::int64_t d);

FeatureSequence toy_encode(const Matrix &input, double frame_rate, const ToyEncoder &enc);

}  // namespace duotok::bottleneck

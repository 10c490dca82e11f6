#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/features.hpp"

namespace duotok::bestrq {

// Frozen random-projection quantizer. Both matrices are fully determined by
// (seed, d_in, d_proj, K_rq); persistence stores only those four values.
struct RandomQuantizer {
    Matrix projection;  // d_in x d_proj
    Matrix codebook;    // K_rq x d_proj, rows unit-L2
    std::uint64_t seed = 0;
};

RandomQuantizer init_random_quantizer(std::uint64_t seed, std::int64_t d_in,
                                      std::int64_t d_proj, std::int64_t k_rq);

// Projects each frame, L2-normalizes it, and assigns the nearest codebook row
// by Euclidean distance, ties to the lowest index. A zero-norm projection is
// left unnormalized and matched as-is.
std::vector<std::uint32_t> assign_targets(const FeatureSequence &features, const RandomQuantizer &rq);
std::vector<std::uint32_t> assign_targets_serial(const FeatureSequence &features, const RandomQuantizer &rq);

// Time-masking plan: flags built from unions of contiguous spans.
struct MaskPlan {
    std::vector<bool> flags;
    std::int64_t span_len = 0;
    double target_ratio = 0.0;

    std::int64_t masked_count() const {
        std::int64_t n = 0;
        for (bool f : flags) n += f ? 1 : 0;
        return n;
    }
};

// Draws span starts (without replacement) until at least round(ratio*U)
// frames are covered, so the masked fraction lands within span_len/U of the
// target. Deterministic in the seed.
MaskPlan sample_mask(std::int64_t frames, double ratio, std::int64_t span_len, std::uint64_t seed);

// Stage-1 masking defaults.
inline constexpr double kDefaultMaskRatio = 0.4;
inline constexpr std::int64_t kDefaultMaskSpan = 4;
inline constexpr std::int64_t kDefaultProjDim = 16;
inline constexpr std::int64_t kDefaultRqCodebook = 8192;

enum class MlmReduction {
    Sum,         // plain sum over masked frames
    MeanMasked,  // sum divided by the number of masked frames
};

// Masked-frame cross-entropy: -sum_{t in mask} log_probs[t][target_t].
// Rows must be normalized log-probabilities (sum of exp within 1e-6 of 1).
double mlm_loss(const Matrix &log_probs, const std::vector<std::uint32_t> &targets,
                const MaskPlan &plan, MlmReduction reduction = MlmReduction::Sum);

// DTRQ container: magic "DTRQ", version u16, seed u64, d_in u32, d_proj u32,
// K_rq u32. Matrices are regenerated deterministically on load.
void write_quantizer(const std::string &path, const RandomQuantizer &rq);
RandomQuantizer read_quantizer(const std::string &path);

}  // namespace duotok::bestrq

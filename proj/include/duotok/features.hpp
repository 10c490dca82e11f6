#pragma once

#include <string>

#include "duotok/core.hpp"

namespace duotok {

// Time-major feature matrix (one row per frame) with frame-rate metadata.
// This is the interchange type between the front end, the bottleneck, the
// BEST-RQ target generator, and the quantizer.
struct FeatureSequence {
    Matrix values;            // U x d
    double frame_rate = 0.0;  // Hz

    std::int64_t frames() const { return values.rows; }
    std::int64_t dim() const { return values.cols; }
};

void validate(const FeatureSequence &fs);

// DTFT container: magic "DTFT", version u16, U u32, dim u32, frame_rate f32,
// then row-major little-endian f32 values. Storage is f32; in-memory values
// are widened to double on load.
void write_features(const std::string &path, const FeatureSequence &fs);
FeatureSequence read_features(const std::string &path);

}  // namespace duotok

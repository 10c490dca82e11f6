#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "duotok/core.hpp"

namespace duotok::tokens {

using duotok::Route;

// One track's token stream plus its vocabulary metadata.
struct TrackTokens {
    Route route = Route::Vocal;
    std::uint32_t vocab_size = 0;   // K
    double rate = 0.0;              // tokens per second
    std::vector<std::uint32_t> indices;
};

void validate(const TrackTokens &t);

// Synchronized vocal and accompaniment streams.
struct DualTrackSequence {
    TrackTokens vocal;
    TrackTokens accomp;

    std::int64_t length() const { return static_cast<std::int64_t>(vocal.indices.size()); }
    const TrackTokens &track(Route r) const { return r == Route::Vocal ? vocal : accomp; }
};

// Pairs two streams after checking lengths, rates, and routes.
DualTrackSequence align(TrackTokens vocal, TrackTokens accomp);

// Per-codebook vocabulary sizes. The per-head size is what PPL@1024
// normalizes by when heads are evaluated in parallel.
struct VocabSpec {
    std::vector<std::int64_t> sizes;

    // all heads must share one size for the per-head convention to apply
    std::int64_t per_head() const;
};

void validate(const VocabSpec &spec);

// rate * sum_i log2(K_i) / 1000, i.e. each codebook emits `rate` tokens/s.
double bitrate_kbps(double rate, const std::vector<std::int64_t> &codebook_sizes);
double bitrate_kbps(double rate, const VocabSpec &spec);

// DTOK container: magic "DTOK", version u16, track count u8, then per track:
// route u8, K u32, rate f32, length u64, indices u32 little-endian.
std::vector<std::uint8_t> serialize(const std::vector<TrackTokens> &tracks);
std::vector<TrackTokens> deserialize(const std::vector<std::uint8_t> &bytes);

std::vector<std::uint8_t> serialize(const DualTrackSequence &seq);
DualTrackSequence deserialize_dual(const std::vector<std::uint8_t> &bytes);

void write_tokens(const std::string &path, const std::vector<TrackTokens> &tracks);
std::vector<TrackTokens> read_tokens(const std::string &path);

// CSV export with columns frame,vocal_idx,accomp_idx.
void write_csv(const std::string &path, const DualTrackSequence &seq);

}  // namespace duotok::tokens

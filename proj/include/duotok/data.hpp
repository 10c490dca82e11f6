#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/dsp.hpp"

namespace duotok::data {

// One lyric phrase with absolute timestamps.
struct LyricSpan {
    double start = 0.0;  // seconds
    double end = 0.0;
    std::string text;
};

// A 5-30 s training clip containing only whole lyric spans.
struct ClipSpec {
    double start = 0.0;
    double end = 0.0;
    std::vector<std::size_t> span_indices;

    double length() const { return end - start; }
};

inline constexpr double kMinClipSeconds = 5.0;
inline constexpr double kMaxClipSeconds = 30.0;

struct SegmentationResult {
    std::vector<ClipSpec> clips;
    std::vector<std::size_t> skipped;  // span indices that fit no clip
};

// Greedy left-to-right packing: extend the current clip with the next span
// while the total stays within 30 s, emit otherwise. Clips shorter than 5 s
// are padded into non-lyric audio (end first, then start, bounded by the
// neighbouring spans and the track edges); if that cannot reach 5 s the
// spans are skipped and reported.
SegmentationResult segment_by_lyrics(const std::vector<LyricSpan> &spans, double track_len);

// Lyric span file: one span per line, "start_sec<TAB>end_sec<TAB>text".
std::vector<LyricSpan> read_lyric_spans(const std::string &path);

enum class SampleType : std::uint8_t {
    FullMix = 0,
    LyricVocal = 1,
    LyricAccomp = 2,
    InstrOnly = 3,
};

inline constexpr std::array<SampleType, 4> kAllSampleTypes = {
    SampleType::FullMix, SampleType::LyricVocal, SampleType::LyricAccomp, SampleType::InstrOnly};

const char *sample_type_name(SampleType t);

// Sampling weights per sample type; only ratios matter.
struct MixRatios {
    std::array<double, 4> weights{};

    double weight(SampleType t) const { return weights[static_cast<std::size_t>(t)]; }

    // full : vocal : accomp : instr = 4 : 1 : 1 : 1
    static MixRatios stage2_default() { return {{4.0, 1.0, 1.0, 1.0}}; }
    // vocal : accomp : instr = 5 : 4 : 1, full mix dropped
    static MixRatios stage3_default() { return {{0.0, 5.0, 4.0, 1.0}}; }
};

// i.i.d. categorical draws proportional to the weights; deterministic in the
// seed.
std::vector<SampleType> ratio_sampler(const MixRatios &ratios, std::uint64_t seed, std::int64_t n);

// PCM16 little-endian WAV. Stereo is downmixed by averaging; compressed or
// non-16-bit encodings are rejected. Samples are normalized by 1/32768.
dsp::Waveform load_wav(const std::string &path);
void save_wav(const std::string &path, const dsp::Waveform &w);

}  // namespace duotok::data

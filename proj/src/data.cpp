#include "duotok/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "duotok/io.hpp"
#include "duotok/rng.hpp"

namespace duotok::data {

SegmentationResult segment_by_lyrics(const std::vector<LyricSpan> &spans, double track_len) {
    for (std::size_t i = 0; i < spans.size(); ++i) {
        require(spans[i].start >= 0.0 && spans[i].start < spans[i].end, "span must have start < end");
        if (i > 0)
            require(spans[i].start >= spans[i - 1].end, "spans must be sorted and non-overlapping");
    }
    if (!spans.empty())
        require(track_len >= spans.back().end, "track shorter than last span");

    SegmentationResult res;
    std::size_t i = 0;
    while (i < spans.size()) {
        // A span that alone exceeds the clip cap can never be emitted whole.
        if (spans[i].end - spans[i].start > kMaxClipSeconds) {
            res.skipped.push_back(i);
            ++i;
            continue;
        }
        ClipSpec clip;
        clip.start = spans[i].start;
        clip.span_indices.push_back(i);
        std::size_t j = i;
        while (j + 1 < spans.size() &&
               spans[j + 1].end - spans[j + 1].start <= kMaxClipSeconds &&
               spans[j + 1].end - clip.start <= kMaxClipSeconds) {
            ++j;
            clip.span_indices.push_back(j);
        }
        clip.end = spans[j].end;

        if (clip.length() < kMinClipSeconds) {
            // Pad into non-lyric audio: end first, then start, staying clear
            // of the neighbouring spans so no boundary cuts one.
            double end_limit = (j + 1 < spans.size()) ? spans[j + 1].start : track_len;
            double start_limit = (i > 0) ? spans[i - 1].end : 0.0;
            double deficit = kMinClipSeconds - clip.length();
            double grow_end = std::min(deficit, end_limit - clip.end);
            clip.end += grow_end;
            deficit -= grow_end;
            if (deficit > 0.0) {
                double grow_start = std::min(deficit, clip.start - start_limit);
                clip.start -= grow_start;
                deficit -= grow_start;
            }
            if (deficit > 0.0) {
                for (std::size_t s : clip.span_indices) res.skipped.push_back(s);
                i = j + 1;
                continue;
            }
        }
        res.clips.push_back(std::move(clip));
        i = j + 1;
    }
    return res;
}

std::vector<LyricSpan> read_lyric_spans(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<LyricSpan> spans;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t tab1 = line.find('\t');
        std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
            throw DataError("lyric file " + path + ": line " + std::to_string(line_no) +
                            " is not start<TAB>end<TAB>text");
        LyricSpan span;
        try {
            span.start = std::stod(line.substr(0, tab1));
            span.end = std::stod(line.substr(tab1 + 1, tab2 - tab1 - 1));
        } catch (const std::exception &) {
            throw DataError("lyric file " + path + ": bad timestamp on line " + std::to_string(line_no));
        }
        span.text = line.substr(tab2 + 1);
        spans.push_back(std::move(span));
    }
    return spans;
}

const char *sample_type_name(SampleType t) {
    switch (t) {
        case SampleType::FullMix: return "full";
        case SampleType::LyricVocal: return "vocal";
        case SampleType::LyricAccomp: return "accomp";
        case SampleType::InstrOnly: return "instr";
    }
    return "?";
}

std::vector<SampleType> ratio_sampler(const MixRatios &ratios, std::uint64_t seed, std::int64_t n) {
    require(n >= 1, "need at least one draw");
    double total = 0.0;
    for (double w : ratios.weights) {
        require(std::isfinite(w) && w >= 0.0, "weights must be finite and nonnegative");
        total += w;
    }
    require(total > 0.0, "at least one weight must be positive");

    std::array<double, 4> cumulative{};
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        acc += ratios.weights[i] / total;
        cumulative[i] = acc;
    }
    cumulative[3] = 1.0;  // guard against rounding

    rng::SplitMix64 g(seed);
    std::vector<SampleType> out;
    out.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        double u = rng::uniform01(g);
        std::size_t idx = 0;
        while (u >= cumulative[idx]) ++idx;
        out.push_back(kAllSampleTypes[idx]);
    }
    return out;
}

namespace {

struct RiffChunk {
    char id[4];
    std::uint32_t size;
};

RiffChunk read_chunk_header(std::istream &in) {
    RiffChunk ch{};
    in.read(ch.id, 4);
    if (!in) throw FormatError("WAV: truncated chunk header");
    ch.size = io::read_pod<std::uint32_t>(in, "chunk size");
    return ch;
}

}  // namespace

dsp::Waveform load_wav(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);

    char riff[4];
    in.read(riff, 4);
    if (!in || std::memcmp(riff, "RIFF", 4) != 0) throw FormatError("WAV: missing RIFF header");
    io::read_pod<std::uint32_t>(in, "RIFF size");
    char wave[4];
    in.read(wave, 4);
    if (!in || std::memcmp(wave, "WAVE", 4) != 0) throw FormatError("WAV: not a WAVE file");

    std::uint16_t channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    bool have_fmt = false;
    std::vector<std::int16_t> pcm;

    while (in.peek() != EOF) {
        RiffChunk ch = read_chunk_header(in);
        if (std::memcmp(ch.id, "fmt ", 4) == 0) {
            auto format = io::read_pod<std::uint16_t>(in, "audio format");
            channels = io::read_pod<std::uint16_t>(in, "channels");
            sample_rate = io::read_pod<std::uint32_t>(in, "sample rate");
            io::read_pod<std::uint32_t>(in, "byte rate");
            io::read_pod<std::uint16_t>(in, "block align");
            bits = io::read_pod<std::uint16_t>(in, "bits per sample");
            if (format != 1) throw FormatError("WAV: compressed encodings are not supported");
            if (bits != 16) throw FormatError("WAV: only 16-bit PCM is supported");
            if (channels < 1 || channels > 2) throw FormatError("WAV: only mono or stereo supported");
            if (ch.size > 16) in.seekg(ch.size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(ch.id, "data", 4) == 0) {
            if (!have_fmt) throw FormatError("WAV: data chunk before fmt chunk");
            std::size_t count = ch.size / 2;
            pcm.resize(count);
            in.read(reinterpret_cast<char *>(pcm.data()), static_cast<std::streamsize>(count * 2));
            if (!in) throw FormatError("WAV: truncated data chunk");
            break;
        } else {
            in.seekg(ch.size + (ch.size & 1), std::ios::cur);
            if (!in) throw FormatError("WAV: truncated chunk");
        }
    }
    if (!have_fmt || pcm.empty()) throw FormatError("WAV: missing fmt or data chunk");

    dsp::Waveform w;
    w.sample_rate = static_cast<double>(sample_rate);
    if (channels == 1) {
        w.samples.resize(pcm.size());
        for (std::size_t i = 0; i < pcm.size(); ++i)
            w.samples[i] = static_cast<double>(pcm[i]) / 32768.0;
    } else {
        std::size_t frames = pcm.size() / 2;
        w.samples.resize(frames);
        for (std::size_t i = 0; i < frames; ++i) {
            double l = static_cast<double>(pcm[2 * i]);
            double r = static_cast<double>(pcm[2 * i + 1]);
            w.samples[i] = 0.5 * (l + r) / 32768.0;
        }
    }
    return w;
}

void save_wav(const std::string &path, const dsp::Waveform &w) {
    dsp::validate(w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);

    std::uint32_t data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
    out.write("RIFF", 4);
    io::write_pod<std::uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    io::write_pod<std::uint32_t>(out, 16);
    io::write_pod<std::uint16_t>(out, 1);  // PCM
    io::write_pod<std::uint16_t>(out, 1);  // mono
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
    io::write_pod<std::uint16_t>(out, 2);
    io::write_pod<std::uint16_t>(out, 16);
    out.write("data", 4);
    io::write_pod<std::uint32_t>(out, data_bytes);
    for (double s : w.samples) {
        double scaled = std::round(s * 32768.0);
        scaled = std::clamp(scaled, -32768.0, 32767.0);
        io::write_pod<std::int16_t>(out, static_cast<std::int16_t>(scaled));
    }
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace duotok::data

#include "duotok/tokens.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "duotok/io.hpp"

namespace duotok::tokens {

void validate(const TrackTokens &t) {
    require(t.vocab_size >= 2, "vocabulary size must be at least 2");
    require(t.rate > 0.0, "token rate must be positive");
    for (std::uint32_t idx : t.indices)
        require(idx < t.vocab_size, "token index out of range");
}

DualTrackSequence align(TrackTokens vocal, TrackTokens accomp) {
    validate(vocal);
    validate(accomp);
    require(vocal.route == Route::Vocal, "first track must carry the vocal route");
    require(accomp.route == Route::Accompaniment, "second track must carry the accompaniment route");
    if (vocal.indices.size() != accomp.indices.size())
        throw DataError("align: length mismatch, vocal has " + std::to_string(vocal.indices.size()) +
                        " tokens but accompaniment has " + std::to_string(accomp.indices.size()));
    if (vocal.rate != accomp.rate)
        throw DataError("align: rate mismatch, vocal at " + std::to_string(vocal.rate) +
                        " Hz but accompaniment at " + std::to_string(accomp.rate) + " Hz");
    return {std::move(vocal), std::move(accomp)};
}

void validate(const VocabSpec &spec) {
    require(!spec.sizes.empty(), "need at least one codebook");
    for (std::int64_t k : spec.sizes) require(k >= 2, "codebook sizes must be at least 2");
}

std::int64_t VocabSpec::per_head() const {
    validate(*this);
    for (std::int64_t k : sizes)
        require(k == sizes.front(), "per-head vocabulary needs equal codebook sizes");
    return sizes.front();
}

double bitrate_kbps(double rate, const std::vector<std::int64_t> &codebook_sizes) {
    require(rate > 0.0, "rate must be positive");
    require(!codebook_sizes.empty(), "need at least one codebook");
    double bits_per_step = 0.0;
    for (std::int64_t k : codebook_sizes) {
        require(k >= 2, "codebook sizes must be at least 2");
        bits_per_step += std::log2(static_cast<double>(k));
    }
    return rate * bits_per_step / 1000.0;
}

double bitrate_kbps(double rate, const VocabSpec &spec) {
    validate(spec);
    return bitrate_kbps(rate, spec.sizes);
}

namespace {

static const char kMagic[4] = {'D', 'T', 'O', 'K'};

struct ByteReader {
    const std::vector<std::uint8_t> &bytes;
    std::size_t pos = 0;

    template <typename T>
    T read(const char *what) {
        if (pos + sizeof(T) > bytes.size())
            throw FormatError(std::string("truncated DTOK payload while reading ") + what);
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
};

template <typename T>
void append(std::vector<std::uint8_t> &out, T v) {
    const auto *p = reinterpret_cast<const std::uint8_t *>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

}  // namespace

std::vector<std::uint8_t> serialize(const std::vector<TrackTokens> &tracks) {
    require(!tracks.empty() && tracks.size() <= 255, "track count must be in 1..255");
    for (const TrackTokens &t : tracks) validate(t);

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    append<std::uint16_t>(out, io::kFormatVersion);
    append<std::uint8_t>(out, static_cast<std::uint8_t>(tracks.size()));
    for (const TrackTokens &t : tracks) {
        append<std::uint8_t>(out, static_cast<std::uint8_t>(t.route));
        append<std::uint32_t>(out, t.vocab_size);
        append<float>(out, static_cast<float>(t.rate));
        append<std::uint64_t>(out, static_cast<std::uint64_t>(t.indices.size()));
        for (std::uint32_t idx : t.indices) append<std::uint32_t>(out, idx);
    }
    return out;
}

std::vector<TrackTokens> deserialize(const std::vector<std::uint8_t> &bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("bad magic: not a DTOK payload");
    ByteReader r{bytes, 4};
    auto version = r.read<std::uint16_t>("version");
    if (version != io::kFormatVersion)
        throw FormatError("unsupported DTOK version " + std::to_string(version));
    auto count = r.read<std::uint8_t>("track count");
    if (count == 0) throw FormatError("DTOK: zero tracks");

    std::vector<TrackTokens> tracks;
    for (std::uint8_t i = 0; i < count; ++i) {
        TrackTokens t;
        auto route = r.read<std::uint8_t>("route");
        if (route > 1) throw FormatError("DTOK: invalid route byte");
        t.route = static_cast<Route>(route);
        t.vocab_size = r.read<std::uint32_t>("vocab size");
        if (t.vocab_size < 2) throw FormatError("DTOK: vocabulary size below 2");
        t.rate = r.read<float>("rate");
        if (!(t.rate > 0.0)) throw FormatError("DTOK: non-positive rate");
        auto len = r.read<std::uint64_t>("length");
        t.indices.reserve(len);
        for (std::uint64_t j = 0; j < len; ++j) {
            auto idx = r.read<std::uint32_t>("token index");
            if (idx >= t.vocab_size) throw FormatError("DTOK: token index exceeds vocabulary");
            t.indices.push_back(idx);
        }
        tracks.push_back(std::move(t));
    }
    if (r.pos != bytes.size()) throw FormatError("DTOK: trailing bytes after payload");
    return tracks;
}

std::vector<std::uint8_t> serialize(const DualTrackSequence &seq) {
    return serialize(std::vector<TrackTokens>{seq.vocal, seq.accomp});
}

DualTrackSequence deserialize_dual(const std::vector<std::uint8_t> &bytes) {
    std::vector<TrackTokens> tracks = deserialize(bytes);
    if (tracks.size() != 2) throw FormatError("DTOK: expected exactly two tracks");
    if (tracks[0].route == Route::Accompaniment) std::swap(tracks[0], tracks[1]);
    return align(std::move(tracks[0]), std::move(tracks[1]));
}

void write_tokens(const std::string &path, const std::vector<TrackTokens> &tracks) {
    std::vector<std::uint8_t> bytes = serialize(tracks);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path);
}

std::vector<TrackTokens> read_tokens(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

void write_csv(const std::string &path, const DualTrackSequence &seq) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "frame,vocal_idx,accomp_idx\n";
    for (std::int64_t t = 0; t < seq.length(); ++t)
        out << t << ',' << seq.vocal.indices[static_cast<std::size_t>(t)] << ','
            << seq.accomp.indices[static_cast<std::size_t>(t)] << '\n';
    if (!out) throw DataError("write failed: " + path);
}

}  // namespace duotok::tokens

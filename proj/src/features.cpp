#include "duotok/features.hpp"

#include <fstream>

#include "duotok/io.hpp"

namespace duotok {

static const char kMagic[4] = {'D', 'T', 'F', 'T'};

void validate(const FeatureSequence &fs) {
    require(fs.values.cols > 0, "feature dimension must be positive");
    require(fs.frame_rate > 0.0, "frame rate must be positive");
    require(all_finite(fs.values), "feature values must be finite");
}

void write_features(const std::string &path, const FeatureSequence &fs) {
    validate(fs);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    io::write_magic(out, kMagic);
    io::write_version(out);
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(fs.values.rows));
    io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(fs.values.cols));
    io::write_pod<float>(out, static_cast<float>(fs.frame_rate));
    for (double v : fs.values.data) io::write_pod<float>(out, static_cast<float>(v));
    if (!out) throw DataError("write failed: " + path);
}

FeatureSequence read_features(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    io::expect_magic(in, kMagic, "DTFT");
    io::expect_version(in, "DTFT");
    auto u = io::read_pod<std::uint32_t>(in, "frame count");
    auto d = io::read_pod<std::uint32_t>(in, "feature dim");
    auto rate = io::read_pod<float>(in, "frame rate");
    if (d == 0) throw FormatError("DTFT: zero feature dimension");
    if (!(rate > 0.0f)) throw FormatError("DTFT: non-positive frame rate");
    FeatureSequence fs;
    fs.frame_rate = rate;
    fs.values = Matrix(u, d);
    for (double &v : fs.values.data) {
        float f = io::read_pod<float>(in, "feature value");
        if (!std::isfinite(f)) throw FormatError("DTFT: non-finite feature value");
        v = f;
    }
    return fs;
}

}  // namespace duotok

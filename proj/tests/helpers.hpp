#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "duotok/core.hpp"
#include "duotok/features.hpp"
#include "duotok/rng.hpp"

namespace testutil {

using duotok::Matrix;

inline Matrix random_matrix(std::uint64_t seed, std::int64_t rows, std::int64_t cols,
                            double scale = 1.0) {
    Matrix m(rows, cols);
    duotok::rng::SplitMix64 g(seed);
    for (double &v : m.data) v = scale * duotok::rng::gaussian(g);
    return m;
}

inline duotok::FeatureSequence random_features(std::uint64_t seed, std::int64_t frames,
                                               std::int64_t dim, double rate = 100.0) {
    duotok::FeatureSequence fs;
    fs.frame_rate = rate;
    fs.values = random_matrix(seed, frames, dim);
    return fs;
}

// Independent nearest-row scan used as the oracle against the library
// kernels: plain loops, literal squared distances, lowest-index ties.
inline std::vector<std::uint32_t> nn_oracle(const Matrix &points, const Matrix &rows) {
    std::vector<std::uint32_t> out(static_cast<std::size_t>(points.rows));
    for (std::int64_t t = 0; t < points.rows; ++t) {
        std::int64_t best = -1;
        double best_dist = 0.0;
        for (std::int64_t k = 0; k < rows.rows; ++k) {
            double dist = 0.0;
            for (std::int64_t j = 0; j < points.cols; ++j) {
                double diff = points(t, j) - rows(k, j);
                dist += diff * diff;
            }
            if (best < 0 || dist < best_dist) {
                best = k;
                best_dist = dist;
            }
        }
        out[static_cast<std::size_t>(t)] = static_cast<std::uint32_t>(best);
    }
    return out;
}

// Scratch directory for file-format tests, cleaned up on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string &tag) {
        path = std::filesystem::temp_directory_path() /
               ("duotok_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string &name) const { return (path / name).string(); }
};

}  // namespace testutil

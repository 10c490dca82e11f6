#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace duotok {

// Raised for malformed run configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string &msg) : std::runtime_error(msg) {}
};

// Raised for bad input data: unreadable files, shape mismatches between
// artifacts, unnormalized predictor output (CLI exit code 3).
struct DataError : std::runtime_error {
    explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

// Raised for corrupt binary containers: bad magic, truncation, out-of-range
// payload values.
struct FormatError : DataError {
    explicit FormatError(const std::string &msg) : DataError(msg) {}
};

inline void require(bool cond, const std::string &msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Track routing: every quantization call, token stream, and codebook carries
// exactly one of these.
enum class Route : std::uint8_t {
    Vocal = 0,
    Accompaniment = 1,
};

inline const char *route_name(Route r) {
    return r == Route::Vocal ? "vocal" : "accomp";
}

inline Route route_from_name(const std::string &name) {
    if (name == "vocal") return Route::Vocal;
    if (name == "accomp" || name == "accompaniment") return Route::Accompaniment;
    throw DataError("unknown route name: " + name);
}

// Dense row-major matrix of doubles. All numeric kernels in this library
// operate on this type; shapes are validated at the call boundary.
struct Matrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::int64_t r, std::int64_t c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r * c), fill) {}

    double &operator()(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
    double operator()(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }

    double *row(std::int64_t r) { return data.data() + r * cols; }
    const double *row(std::int64_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix &o) const { return rows == o.rows && cols == o.cols; }

    static Matrix identity(std::int64_t n) {
        Matrix m(n, n);
        for (std::int64_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

// Complex counterpart, used for spectrograms and separation masks.
struct CMatrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<std::complex<double>> values;

    CMatrix() = default;
    CMatrix(std::int64_t r, std::int64_t c)
        : rows(r), cols(c), values(static_cast<std::size_t>(r * c)) {}

    std::complex<double> &operator()(std::int64_t r, std::int64_t c) {
        return values[static_cast<std::size_t>(r * cols + c)];
    }
    const std::complex<double> &operator()(std::int64_t r, std::int64_t c) const {
        return values[static_cast<std::size_t>(r * cols + c)];
    }

    bool same_shape(const CMatrix &o) const { return rows == o.rows && cols == o.cols; }
};

inline bool all_finite(const Matrix &m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace duotok

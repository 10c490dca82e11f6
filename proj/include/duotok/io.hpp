#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "duotok/core.hpp"

// Little-endian binary primitives shared by the DTFT / DTRQ / DTCB / DTOK /
// DTLP container formats. Reads throw FormatError on truncation.

static_assert(std::endian::native == std::endian::little,
              "container formats are little-endian; big-endian hosts are not supported");

namespace duotok::io {

template <typename T>
void write_pod(std::ostream &out, T v) {
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream &in, const char *what) {
    T v{};
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!in) throw FormatError(std::string("truncated file while reading ") + what);
    return v;
}

void write_magic(std::ostream &out, const char magic[4]);
void expect_magic(std::istream &in, const char magic[4], const char *format_name);

// All formats share a single version word for now.
inline constexpr std::uint16_t kFormatVersion = 1;

void write_version(std::ostream &out);
void expect_version(std::istream &in, const char *format_name);

}  // namespace duotok::io

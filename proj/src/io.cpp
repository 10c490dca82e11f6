#include "duotok/io.hpp"

#include <cstring>

namespace duotok::io {

void write_magic(std::ostream &out, const char magic[4]) {
    out.write(magic, 4);
}

void expect_magic(std::istream &in, const char magic[4], const char *format_name) {
    char got[4] = {0, 0, 0, 0};
    in.read(got, 4);
    if (!in || std::memcmp(got, magic, 4) != 0)
        throw FormatError(std::string("bad magic: not a ") + format_name + " file");
}

void write_version(std::ostream &out) {
    write_pod<std::uint16_t>(out, kFormatVersion);
}

void expect_version(std::istream &in, const char *format_name) {
    auto v = read_pod<std::uint16_t>(in, "version");
    if (v != kFormatVersion)
        throw FormatError(std::string("unsupported ") + format_name + " version " + std::to_string(v));
}

}  // namespace duotok::io

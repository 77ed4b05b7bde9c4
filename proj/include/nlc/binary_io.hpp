#pragma once

#include "nlc/types.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string_view>

// Little-endian primitives shared by the CEQW1 and CEQM1 file formats.
namespace nlc::binio {

template <typename U>
inline void put_le(std::ostream& os, U v)
{
    std::array<char, sizeof(U)> b{};
    for (std::size_t i = 0; i < sizeof(U); ++i)
        b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b.data(), b.size());
}

template <typename U>
inline U get_le(std::istream& is, const char* what)
{
    std::array<unsigned char, sizeof(U)> b{};
    is.read(reinterpret_cast<char*>(b.data()), b.size());
    if (is.gcount() != static_cast<std::streamsize>(b.size()))
        throw Error("parse error", std::string("truncated file while reading ") + what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
}

inline void put_f64(std::ostream& os, double v) { put_le(os, std::bit_cast<std::uint64_t>(v)); }

inline double get_f64(std::istream& is, const char* what)
{
    return std::bit_cast<double>(get_le<std::uint64_t>(is, what));
}

inline void put_magic(std::ostream& os, std::string_view magic)
{
    os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& is, std::string_view magic)
{
    std::array<char, 16> b{};
    is.read(b.data(), static_cast<std::streamsize>(magic.size()));
    if (is.gcount() != static_cast<std::streamsize>(magic.size()) ||
        std::string_view(b.data(), magic.size()) != magic)
        throw Error("parse error", "bad magic, expected " + std::string(magic));
}

inline void expect_eof(std::istream& is)
{
    if (is.peek() != std::char_traits<char>::eof())
        throw Error("parse error", "trailing bytes after payload");
}

} // namespace nlc::binio

#pragma once

// Little-endian primitives shared by the tensor and snapshot formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "mmorient/errors.hpp"

namespace mmorient::detail {

template <typename UInt>
void put_le(std::ostream& out, UInt value) {
    char bytes[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
    }
    out.write(bytes, sizeof(UInt));
}

inline void put_f64(std::ostream& out, double value) {
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(value));
}

/// Reads a little-endian unsigned integer; throws DataError naming `what` on EOF.
template <typename UInt>
UInt get_le(std::istream& in, const std::string& what) {
    unsigned char bytes[sizeof(UInt)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
        throw DataError(what + ": unexpected end of file");
    }
    UInt value = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
        value |= static_cast<UInt>(bytes[i]) << (8 * i);
    }
    return value;
}

inline double get_f64(std::istream& in, const std::string& what) {
    return std::bit_cast<double>(get_le<std::uint64_t>(in, what));
}

}  // namespace mmorient::detail

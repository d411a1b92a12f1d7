#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ura {

/// Bit vectors are plain byte-per-bit (values 0/1), MSB-first where an
/// integer interpretation applies.
using BitVec = std::vector<uint8_t>;

/// MSB-first radix-2 value of the bit vector.
inline uint64_t bits_to_value(const BitVec& v) {
    uint64_t x = 0;
    for (uint8_t b : v) x = (x << 1) | (b & 1u);
    return x;
}

/// Inverse of bits_to_value at fixed width.
inline BitVec value_to_bits(uint64_t x, int width) {
    BitVec v(static_cast<size_t>(width));
    for (int i = width - 1; i >= 0; --i) {
        v[static_cast<size_t>(i)] = static_cast<uint8_t>(x & 1u);
        x >>= 1;
    }
    return v;
}

inline std::string bits_to_string(const BitVec& v) {
    std::string s;
    s.reserve(v.size());
    for (uint8_t b : v) s.push_back(b ? '1' : '0');
    return s;
}

inline BitVec bits_xor(const BitVec& a, const BitVec& b) {
    BitVec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = (a[i] ^ b[i]) & 1u;
    return r;
}

inline BitVec subrange(const BitVec& v, size_t begin, size_t len) {
    return BitVec(v.begin() + static_cast<long>(begin), v.begin() + static_cast<long>(begin + len));
}

} // namespace ura

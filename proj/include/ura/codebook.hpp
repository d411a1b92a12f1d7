#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ura/bits.hpp"

namespace ura {

/// Common codeword matrix shared by every device: lp rows, 2^bp columns,
/// i.i.d. circularly symmetric Gaussian columns rescaled to ||a_i||^2 = lp.
struct Codebook {
    Eigen::MatrixXcd a;
    uint64_t seed = 0;
    int lp = 0;
    int bp = 0;

    int cols() const { return static_cast<int>(a.cols()); }
};

/// Deterministic in (seed, lp, bp). Throws SizeOverflow when the matrix
/// would exceed max_bytes.
Codebook build_codebook(uint64_t seed, int lp, int bp,
                        size_t max_bytes = size_t(1) << 31);

/// Index representation of the first bp bits: radix-2 value plus one,
/// MSB first, so i_k lies in [1, 2^bp].
uint32_t cs_encode(const BitVec& v_p);

/// Inverse of cs_encode at fixed width.
BitVec cs_decode_index(uint32_t i_k, int bp);

/// Binary dump/load so large codebooks are built once. Little-endian
/// doubles, interleaved re/im, after a small header.
void save_codebook(const Codebook& cb, const std::string& path);
Codebook load_codebook(const std::string& path);

} // namespace ura

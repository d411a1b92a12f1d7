#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ura/bits.hpp"
#include "ura/codebook.hpp"
#include "ura/config.hpp"
#include "ura/ldpc.hpp"

namespace ura {

/// Index-driven permutation of the data-phase channel uses. Deterministic
/// in (i_k, lc, global_seed): Fisher-Yates on a splitmix64 stream.
struct Interleaver {
    std::vector<int> perm; // output position j carries input position perm[j]
    uint32_t i_k = 0;

    template <typename Vec>
    Vec apply(const Vec& in) const {
        Vec out(in.size());
        for (size_t j = 0; j < perm.size(); ++j) out[j] = in[static_cast<size_t>(perm[j])];
        return out;
    }

    template <typename Vec>
    Vec invert(const Vec& in) const {
        Vec out(in.size());
        for (size_t j = 0; j < perm.size(); ++j) out[static_cast<size_t>(perm[j])] = in[j];
        return out;
    }

    /// Channel-use position of input slot p.
    int position_of(int p) const { return inv_[static_cast<size_t>(p)]; }

    std::vector<int> inv_; // input position -> output position
};

Interleaver build_interleaver(uint32_t i_k, int lc, uint64_t global_seed);

/// BPSK: bit 1 -> +1, bit 0 -> -1. QPSK: bit pairs map to
/// {(+-1 +-i)/sqrt(2)} with the first bit on the real axis.
std::vector<std::complex<double>> modulate(const BitVec& bits, Modulation mod);

/// One device's transmitted block: the codeword column followed by the
/// interleaved, zero-padded data symbols, everything scaled by sqrt(P).
struct Frame {
    Eigen::VectorXcd x;
    uint32_t i_k = 0;
};

Frame make_frame(const ValidatedConfig& cfg, const Codebook& cb, const LdpcCode& code,
                 const BitVec& v);

/// Symbols after modulate + zero-pad + interleave, unit amplitude (no
/// sqrt(P)); the reconstruction primitive shared by SIC and the framer.
Eigen::VectorXcd placed_symbols(const ValidatedConfig& cfg, const Interleaver& il,
                                const BitVec& codeword);

} // namespace ura

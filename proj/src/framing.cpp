#include "ura/framing.hpp"

#include <cmath>

#include "ura/errors.hpp"
#include "ura/rng.hpp"

namespace ura {

Interleaver build_interleaver(uint32_t i_k, int lc, uint64_t global_seed) {
    Interleaver il;
    il.i_k = i_k;
    il.perm.resize(static_cast<size_t>(lc));
    for (int j = 0; j < lc; ++j) il.perm[static_cast<size_t>(j)] = j;
    uint64_t state = mix_seed(global_seed, i_k);
    for (int j = lc - 1; j > 0; --j) {
        const uint64_t r = splitmix64(state);
        const auto pick = static_cast<int>((static_cast<__uint128_t>(r) * (j + 1)) >> 64);
        std::swap(il.perm[static_cast<size_t>(j)], il.perm[static_cast<size_t>(pick)]);
    }
    il.inv_.resize(static_cast<size_t>(lc));
    for (int j = 0; j < lc; ++j) il.inv_[static_cast<size_t>(il.perm[static_cast<size_t>(j)])] = j;
    return il;
}

std::vector<std::complex<double>> modulate(const BitVec& bits, Modulation mod) {
    std::vector<std::complex<double>> s;
    if (mod == Modulation::bpsk) {
        s.reserve(bits.size());
        for (uint8_t b : bits) s.emplace_back(b ? 1.0 : -1.0, 0.0);
        return s;
    }
    if (bits.size() % 2 != 0)
        throw OddLength("qpsk needs an even bit count, got " + std::to_string(bits.size()));
    const double a = 1.0 / std::sqrt(2.0);
    s.reserve(bits.size() / 2);
    for (size_t i = 0; i < bits.size(); i += 2)
        s.emplace_back(bits[i] ? a : -a, bits[i + 1] ? a : -a);
    return s;
}

Eigen::VectorXcd placed_symbols(const ValidatedConfig& cfg, const Interleaver& il,
                                const BitVec& codeword) {
    const auto sym = modulate(codeword, cfg.raw.modulation);
    Eigen::VectorXcd padded = Eigen::VectorXcd::Zero(cfg.lc);
    for (size_t p = 0; p < sym.size(); ++p) padded[static_cast<Eigen::Index>(p)] = sym[p];
    Eigen::VectorXcd out(cfg.lc);
    for (int j = 0; j < cfg.lc; ++j) out[j] = padded[il.perm[static_cast<size_t>(j)]];
    return out;
}

Frame make_frame(const ValidatedConfig& cfg, const Codebook& cb, const LdpcCode& code,
                 const BitVec& v) {
    if (static_cast<int>(v.size()) != cfg.raw.b)
        throw DimensionMismatch("frame: message has " + std::to_string(v.size()) +
                                " bits, config says " + std::to_string(cfg.raw.b));
    const BitVec v_p = subrange(v, 0, static_cast<size_t>(cfg.raw.bp));
    const BitVec v_c = subrange(v, static_cast<size_t>(cfg.raw.bp), static_cast<size_t>(cfg.raw.bc));
    const uint32_t i_k = cs_encode(v_p);
    const Interleaver il = build_interleaver(i_k, cfg.lc, cfg.interleaver_seed());
    const BitVec word = ldpc_encode(code, v_c);

    Frame f;
    f.i_k = i_k;
    f.x.resize(cfg.raw.l);
    const double amp = std::sqrt(cfg.power);
    f.x.head(cfg.raw.lp) = amp * cb.a.col(static_cast<Eigen::Index>(i_k) - 1);
    f.x.tail(cfg.lc) = amp * placed_symbols(cfg, il, word);
    return f;
}

} // namespace ura

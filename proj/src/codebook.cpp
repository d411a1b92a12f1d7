#include "ura/codebook.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "ura/errors.hpp"
#include "ura/rng.hpp"

namespace ura {

Codebook build_codebook(uint64_t seed, int lp, int bp, size_t max_bytes) {
    if (lp < 1 || bp < 1) throw InvalidConfig("codebook needs lp >= 1 and bp >= 1");
    if (bp >= 48) throw SizeOverflow("codebook: 2^bp does not fit");
    const size_t cols = size_t(1) << bp;
    const size_t bytes = cols * static_cast<size_t>(lp) * sizeof(std::complex<double>);
    if (bytes > max_bytes)
        throw SizeOverflow("codebook of " + std::to_string(bytes) + " bytes exceeds cap of " +
                           std::to_string(max_bytes));

    Codebook cb;
    cb.seed = seed;
    cb.lp = lp;
    cb.bp = bp;
    cb.a.resize(lp, static_cast<Eigen::Index>(cols));
    Rng rng = Rng::fork(seed, 0xcb00e5ull);
    for (Eigen::Index j = 0; j < cb.a.cols(); ++j) {
        double energy = 0.0;
        for (int i = 0; i < lp; ++i) {
            const std::complex<double> g = rng.cnormal(1.0);
            cb.a(i, j) = g;
            energy += std::norm(g);
        }
        // exact column power lp
        const double scale = std::sqrt(static_cast<double>(lp) / energy);
        cb.a.col(j) *= scale;
    }
    return cb;
}

uint32_t cs_encode(const BitVec& v_p) {
    return static_cast<uint32_t>(bits_to_value(v_p)) + 1u;
}

BitVec cs_decode_index(uint32_t i_k, int bp) {
    return value_to_bits(i_k - 1u, bp);
}

namespace {
constexpr char kMagic[8] = {'U', 'R', 'A', 'C', 'B', 'K', '0', '1'};
}

void save_codebook(const Codebook& cb, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write codebook file: " + path);
    out.write(kMagic, sizeof kMagic);
    auto put_u64 = [&](uint64_t x) {
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 8);
    };
    put_u64(static_cast<uint64_t>(cb.lp));
    put_u64(static_cast<uint64_t>(cb.bp));
    put_u64(cb.seed);
    for (Eigen::Index j = 0; j < cb.a.cols(); ++j) {
        for (int i = 0; i < cb.lp; ++i) {
            const double re = cb.a(i, j).real();
            const double im = cb.a(i, j).imag();
            uint64_t u;
            std::memcpy(&u, &re, 8);
            put_u64(u);
            std::memcpy(&u, &im, 8);
            put_u64(u);
        }
    }
    if (!out) throw IoError("short write on codebook file: " + path);
}

Codebook load_codebook(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read codebook file: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw IoError("not a codebook file: " + path);
    auto get_u64 = [&]() -> uint64_t {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        uint64_t x = 0;
        for (int i = 7; i >= 0; --i) x = (x << 8) | b[i];
        return x;
    };
    Codebook cb;
    cb.lp = static_cast<int>(get_u64());
    cb.bp = static_cast<int>(get_u64());
    cb.seed = get_u64();
    if (!in || cb.lp < 1 || cb.bp < 1 || cb.bp >= 48)
        throw IoError("corrupt codebook header: " + path);
    cb.a.resize(cb.lp, static_cast<Eigen::Index>(size_t(1) << cb.bp));
    for (Eigen::Index j = 0; j < cb.a.cols(); ++j) {
        for (int i = 0; i < cb.lp; ++i) {
            uint64_t ur = get_u64();
            uint64_t ui = get_u64();
            double re, im;
            std::memcpy(&re, &ur, 8);
            std::memcpy(&im, &ui, 8);
            cb.a(i, j) = {re, im};
        }
    }
    if (!in) throw IoError("truncated codebook file: " + path);
    return cb;
}

} // namespace ura

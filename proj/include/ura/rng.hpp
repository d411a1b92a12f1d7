#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

namespace ura {

/// splitmix64 step; also used standalone to derive stream seeds.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Mixes a stream tag into a master seed so sub-streams are independent
/// and reproducible in isolation.
inline uint64_t mix_seed(uint64_t seed, uint64_t tag) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (tag + 1));
    uint64_t a = splitmix64(s);
    uint64_t b = splitmix64(s);
    return a ^ (b << 1);
}

/// Deterministic PRNG used everywhere in the simulator. The generator is a
/// splitmix64 core with Box-Muller for normals, so draws are bit-identical
/// across platforms and standard-library versions.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
    }

    static Rng fork(uint64_t seed, uint64_t tag) { return Rng(mix_seed(seed, tag)); }

    uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform in [0,1) with 53 usable bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n); n >= 1. Lemire multiply-shift, negligible bias.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    bool bit() { return (next_u64() >> 63) != 0; }

    /// Standard normal via Box-Muller (polar rejection avoided for determinism).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    /// CN(0, var): complex normal, E|x|^2 = var.
    std::complex<double> cnormal(double var = 1.0) {
        const double s = std::sqrt(var / 2.0);
        return {s * normal(), s * normal()};
    }

    std::vector<uint8_t> bits(size_t n) {
        std::vector<uint8_t> v(n);
        for (auto& b : v) b = bit() ? 1 : 0;
        return v;
    }

  private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace ura

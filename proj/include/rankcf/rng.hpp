#pragma once

#include <cstdint>
#include <random>

#include "rankcf/normal.hpp"

namespace rankcf {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Decorrelated child seed for stream `stream` of a base seed. Used to hand
// replications, bootstrap draws and oracles independent deterministic streams.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return splitmix64(base ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Deterministic generator: mt19937_64 is bit-stable across platforms, and all
// variates go through inverse-cdf transforms so sequences are reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53;
    }

    double normal() { return norm_quantile(uniform()); }

    // Gamma with shape 2, rate 2: mean 1, variance 1/2.
    double gamma22() {
        double e1 = -std::log(uniform());
        double e2 = -std::log(uniform());
        return 0.5 * (e1 + e2);
    }

    // Uniform index in {0, ..., n-1} by rejection, bias-free.
    std::uint64_t index(std::uint64_t n) {
        std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = eng_(); } while (x >= lim);
        return x % n;
    }

  private:
    std::mt19937_64 eng_;
};

} // namespace rankcf

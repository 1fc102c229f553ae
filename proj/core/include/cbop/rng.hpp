#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cbop {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from a root seed and a path of indices,
/// e.g. derive_seed(seed, {epoch, transition}).
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(root);
    for (auto p : path) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t root, std::initializer_list<std::uint64_t> path = {}) {
    return Rng(derive_seed(root, path));
}

inline double standard_normal(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    return u(rng);
}

}  // namespace cbop

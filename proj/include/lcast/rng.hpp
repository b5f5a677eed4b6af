#ifndef LCAST_RNG_HPP
#define LCAST_RNG_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace lcast {

// All randomness in a run flows from one root seed. Each subsystem derives its
// own stream via seed_for(root, tag), so adding draws to one subsystem never
// perturbs another. Derivation: FNV-1a over the tag, mixed into the root with
// one splitmix64 round.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t seed_for(uint64_t root, std::string_view tag) {
    return splitmix64(root ^ fnv1a(tag));
}

using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t root, std::string_view tag) {
    return Rng(seed_for(root, tag));
}

// Uniform integer in [0, n). Hand-rolled so streams are identical across
// standard library implementations.
inline uint64_t uniform_below(Rng& rng, uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = rng();
    while (v >= limit) v = rng();
    return v % n;
}

inline double uniform_unit(Rng& rng) {
    return (rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller, no cached spare (keeps the stream simple).
inline double normal(Rng& rng) {
    double u1 = uniform_unit(rng);
    while (u1 <= 0.0) u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Normal(0, std) truncated at +/- 2 std, the initializer used for all
// learnable arrays (std 0.02 unless stated otherwise).
inline double truncated_normal(Rng& rng, double std_dev) {
    double z = normal(rng);
    while (z < -2.0 || z > 2.0) z = normal(rng);
    return z * std_dev;
}

// Portable Fisher-Yates (std::shuffle is implementation-defined).
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace lcast

#endif

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Deterministic randomness. mt19937_64 output is pinned by the standard, and
// all derived draws below avoid std distributions (whose algorithms are
// implementation-defined), so seeded runs reproduce bit-identically.
namespace hybridmap {

struct Rng {
    std::mt19937_64 gen;

    explicit Rng(uint64_t seed = 0) : gen(seed) {}

    uint64_t next() { return gen(); }

    // Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant at our scales.
    uint64_t bounded(uint64_t n) { return n ? gen() % n : 0; }

    // Uniform in (0, 1]: 53 mantissa bits, never exactly 0 (safe for log()).
    double unit() { return (static_cast<double>(gen() >> 11) + 1.0) * (1.0 / 9007199254740992.0); }

    double normal(double mean, double stddev) {
        double u1 = unit();
        double u2 = unit();
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }
};

// splitmix64: derives independent child seeds from a base seed plus tags.
inline uint64_t mix_seed(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t tag) { return mix_seed(base ^ mix_seed(tag)); }

} // namespace hybridmap

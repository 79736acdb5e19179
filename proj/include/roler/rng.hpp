#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

#include "roler/common.hpp"

namespace roler {

// Splittable deterministic RNG. A split derives a child stream from the
// *creation* seed and a name, so the set of children never depends on how many
// values were drawn from the parent. All distributions are implemented here
// rather than with std:: distributions, keeping byte-identical output across
// standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(seed) {}

    uint64_t seed() const { return seed_; }

    Rng split(std::string_view name) const { return Rng(fnv1a64(name, fnv1a64(seed_))); }
    Rng split(std::string_view name, uint64_t a) const { return Rng(fnv1a64(a, fnv1a64(name, fnv1a64(seed_)))); }
    Rng split(std::string_view name, uint64_t a, uint64_t b) const {
        return Rng(fnv1a64(b, fnv1a64(a, fnv1a64(name, fnv1a64(seed_)))));
    }

    uint64_t raw() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; one value per call.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    // Uniform integer in [0, n). Multiply-shift; bias is ~n/2^64.
    uint64_t integer(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = integer(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct indices drawn from [0, n), in random order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        shuffle(idx);
        idx.resize(k);
        return idx;
    }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace roler

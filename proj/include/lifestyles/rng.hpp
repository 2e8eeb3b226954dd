#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace lifestyles {

// FNV-1a over a label string; used to derive per-stage seeds from one root seed.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t root, const std::string& label) {
    return splitmix64(root ^ fnv1a64(label));
}

// mt19937_64 is fully specified by the standard; the distribution helpers below are
// hand-rolled because std:: distributions are implementation-defined and would break
// the seed-reproducibility contracts.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), n > 0
    std::uint64_t uniform_int(std::uint64_t n) {
        std::uint64_t threshold = (-n) % n;
        for (;;) {
            std::uint64_t r = engine_();
            if (r >= threshold) return r % n;
        }
    }

    // standard normal, Box-Muller (sin partner discarded to keep the stream simple)
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // weights need not be normalized; returns index in [0, weights.size())
    std::size_t categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double x = uniform() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            acc += weights[i];
            if (x < acc) return i;
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

inline std::vector<int> shuffled_indices(int n, std::uint64_t seed) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    return idx;
}

// Users partitioned into `folds` disjoint row-folds by seeded shuffle.
inline std::vector<std::vector<int>> make_folds(int n, int folds, std::uint64_t seed) {
    std::vector<int> perm = shuffled_indices(n, seed);
    std::vector<std::vector<int>> out(folds);
    for (int f = 0; f < folds; ++f) {
        long long lo = static_cast<long long>(f) * n / folds;
        long long hi = static_cast<long long>(f + 1) * n / folds;
        for (long long i = lo; i < hi; ++i) out[f].push_back(perm[i]);
        std::sort(out[f].begin(), out[f].end());
    }
    return out;
}

}  // namespace lifestyles

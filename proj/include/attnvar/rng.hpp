// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace attnvar {

/// Deterministic random source. All draws are derived from the raw 64-bit
/// stream with fixed arithmetic, so a seed reproduces the identical sequence
/// on any platform (the std distribution objects are implementation-defined
/// and therefore avoided).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

    /// Uniform integer in [0, n). Requires n > 0.
    int below(int n) {
        const auto wide = static_cast<unsigned __int128>(next());
        return static_cast<int>((wide * static_cast<unsigned __int128>(n)) >> 64);
    }

    /// Uniform integer in [lo, hi], inclusive.
    int range(int lo, int hi) { return lo + below(hi - lo + 1); }

    bool bernoulli(double p) { return uniform01() < p; }

    template <class T>
    void shuffle(std::vector<T>& values) {
        for (int i = static_cast<int>(values.size()) - 1; i > 0; --i) {
            std::swap(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(below(i + 1))]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace attnvar

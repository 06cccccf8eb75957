#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace covopt {

/// Deterministic pseudo-random generator (xoshiro256** core, splitmix64 seeding).
///
/// All sampling helpers are implemented in-house so that streams are
/// bit-reproducible across standard libraries and platforms.  Independent
/// substreams are derived with `child`, keyed by a short tag, so inserting a
/// new consumer does not shift the draws of existing ones.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform01();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [0, n).  n must be positive.
    std::size_t index(std::size_t n);

    /// Standard normal via Box-Muller (one draw per call, no caching).
    double normal();

    double normal(double mean, double stddev);

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Random permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n);

    /// `count` distinct indices drawn from [0, n) without replacement.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count);

    /// Derive an independent child stream from this generator's seed and a tag.
    Rng child(std::string_view tag) const;

private:
    std::array<std::uint64_t, 4> state_;
    std::uint64_t seed_;
};

/// splitmix64 step, exposed for seed derivation in tests.
std::uint64_t splitmix64(std::uint64_t& state);

}

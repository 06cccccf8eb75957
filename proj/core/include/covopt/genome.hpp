#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "covopt/rng.hpp"

namespace covopt {

inline constexpr double kPanMin = -180.0;
inline constexpr double kPanMax = 180.0;
inline constexpr double kTiltMin = -90.0;
inline constexpr double kTiltMax = 90.0;
inline constexpr double kPanRange = kPanMax - kPanMin;
inline constexpr double kTiltRange = kTiltMax - kTiltMin;

/// Mixed-variable deployment: per candidate site a selection bit plus pan and
/// tilt angles in degrees.  Valid solutions select exactly k sites and keep
/// angles inside [-180,180] x [-90,90].
struct Solution {
    std::vector<std::uint8_t> select;
    std::vector<double> pan;
    std::vector<double> tilt;

    std::size_t num_sites() const noexcept { return select.size(); }
    int selected_count() const noexcept;

    friend bool operator==(const Solution&, const Solution&) = default;
};

struct EvaluatedSolution {
    Solution solution;
    double fitness = 0.0;
    int eval_index = -1;
};

/// True iff sizes are consistent, exactly k sites are selected, and all
/// angles are within bounds.
bool is_valid(const Solution& sol, int k);

/// Returns a copy of `select` adjusted to exactly k ones: surplus ones are
/// demoted at random, missing ones promoted at random; bits that can stay
/// untouched stay untouched.
std::vector<std::uint8_t> repair(const std::vector<std::uint8_t>& select, int k, Rng& rng);

/// Mean per-variable dissimilarity over all 3|Z| genes: binary mismatch 0/1,
/// angles |a-b|/range.  Always in [0,1].
double gower_distance(const Solution& a, const Solution& b);

/// Euclidean norm over the concatenated gene vector with every variable
/// scaled to [0,1].
double normalized_euclidean(const Solution& a, const Solution& b);

/// Reorders sites by `pi` (gather: out site j <- in site pi[j]), moving each
/// site's three genes together.
Solution permute_solution(const Solution& sol, std::span<const std::size_t> pi);

/// Applies the same site permutation to both members of a training pair.
std::pair<Solution, Solution> permute_pair(const Solution& a, const Solution& b,
                                           std::span<const std::size_t> pi);

}

#include "covopt/genome.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace covopt {

int Solution::selected_count() const noexcept {
    int n = 0;
    for (auto b : select) n += b != 0;
    return n;
}

bool is_valid(const Solution& sol, int k) {
    const std::size_t z = sol.select.size();
    if (sol.pan.size() != z || sol.tilt.size() != z) return false;
    int ones = 0;
    for (std::size_t j = 0; j < z; ++j) {
        if (sol.select[j] > 1) return false;
        ones += sol.select[j];
        if (!(sol.pan[j] >= kPanMin && sol.pan[j] <= kPanMax)) return false;
        if (!(sol.tilt[j] >= kTiltMin && sol.tilt[j] <= kTiltMax)) return false;
    }
    return ones == k;
}

std::vector<std::uint8_t> repair(const std::vector<std::uint8_t>& select, int k, Rng& rng) {
    if (k < 0 || std::size_t(k) > select.size())
        throw std::invalid_argument("repair: k outside [0, |Z|]");
    std::vector<std::uint8_t> out = select;
    std::vector<std::size_t> ones, zeros;
    for (std::size_t j = 0; j < out.size(); ++j)
        (out[j] ? ones : zeros).push_back(j);

    while (int(ones.size()) > k) {
        std::size_t pick = rng.index(ones.size());
        out[ones[pick]] = 0;
        ones[pick] = ones.back();
        ones.pop_back();
    }
    while (int(ones.size()) < k) {
        std::size_t pick = rng.index(zeros.size());
        out[zeros[pick]] = 1;
        ones.push_back(zeros[pick]);
        zeros[pick] = zeros.back();
        zeros.pop_back();
    }
    return out;
}

namespace {

void check_same_shape(const Solution& a, const Solution& b) {
    if (a.select.size() != b.select.size() || a.pan.size() != b.pan.size() ||
        a.tilt.size() != b.tilt.size())
        throw std::invalid_argument("solutions have mismatched site counts");
}

}

double gower_distance(const Solution& a, const Solution& b) {
    check_same_shape(a, b);
    const std::size_t z = a.select.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < z; ++j) {
        sum += a.select[j] != b.select[j] ? 1.0 : 0.0;
        sum += std::abs(a.pan[j] - b.pan[j]) / kPanRange;
        sum += std::abs(a.tilt[j] - b.tilt[j]) / kTiltRange;
    }
    return sum / double(3 * z);
}

double normalized_euclidean(const Solution& a, const Solution& b) {
    check_same_shape(a, b);
    const std::size_t z = a.select.size();
    double sum = 0.0;
    for (std::size_t j = 0; j < z; ++j) {
        double db = double(a.select[j]) - double(b.select[j]);
        double dp = (a.pan[j] - b.pan[j]) / kPanRange;
        double dt = (a.tilt[j] - b.tilt[j]) / kTiltRange;
        sum += db * db + dp * dp + dt * dt;
    }
    return std::sqrt(sum);
}

Solution permute_solution(const Solution& sol, std::span<const std::size_t> pi) {
    const std::size_t z = sol.select.size();
    if (pi.size() != z) throw std::invalid_argument("permutation size mismatch");
    std::vector<std::uint8_t> seen(z, 0);
    for (std::size_t v : pi) {
        if (v >= z || seen[v]) throw std::invalid_argument("not a permutation");
        seen[v] = 1;
    }
    Solution out;
    out.select.resize(z);
    out.pan.resize(z);
    out.tilt.resize(z);
    for (std::size_t j = 0; j < z; ++j) {
        out.select[j] = sol.select[pi[j]];
        out.pan[j] = sol.pan[pi[j]];
        out.tilt[j] = sol.tilt[pi[j]];
    }
    return out;
}

std::pair<Solution, Solution> permute_pair(const Solution& a, const Solution& b,
                                           std::span<const std::size_t> pi) {
    check_same_shape(a, b);
    return {permute_solution(a, pi), permute_solution(b, pi)};
}

}

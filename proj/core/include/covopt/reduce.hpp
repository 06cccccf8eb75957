#pragma once

#include <span>

namespace covopt {

/// Pairwise tree sum with a position-fixed association order, so the result
/// is bit-identical no matter how many threads produced the buffer.
inline double tree_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    if (v.size() == 1) return v[0];
    if (v.size() == 2) return v[0] + v[1];
    const std::size_t mid = v.size() / 2;
    return tree_sum(v.first(mid)) + tree_sum(v.subspan(mid));
}

}

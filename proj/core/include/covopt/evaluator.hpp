#pragma once

#include <cmath>
#include <vector>

#include "covopt/genome.hpp"
#include "covopt/scenario.hpp"

namespace covopt {

struct ObjectiveValue {
    /// Weighted residual blind-spot mass (minimized).
    double fitness = 0.0;
    /// 1 - fitness / total_weight.
    double coverage_fraction = 0.0;
};

struct EvalCounter {
    int used = 0;
    int budget = 0;

    int remaining() const noexcept { return budget - used; }
    bool exhausted() const noexcept { return used >= budget; }
};

/// Numerically stable logistic sigmoid.
inline double logistic(double x) {
    if (x >= 0.0) {
        double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

/// Distance membership 1 - sigma(beta_d * (d - t_d)); strictly decreasing.
double mu_distance(double d, const SensorParams& p);

/// Pan membership sigma(beta_p*(a + t_p)) - sigma(beta_p*(a - t_p)); even, peaked at 0.
double mu_pan(double alpha_p_deg, const SensorParams& p);

/// Tilt membership, same form as pan with (beta_t, t_t).
double mu_tilt(double alpha_t_deg, const SensorParams& p);

/// Full sensing probability mu_d * mu_p * mu_t * v for one sensor pose and one
/// target.  Pan deviation is 0 when the target sits exactly on the vertical
/// axis; tilt deviation there is sign(dz)*90 - tilt.  v comes from
/// line_of_sight; occlusion forces an exact 0.
double sense_probability(const Point3& sensor_pos, double pan_deg, double tilt_deg,
                         const Target& q, const DemGrid& grid, const SensorParams& p);

/// True objective: fitness = sum_q w_q * prod_{selected i} (1 - P(s_i, q)).
/// Increments `counter`; throws BudgetExhausted when the budget is spent and
/// std::invalid_argument for solutions that do not fit the instance.  Target
/// contributions may be computed with `threads` workers; the reduction order
/// is fixed, so the result is bit-identical for any thread count.
ObjectiveValue evaluate(const Solution& sol, const ScenarioInstance& inst, EvalCounter& counter,
                        int threads = 1);

/// Same objective with site-target visibility precomputed once.  Visibility
/// does not depend on the angle genes, so results are bit-identical to the
/// plain evaluate.
class CachedEvaluator {
public:
    explicit CachedEvaluator(const ScenarioInstance& inst, int threads = 1);

    ObjectiveValue evaluate(const Solution& sol, EvalCounter& counter) const;

    const ScenarioInstance& instance() const noexcept { return *inst_; }
    double total_weight() const noexcept { return total_weight_; }
    bool visible(int site, int target) const;

private:
    const ScenarioInstance* inst_;
    int threads_;
    double total_weight_;
    std::vector<std::uint8_t> visible_;  // site-major |Z| x |Q|
};

}

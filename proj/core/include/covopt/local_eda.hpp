#pragma once

#include <functional>
#include <span>
#include <vector>

#include "covopt/genome.hpp"
#include "covopt/rng.hpp"

namespace covopt {

/// Fitness-weighted estimation-of-distribution model: per-gene selection
/// probabilities for the binary part and independent Gaussians for the
/// angles.  Continuous genes are ordered pan[0..Z) then tilt[0..Z).
struct EdaModel {
    std::vector<double> weights;      // per selected individual, sums to 1
    std::vector<double> mean;         // 2|Z|
    std::vector<double> stddev;       // 2|Z|
    std::vector<double> select_prob;  // |Z|
};

/// Fits the model on the n_best lowest-fitness archive entries (ties broken
/// by evaluation order).  Fitness is reversed to a maximization score
/// fit_i = worst_in_pop - f_i + 1e-12; continuous means are weight-averaged
/// while standard deviations divide by n_best unweighted; selection
/// probabilities are the weighted frequency of each site being chosen.
EdaModel fit_eda(std::span<const EvaluatedSolution> archive, int n_best);

/// Draws n_samples valid solutions: the binary part walks genes in
/// probability-descending order, flipping with probability prob_j until k
/// ones exist (repeat passes; if a pass places none, the highest-probability
/// remaining gene is forced); angles are clipped Gaussians.
std::vector<Solution> sample_eda(const EdaModel& model, int n_samples, int k, Rng& rng);

/// Gaussian-kernel RBF regressor over Gower distance.
struct RbfnModel {
    std::vector<Solution> centers;
    std::vector<double> center_fitness;
    std::vector<double> weights;
    double gamma = 0.1;
    double ridge = 0.0;
    /// True when a singular system forced ridge 1e-8.
    bool fallback_regularized = false;

    double predict(const Solution& sol) const;
};

/// Fits on the `count` best archive entries (truncated to what is
/// available).  Kernel width is the median pairwise Gower distance among
/// centers, 0.1 when degenerate; weights solve (K + ridge*I) w = f.
RbfnModel fit_rbfn(std::span<const EvaluatedSolution> archive, int count, double ridge = 0.0);

/// Picks [best predicted, most uncertain] from the candidates; uncertainty
/// is the minimum normalized Euclidean distance to any population member.
/// If both rules pick the same candidate the second-most-uncertain replaces
/// the exploration pick.
std::vector<Solution> local_preselect(const RbfnModel& rbfn, std::span<const Solution> candidates,
                                      std::span<const Solution> population);

/// Stub-scorer overload for tests and instrumentation.
std::vector<Solution> local_preselect(const std::function<double(const Solution&)>& predict,
                                      std::span<const Solution> candidates,
                                      std::span<const Solution> population);

}

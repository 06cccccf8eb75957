#pragma once

#include <vector>

#include "covopt/genome.hpp"
#include "covopt/rng.hpp"

namespace covopt {

struct GaConfig {
    int pop_size = 100;
    double crossover_prob = 1.0;
    double mutation_prob = 0.1;
    int tournament_size = 2;
    /// Gaussian angle-mutation sigma as a fraction of each gene's range.
    double angle_sigma_fraction = 0.05;

    void validate() const;
};

/// One generation of the correlation-aware GA: tournament selection on
/// fitness (minimization), uniform crossover that inherits each site's
/// (select, pan, tilt) triple atomically, cardinality repair, a selected/
/// unselected swap mutation and clipped Gaussian angle mutation.  Produces
/// cfg.pop_size valid offspring.
std::vector<Solution> ga_offspring(const std::vector<EvaluatedSolution>& parents,
                                   const GaConfig& cfg, Rng& rng);

}

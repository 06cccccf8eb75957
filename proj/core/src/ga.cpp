#include "covopt/ga.hpp"

#include <algorithm>
#include <stdexcept>

namespace covopt {

void GaConfig::validate() const {
    if (pop_size < 2) throw std::invalid_argument("GaConfig: pop_size must be >= 2");
    if (tournament_size < 2) throw std::invalid_argument("GaConfig: tournament_size must be >= 2");
    if (crossover_prob < 0 || crossover_prob > 1)
        throw std::invalid_argument("GaConfig: crossover_prob outside [0,1]");
    if (mutation_prob < 0 || mutation_prob > 1)
        throw std::invalid_argument("GaConfig: mutation_prob outside [0,1]");
    if (!(angle_sigma_fraction > 0))
        throw std::invalid_argument("GaConfig: angle_sigma_fraction must be positive");
}

namespace {

std::size_t tournament(const std::vector<EvaluatedSolution>& parents, int size, Rng& rng) {
    std::size_t best = rng.index(parents.size());
    for (int i = 1; i < size; ++i) {
        std::size_t cand = rng.index(parents.size());
        if (parents[cand].fitness < parents[best].fitness) best = cand;
    }
    return best;
}

void swap_mutation(Solution& sol, double prob, Rng& rng) {
    std::vector<std::size_t> selected, unselected;
    for (std::size_t j = 0; j < sol.select.size(); ++j)
        (sol.select[j] ? selected : unselected).push_back(j);
    if (unselected.empty()) return;
    for (std::size_t j : selected) {
        if (!sol.select[j]) continue;  // already swapped away this pass
        if (rng.uniform01() >= prob) continue;
        std::size_t pick = rng.index(unselected.size());
        std::size_t u = unselected[pick];
        sol.select[j] = 0;
        sol.select[u] = 1;
        unselected[pick] = j;
    }
}

void angle_mutation(Solution& sol, double prob, double sigma_fraction, Rng& rng) {
    const double pan_sigma = sigma_fraction * kPanRange;
    const double tilt_sigma = sigma_fraction * kTiltRange;
    for (std::size_t j = 0; j < sol.pan.size(); ++j) {
        if (rng.uniform01() < prob)
            sol.pan[j] = std::clamp(sol.pan[j] + rng.normal(0.0, pan_sigma), kPanMin, kPanMax);
        if (rng.uniform01() < prob)
            sol.tilt[j] = std::clamp(sol.tilt[j] + rng.normal(0.0, tilt_sigma), kTiltMin, kTiltMax);
    }
}

}

std::vector<Solution> ga_offspring(const std::vector<EvaluatedSolution>& parents,
                                   const GaConfig& cfg, Rng& rng) {
    cfg.validate();
    if (parents.size() != std::size_t(cfg.pop_size))
        throw std::invalid_argument("ga_offspring: |parents| must equal cfg.pop_size");
    const int k = parents[0].solution.selected_count();
    for (const auto& p : parents)
        if (!is_valid(p.solution, k))
            throw std::invalid_argument("ga_offspring: invalid parent solution");

    std::vector<Solution> offspring;
    offspring.reserve(parents.size());
    for (int n = 0; n < cfg.pop_size; ++n) {
        std::size_t p1 = tournament(parents, cfg.tournament_size, rng);
        std::size_t p2 = tournament(parents, cfg.tournament_size, rng);
        Solution child = parents[p1].solution;
        if (rng.uniform01() < cfg.crossover_prob) {
            const Solution& other = parents[p2].solution;
            for (std::size_t j = 0; j < child.select.size(); ++j) {
                if (rng.uniform01() < 0.5) {
                    child.select[j] = other.select[j];
                    child.pan[j] = other.pan[j];
                    child.tilt[j] = other.tilt[j];
                }
            }
        }
        child.select = repair(child.select, k, rng);
        swap_mutation(child, cfg.mutation_prob, rng);
        angle_mutation(child, cfg.mutation_prob, cfg.angle_sigma_fraction, rng);
        offspring.push_back(std::move(child));
    }
    return offspring;
}

}

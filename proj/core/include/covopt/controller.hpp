#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "covopt/evaluator.hpp"
#include "covopt/ga.hpp"
#include "covopt/genome.hpp"
#include "covopt/local_eda.hpp"
#include "covopt/ranker.hpp"
#include "covopt/scenario.hpp"

namespace covopt {

/// Append-only store of every truly evaluated solution.
class Archive {
public:
    /// Entries must arrive with strictly increasing eval_index.
    void append(EvaluatedSolution entry);

    const std::vector<EvaluatedSolution>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    const EvaluatedSolution& best() const;
    std::size_t best_index() const;

    /// The n lowest-fitness entries, ties resolved by evaluation order;
    /// n is clamped to the archive size.
    std::vector<EvaluatedSolution> top(std::size_t n) const;

private:
    std::vector<EvaluatedSolution> entries_;
    std::size_t best_ = 0;
};

enum class Phase { Global, Local };
enum class Variant { Rishm, RishmWoGlobal, RishmWoLocal, GaOnly, RandomSearch };

const char* to_string(Phase phase);
const char* to_string(Variant variant);
Variant parse_variant(const std::string& name);

struct RunConfig {
    int pop_size = 100;
    int max_fes = 2000;
    double delta = 0.2;  // fitness-diversity threshold
    std::uint64_t seed = 1;
    Variant variant = Variant::Rishm;
    int threads = 1;

    GaConfig ga;
    RankerConfig ranker;

    double eda_best_fraction = 0.45;  // N_b = floor(fraction * pop_size)
    double eda_sample_factor = 2.0;   // N_s = factor * pop_size
    int rbfn_count_factor = 5;        // centers = factor * D
    double rbfn_ridge = 0.0;
    int local_preselect_count = 2;    // tau_l
    int init_multiplier = 2;          // initial design count = multiplier * D

    int initial_sample_count(const ScenarioInstance& inst) const {
        return init_multiplier * inst.dimension();
    }
    void validate(const ScenarioInstance& inst) const;
};

struct TracePoint {
    int fe;
    double best_fitness;
};

struct PhaseSwitch {
    int iteration;
    int fe;
    Phase from;
    Phase to;
};

struct SurrogateUpdate {
    int iteration;
    int fe;
};

struct RunResult {
    std::string instance_id;
    Variant variant = Variant::Rishm;
    std::uint64_t seed = 0;
    int max_fes = 0;
    int fe_used = 0;
    double total_weight = 0.0;
    EvaluatedSolution best;
    double best_coverage = 0.0;
    std::vector<TracePoint> trace;
    std::vector<PhaseSwitch> phase_log;
    std::vector<SurrogateUpdate> update_log;
    RunConfig config;
};

/// The 2D-point mixed initial design: binary parts map each Sobol point's k
/// largest coordinates to ones; angles come from Latin hypercube strata.
/// Pure sampling, no evaluation.
std::vector<Solution> initial_designs(const ScenarioInstance& inst, const RunConfig& cfg,
                                      Rng& rng);

/// Evaluates the initial design into a fresh archive (counting against
/// `counter`), recording one trace point per evaluation.
Archive initialize(const ScenarioInstance& inst, const RunConfig& cfg,
                   const CachedEvaluator& eval, EvalCounter& counter,
                   std::vector<TracePoint>& trace);

/// Convenience overload with a self-contained budget, mainly for tests.
Archive initialize(const ScenarioInstance& inst, const RunConfig& cfg);

/// 1 - |(f_avg - f_best)/(f_worst - f_best)| over the top-n entries;
/// 0 when the top set has converged to a single fitness value.
double fitness_diversity(const Archive& archive, std::size_t n);

/// Executes the configured variant to budget exhaustion.  Deterministic
/// given cfg.seed.
RunResult run(const ScenarioInstance& inst, const RunConfig& cfg);

/// Versioned JSON result document with config echo, convergence trace,
/// phase/update logs and the best solution as a flat numeric record.
void save_result(const RunResult& result, const std::filesystem::path& path);
RunResult load_result(const std::filesystem::path& path);

}

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "covopt/genome.hpp"
#include "covopt/rng.hpp"

namespace covopt {

struct RankerConfig {
    int embed_size = 5;
    int d_model = 64;
    int feedforward_dim = 512;
    int n_heads = 8;
    int batch_size = 512;
    double learning_rate = 1e-3;
    int epochs_per_fit = 10;
    int update_threshold = 10;   // T: new evaluations needed before an update
    int recent_window = 1000;    // T_max: how far back old samples may come from
    int augmentation_factor = 10;
    int preselect_count = 3;     // tau_g

    void validate() const;
};

/// One training pair; label 0 means `first` has the smaller true fitness.
struct PairSample {
    Solution first;
    Solution second;
    int label = 0;
};

/// Compact pair store: solutions live once in a pool, records reference them
/// by id.  Augmented records carry a permutation seed and materialize the
/// permuted pair on demand, which keeps memory linear in the archive rather
/// than in the augmented pair count.
class PairDataset {
public:
    struct Record {
        std::uint32_t first_id;
        std::uint32_t second_id;
        std::uint8_t label;
        std::uint8_t augmented;
        std::uint64_t perm_seed;
    };

    PairDataset() = default;

    static PairDataset from_samples(std::vector<PairSample> samples);

    std::uint32_t add_solution(Solution s);

    /// Appends one base record plus `augment_copies` permuted copies whose
    /// permutations are seeded from `rng`.
    void append_pair(std::uint32_t first_id, std::uint32_t second_id, int label,
                     int augment_copies, Rng& rng);

    std::size_t size() const noexcept { return records_.size(); }
    std::size_t base_size() const noexcept { return base_count_; }
    bool empty() const noexcept { return records_.empty(); }
    std::size_t pool_size() const noexcept { return pool_.size(); }
    std::size_t num_sites() const;

    const Record& record(std::size_t i) const { return records_[i]; }
    const Solution& pooled(std::uint32_t id) const { return pool_[id]; }

    /// Materializes record i (applies the stored permutation if augmented).
    PairSample sample(std::size_t i) const;

private:
    std::vector<Solution> pool_;
    std::vector<Record> records_;
    std::size_t base_count_ = 0;
};

/// All ordered archive pairs (i, j), i != j, labeled by true fitness with
/// exact ties excluded, then augmented to augmentation_factor times the base
/// count via shared random site permutations.
PairDataset build_initial_pairs(std::span<const EvaluatedSolution> archive,
                                const RankerConfig& cfg, Rng& rng);

/// All (old_i, new_j) cross pairs, labeled and augmented the same way.
PairDataset build_cross_pairs(std::span<const EvaluatedSolution> old_entries,
                              std::span<const EvaluatedSolution> new_entries,
                              const RankerConfig& cfg, Rng& rng);

/// Attention-based scoring network trained with the pairwise logistic loss
/// yhat = sigma(s(first) - s(second)).  Lower score = predicted better.
/// Per-kind scalar embeddings are fused per site by Hadamard product, lifted
/// to d_model, passed through one multi-head self-attention block over site
/// tokens, mean-pooled, and scored by a two-layer head with batch
/// normalization and ReLU.  Training is deterministic given the construction
/// seed and data order; inference uses frozen normalization statistics.
class RankModel {
public:
    RankModel(int num_sites, const RankerConfig& cfg, std::uint64_t seed);
    RankModel(RankModel&&) noexcept;
    RankModel& operator=(RankModel&&) noexcept;
    ~RankModel();

    int num_sites() const;
    const RankerConfig& config() const;
    bool fitted() const;

    /// Trains for config().epochs_per_fit epochs with config().batch_size
    /// minibatches and an adaptive-moment optimizer.  Within a batch each
    /// distinct underlying solution is forwarded once; the network is exactly
    /// permutation-invariant, so augmented copies share that forward pass.
    void fit(const PairDataset& pairs);

    /// Mean training loss per epoch of the most recent fit call.
    const std::vector<double>& epoch_losses() const;

    double score(const Solution& sol) const;
    std::vector<double> scores(std::span<const Solution> sols) const;

    void save(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;
    static RankModel load(std::istream& in);
    static RankModel load(const std::filesystem::path& path);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// sigma(score(a) - score(b)); < 0.5 means a predicted superior.
double predict_pair(const RankModel& model, const Solution& a, const Solution& b);

/// Core voting rule on precomputed scores: offspring o gets
/// sum_o = sum_p sigma(s_o - s_p); the tau smallest sums win, ties broken by
/// generation order.  Returns offspring indices in selection order.
std::vector<std::size_t> vote_preselect_indices(const std::vector<double>& parent_scores,
                                                const std::vector<double>& offspring_scores,
                                                int tau);

std::vector<Solution> vote_preselect(const RankModel& model, std::span<const Solution> parents,
                                     std::span<const Solution> offspring, int tau);

/// Stub-scorer overload used by tests and baselines.
std::vector<Solution> vote_preselect(const std::function<double(const Solution&)>& score,
                                     std::span<const Solution> parents,
                                     std::span<const Solution> offspring, int tau);

/// Online update rule.  The last `new_count` archive entries are the buffer
/// of evaluations since the previous update.  If the buffer has reached
/// cfg.update_threshold and the best fitness improved, samples
/// cfg.update_threshold old entries uniformly from the most recent
/// cfg.recent_window pre-buffer entries, builds the labeled cross pairs,
/// augments and trains; returns whether an update ran (caller then clears
/// its buffer).
bool maybe_update(RankModel& model, std::span<const EvaluatedSolution> archive,
                  std::size_t new_count, bool best_improved, const RankerConfig& cfg, Rng& rng);

}

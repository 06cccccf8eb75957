#include "covopt/controller.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>

#include <boost/random/sobol.hpp>
#include <nlohmann/json.hpp>

#include "covopt/errors.hpp"
#include "covopt/version.hpp"

namespace covopt {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Archive

void Archive::append(EvaluatedSolution entry) {
    if (!entries_.empty() && entry.eval_index <= entries_.back().eval_index)
        throw std::invalid_argument("Archive: eval_index must be strictly increasing");
    if (!std::isfinite(entry.fitness))
        throw std::invalid_argument("Archive: fitness must be finite");
    entries_.push_back(std::move(entry));
    if (entries_.size() == 1 || entries_.back().fitness < entries_[best_].fitness)
        best_ = entries_.size() - 1;
}

const EvaluatedSolution& Archive::best() const {
    if (entries_.empty()) throw std::logic_error("Archive: empty");
    return entries_[best_];
}

std::size_t Archive::best_index() const {
    if (entries_.empty()) throw std::logic_error("Archive: empty");
    return best_;
}

std::vector<EvaluatedSolution> Archive::top(std::size_t n) const {
    n = std::min(n, entries_.size());
    std::vector<std::size_t> idx(entries_.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return entries_[a].fitness < entries_[b].fitness;
    });
    std::vector<EvaluatedSolution> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(entries_[idx[i]]);
    return out;
}

// ---------------------------------------------------------------------------
// Config and names

const char* to_string(Phase phase) { return phase == Phase::Global ? "global" : "local"; }

const char* to_string(Variant variant) {
    switch (variant) {
        case Variant::Rishm: return "rishm";
        case Variant::RishmWoGlobal: return "rishm_wo_global";
        case Variant::RishmWoLocal: return "rishm_wo_local";
        case Variant::GaOnly: return "ga_only";
        case Variant::RandomSearch: return "random_search";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    for (Variant v : {Variant::Rishm, Variant::RishmWoGlobal, Variant::RishmWoLocal,
                      Variant::GaOnly, Variant::RandomSearch})
        if (name == to_string(v)) return v;
    throw std::invalid_argument("unknown variant '" + name + "'");
}

void RunConfig::validate(const ScenarioInstance& inst) const {
    if (pop_size < 2) throw std::invalid_argument("RunConfig: pop_size must be >= 2");
    if (!(delta >= 0 && delta <= 1)) throw std::invalid_argument("RunConfig: delta outside [0,1]");
    if (threads < 1) throw std::invalid_argument("RunConfig: threads must be >= 1");
    if (init_multiplier < 1)
        throw std::invalid_argument("RunConfig: init_multiplier must be >= 1");
    if (max_fes <= initial_sample_count(inst))
        throw std::invalid_argument("RunConfig: max_fes must exceed the initial design count");
    if (!(eda_best_fraction > 0 && eda_best_fraction <= 1))
        throw std::invalid_argument("RunConfig: eda_best_fraction outside (0,1]");
    if (!(eda_sample_factor > 0))
        throw std::invalid_argument("RunConfig: eda_sample_factor must be positive");
    if (rbfn_count_factor < 1)
        throw std::invalid_argument("RunConfig: rbfn_count_factor must be >= 1");
    if (rbfn_ridge < 0) throw std::invalid_argument("RunConfig: rbfn_ridge must be >= 0");
    if (local_preselect_count < 1 || local_preselect_count > 2)
        throw std::invalid_argument("RunConfig: local_preselect_count must be 1 or 2");
    ranker.validate();
    GaConfig g = ga;
    g.pop_size = pop_size;
    g.validate();
}

// ---------------------------------------------------------------------------
// Initialization

std::vector<Solution> initial_designs(const ScenarioInstance& inst, const RunConfig& cfg,
                                      Rng& rng) {
    const int z = inst.num_sites();
    const int n = cfg.initial_sample_count(inst);
    const int k = inst.k;

    std::vector<Solution> designs(static_cast<std::size_t>(n));
    for (auto& d : designs) {
        d.select.assign(std::size_t(z), 0);
        d.pan.resize(std::size_t(z));
        d.tilt.resize(std::size_t(z));
    }

    // Binary part: Sobol points, k largest coordinates become ones.
    boost::random::sobol sob{unsigned(z)};
    std::vector<double> point(static_cast<std::size_t>(z));
    std::vector<int> order(static_cast<std::size_t>(z));
    for (auto& d : designs) {
        bool degenerate = true;
        while (degenerate) {
            for (int j = 0; j < z; ++j) {
                point[std::size_t(j)] = std::ldexp(double(sob()), -64);
                if (point[std::size_t(j)] != 0.0) degenerate = false;
            }
        }
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return point[std::size_t(a)] > point[std::size_t(b)]; });
        for (int r = 0; r < k; ++r) d.select[std::size_t(order[std::size_t(r)])] = 1;
    }

    // Continuous part: Latin hypercube, one sample per stratum per dimension.
    auto lhs_dim = [&](auto getter, double lo, double hi) {
        const double width = (hi - lo) / double(n);
        auto perm = rng.permutation(std::size_t(n));
        for (int i = 0; i < n; ++i)
            getter(designs[std::size_t(i)]) = lo + (double(perm[std::size_t(i)]) + rng.uniform01()) * width;
    };
    for (int j = 0; j < z; ++j)
        lhs_dim([j](Solution& s) -> double& { return s.pan[std::size_t(j)]; }, kPanMin, kPanMax);
    for (int j = 0; j < z; ++j)
        lhs_dim([j](Solution& s) -> double& { return s.tilt[std::size_t(j)]; }, kTiltMin, kTiltMax);

    return designs;
}

namespace {

void evaluate_into(const CachedEvaluator& eval, Solution sol, EvalCounter& counter,
                   Archive& archive, std::vector<TracePoint>& trace) {
    const int idx = counter.used;
    const ObjectiveValue val = eval.evaluate(sol, counter);
    archive.append({std::move(sol), val.fitness, idx});
    trace.push_back({counter.used, archive.best().fitness});
}

}

Archive initialize(const ScenarioInstance& inst, const RunConfig& cfg,
                   const CachedEvaluator& eval, EvalCounter& counter,
                   std::vector<TracePoint>& trace) {
    const int n = cfg.initial_sample_count(inst);
    if (counter.remaining() < n)
        throw std::invalid_argument("initialize: budget smaller than the initial design");
    Rng rng = Rng(cfg.seed).child("init");
    Archive archive;
    for (auto& d : initial_designs(inst, cfg, rng))
        evaluate_into(eval, std::move(d), counter, archive, trace);
    return archive;
}

Archive initialize(const ScenarioInstance& inst, const RunConfig& cfg) {
    CachedEvaluator eval(inst, cfg.threads);
    EvalCounter counter{0, cfg.max_fes};
    std::vector<TracePoint> trace;
    return initialize(inst, cfg, eval, counter, trace);
}

double fitness_diversity(const Archive& archive, std::size_t n) {
    if (archive.empty()) throw std::invalid_argument("fitness_diversity: empty archive");
    auto top = archive.top(n);
    const double f_best = top.front().fitness;
    const double f_worst = top.back().fitness;
    if (f_worst == f_best) return 0.0;
    double sum = 0.0;
    for (const auto& e : top) sum += e.fitness;
    const double f_avg = sum / double(top.size());
    return 1.0 - std::abs((f_avg - f_best) / (f_worst - f_best));
}

// ---------------------------------------------------------------------------
// Main loop

namespace {

std::vector<Solution> population_solutions(const std::vector<EvaluatedSolution>& pop) {
    std::vector<Solution> out;
    out.reserve(pop.size());
    for (const auto& e : pop) out.push_back(e.solution);
    return out;
}

Solution random_solution(const ScenarioInstance& inst, Rng& rng) {
    const std::size_t z = std::size_t(inst.num_sites());
    Solution sol;
    sol.select = repair(std::vector<std::uint8_t>(z, 0), inst.k, rng);
    sol.pan.resize(z);
    sol.tilt.resize(z);
    for (std::size_t j = 0; j < z; ++j) sol.pan[j] = rng.uniform(kPanMin, kPanMax);
    for (std::size_t j = 0; j < z; ++j) sol.tilt[j] = rng.uniform(kTiltMin, kTiltMax);
    return sol;
}

void run_random_search(const ScenarioInstance& inst, const RunConfig& cfg,
                       const CachedEvaluator& eval, EvalCounter& counter, Archive& archive,
                       std::vector<TracePoint>& trace) {
    Rng rng = Rng(cfg.seed).child("random-search");
    while (!counter.exhausted())
        evaluate_into(eval, random_solution(inst, rng), counter, archive, trace);
}

void run_ga_only(const RunConfig& cfg, const CachedEvaluator& eval, EvalCounter& counter,
                 Archive& archive, std::vector<TracePoint>& trace) {
    Rng ga_rng = Rng(cfg.seed).child("ga");
    while (!counter.exhausted()) {
        auto parents = archive.top(std::size_t(cfg.pop_size));
        GaConfig g = cfg.ga;
        g.pop_size = int(parents.size());
        auto offspring = ga_offspring(parents, g, ga_rng);
        for (auto& child : offspring) {
            if (counter.exhausted()) break;
            evaluate_into(eval, std::move(child), counter, archive, trace);
        }
    }
}

void run_rishm(const ScenarioInstance& inst, const RunConfig& cfg, const CachedEvaluator& eval,
               EvalCounter& counter, Archive& archive, RunResult& res) {
    const bool use_global_model = cfg.variant != Variant::RishmWoGlobal;
    const bool use_local_phase = cfg.variant != Variant::RishmWoLocal;

    Rng root(cfg.seed);
    Rng ga_rng = root.child("ga");
    Rng pairs_rng = root.child("ranker-pairs");
    Rng eda_rng = root.child("eda");
    Rng random_pick_rng = root.child("random-preselect");

    std::optional<RankModel> model;
    std::size_t buffer_start = archive.size();
    double best_at_fit = archive.best().fitness;
    if (use_global_model) {
        model.emplace(inst.num_sites(), cfg.ranker, root.child("ranker-model").next_u64());
        auto pairs = build_initial_pairs(archive.entries(), cfg.ranker, pairs_rng);
        model->fit(pairs);
        buffer_start = archive.size();
        best_at_fit = archive.best().fitness;
    }

    Phase phase = Phase::Global;
    int iteration = 0;
    while (!counter.exhausted()) {
        ++iteration;
        auto population = archive.top(std::size_t(cfg.pop_size));

        if (use_local_phase) {
            const double fd = fitness_diversity(archive, std::size_t(cfg.pop_size));
            if (fd < cfg.delta) {
                const Phase next = phase == Phase::Global ? Phase::Local : Phase::Global;
                res.phase_log.push_back({iteration, counter.used, phase, next});
                phase = next;
            }
        }

        if (phase == Phase::Global) {
            GaConfig g = cfg.ga;
            g.pop_size = int(population.size());
            auto offspring = ga_offspring(population, g, ga_rng);
            const int tau = std::min<int>(cfg.ranker.preselect_count, int(offspring.size()));

            std::vector<Solution> chosen;
            if (use_global_model) {
                chosen = vote_preselect(*model, population_solutions(population), offspring, tau);
            } else {
                auto picks =
                    random_pick_rng.sample_without_replacement(offspring.size(), std::size_t(tau));
                for (std::size_t i : picks) chosen.push_back(std::move(offspring[i]));
            }
            for (auto& sol : chosen) {
                if (counter.exhausted()) break;
                evaluate_into(eval, std::move(sol), counter, archive, res.trace);
            }

            if (use_global_model) {
                const std::size_t new_count = archive.size() - buffer_start;
                const bool best_improved = archive.best().fitness < best_at_fit;
                if (maybe_update(*model, archive.entries(), new_count, best_improved, cfg.ranker,
                                 pairs_rng)) {
                    res.update_log.push_back({iteration, counter.used});
                    buffer_start = archive.size();
                    best_at_fit = archive.best().fitness;
                }
            }
        } else {
            const int nb = std::clamp<int>(int(cfg.eda_best_fraction * cfg.pop_size), 1,
                                           int(archive.size()));
            auto eda = fit_eda(archive.entries(), nb);
            const int ns = std::max(2, int(cfg.eda_sample_factor * cfg.pop_size));
            auto candidates = sample_eda(eda, ns, inst.k, eda_rng);
            auto rbfn = fit_rbfn(archive.entries(), cfg.rbfn_count_factor * inst.dimension(),
                                 cfg.rbfn_ridge);
            auto picks = local_preselect(rbfn, candidates, population_solutions(population));
            picks.resize(std::size_t(std::min<int>(cfg.local_preselect_count, int(picks.size()))));
            for (auto& sol : picks) {
                if (counter.exhausted()) break;
                evaluate_into(eval, std::move(sol), counter, archive, res.trace);
            }
        }
    }
}

}

RunResult run(const ScenarioInstance& inst, const RunConfig& cfg) {
    inst.validate();
    cfg.validate(inst);

    RunResult res;
    res.instance_id = inst.id;
    res.variant = cfg.variant;
    res.seed = cfg.seed;
    res.max_fes = cfg.max_fes;
    res.config = cfg;

    CachedEvaluator eval(inst, cfg.threads);
    EvalCounter counter{0, cfg.max_fes};
    res.total_weight = eval.total_weight();

    Archive archive;
    switch (cfg.variant) {
        case Variant::RandomSearch:
            run_random_search(inst, cfg, eval, counter, archive, res.trace);
            break;
        case Variant::GaOnly:
            archive = initialize(inst, cfg, eval, counter, res.trace);
            run_ga_only(cfg, eval, counter, archive, res.trace);
            break;
        default:
            archive = initialize(inst, cfg, eval, counter, res.trace);
            run_rishm(inst, cfg, eval, counter, archive, res);
            break;
    }

    res.best = archive.best();
    res.fe_used = counter.used;
    res.best_coverage = 1.0 - res.best.fitness / res.total_weight;
    return res;
}

// ---------------------------------------------------------------------------
// Result serialization

namespace {

json config_to_json(const RunConfig& cfg) {
    return json{
        {"pop_size", cfg.pop_size},
        {"max_fes", cfg.max_fes},
        {"delta", cfg.delta},
        {"seed", cfg.seed},
        {"variant", to_string(cfg.variant)},
        {"threads", cfg.threads},
        {"ga",
         {{"crossover_prob", cfg.ga.crossover_prob},
          {"mutation_prob", cfg.ga.mutation_prob},
          {"tournament_size", cfg.ga.tournament_size},
          {"angle_sigma_fraction", cfg.ga.angle_sigma_fraction}}},
        {"ranker",
         {{"embed_size", cfg.ranker.embed_size},
          {"d_model", cfg.ranker.d_model},
          {"feedforward_dim", cfg.ranker.feedforward_dim},
          {"n_heads", cfg.ranker.n_heads},
          {"batch_size", cfg.ranker.batch_size},
          {"learning_rate", cfg.ranker.learning_rate},
          {"epochs_per_fit", cfg.ranker.epochs_per_fit},
          {"update_threshold", cfg.ranker.update_threshold},
          {"recent_window", cfg.ranker.recent_window},
          {"augmentation_factor", cfg.ranker.augmentation_factor},
          {"preselect_count", cfg.ranker.preselect_count}}},
        {"eda_best_fraction", cfg.eda_best_fraction},
        {"eda_sample_factor", cfg.eda_sample_factor},
        {"rbfn_count_factor", cfg.rbfn_count_factor},
        {"rbfn_ridge", cfg.rbfn_ridge},
        {"local_preselect_count", cfg.local_preselect_count},
        {"init_multiplier", cfg.init_multiplier},
    };
}

RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    cfg.pop_size = j.at("pop_size").get<int>();
    cfg.max_fes = j.at("max_fes").get<int>();
    cfg.delta = j.at("delta").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.variant = parse_variant(j.at("variant").get<std::string>());
    cfg.threads = j.at("threads").get<int>();
    const auto& g = j.at("ga");
    cfg.ga.crossover_prob = g.at("crossover_prob").get<double>();
    cfg.ga.mutation_prob = g.at("mutation_prob").get<double>();
    cfg.ga.tournament_size = g.at("tournament_size").get<int>();
    cfg.ga.angle_sigma_fraction = g.at("angle_sigma_fraction").get<double>();
    const auto& r = j.at("ranker");
    cfg.ranker.embed_size = r.at("embed_size").get<int>();
    cfg.ranker.d_model = r.at("d_model").get<int>();
    cfg.ranker.feedforward_dim = r.at("feedforward_dim").get<int>();
    cfg.ranker.n_heads = r.at("n_heads").get<int>();
    cfg.ranker.batch_size = r.at("batch_size").get<int>();
    cfg.ranker.learning_rate = r.at("learning_rate").get<double>();
    cfg.ranker.epochs_per_fit = r.at("epochs_per_fit").get<int>();
    cfg.ranker.update_threshold = r.at("update_threshold").get<int>();
    cfg.ranker.recent_window = r.at("recent_window").get<int>();
    cfg.ranker.augmentation_factor = r.at("augmentation_factor").get<int>();
    cfg.ranker.preselect_count = r.at("preselect_count").get<int>();
    cfg.eda_best_fraction = j.at("eda_best_fraction").get<double>();
    cfg.eda_sample_factor = j.at("eda_sample_factor").get<double>();
    cfg.rbfn_count_factor = j.at("rbfn_count_factor").get<int>();
    cfg.rbfn_ridge = j.at("rbfn_ridge").get<double>();
    cfg.local_preselect_count = j.at("local_preselect_count").get<int>();
    cfg.init_multiplier = j.at("init_multiplier").get<int>();
    return cfg;
}

}

void save_result(const RunResult& result, const std::filesystem::path& path) {
    json doc;
    doc["format"] = "covopt-result";
    doc["version"] = 1;
    doc["app_version"] = kVersion;
    doc["instance_id"] = result.instance_id;
    doc["variant"] = to_string(result.variant);
    doc["seed"] = result.seed;
    doc["max_fes"] = result.max_fes;
    doc["fe_used"] = result.fe_used;
    doc["total_weight"] = result.total_weight;
    doc["config"] = config_to_json(result.config);

    const Solution& sol = result.best.solution;
    std::vector<double> flat;
    flat.reserve(3 * sol.num_sites());
    for (auto b : sol.select) flat.push_back(double(b));
    for (double v : sol.pan) flat.push_back(v);
    for (double v : sol.tilt) flat.push_back(v);
    doc["best"] = {{"fitness", result.best.fitness},
                   {"coverage_fraction", result.best_coverage},
                   {"residual_fraction",
                    result.total_weight > 0 ? result.best.fitness / result.total_weight : 0.0},
                   {"eval_index", result.best.eval_index},
                   {"solution", std::move(flat)}};

    json trace = json::array();
    for (const auto& t : result.trace) trace.push_back({t.fe, t.best_fitness});
    doc["trace"] = std::move(trace);

    json phases = json::array();
    for (const auto& p : result.phase_log)
        phases.push_back({{"iteration", p.iteration},
                          {"fe", p.fe},
                          {"from", to_string(p.from)},
                          {"to", to_string(p.to)}});
    doc["phase_log"] = std::move(phases);

    json updates = json::array();
    for (const auto& u : result.update_log)
        updates.push_back({{"iteration", u.iteration}, {"fe", u.fe}});
    doc["update_log"] = std::move(updates);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write result file: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("failed writing result file: " + path.string());
}

RunResult load_result(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open result file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("result file parse error: " + std::string(e.what()));
    }
    try {
        if (doc.at("format").get<std::string>() != "covopt-result")
            throw DataError("not a covopt result file: " + path.string());
        if (doc.at("version").get<int>() != 1)
            throw DataError("unsupported result file version");
        RunResult res;
        res.instance_id = doc.at("instance_id").get<std::string>();
        res.variant = parse_variant(doc.at("variant").get<std::string>());
        res.seed = doc.at("seed").get<std::uint64_t>();
        res.max_fes = doc.at("max_fes").get<int>();
        res.fe_used = doc.at("fe_used").get<int>();
        res.total_weight = doc.at("total_weight").get<double>();
        res.config = config_from_json(doc.at("config"));

        const auto& b = doc.at("best");
        res.best.fitness = b.at("fitness").get<double>();
        res.best.eval_index = b.at("eval_index").get<int>();
        res.best_coverage = b.at("coverage_fraction").get<double>();
        auto flat = b.at("solution").get<std::vector<double>>();
        if (flat.size() % 3 != 0) throw DataError("result file: malformed solution record");
        const std::size_t z = flat.size() / 3;
        res.best.solution.select.resize(z);
        res.best.solution.pan.resize(z);
        res.best.solution.tilt.resize(z);
        for (std::size_t j = 0; j < z; ++j) {
            res.best.solution.select[j] = flat[j] != 0.0 ? 1 : 0;
            res.best.solution.pan[j] = flat[z + j];
            res.best.solution.tilt[j] = flat[2 * z + j];
        }

        for (const auto& t : doc.at("trace"))
            res.trace.push_back({t.at(0).get<int>(), t.at(1).get<double>()});
        for (const auto& p : doc.at("phase_log"))
            res.phase_log.push_back({p.at("iteration").get<int>(), p.at("fe").get<int>(),
                                     p.at("from").get<std::string>() == "global" ? Phase::Global
                                                                                 : Phase::Local,
                                     p.at("to").get<std::string>() == "global" ? Phase::Global
                                                                               : Phase::Local});
        for (const auto& u : doc.at("update_log"))
            res.update_log.push_back({u.at("iteration").get<int>(), u.at("fe").get<int>()});
        return res;
    } catch (const json::exception& e) {
        throw DataError("result file structure error: " + std::string(e.what()));
    }
}

}

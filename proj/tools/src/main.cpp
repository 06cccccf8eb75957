// covopt command line: instance generation, optimization runs, result
// aggregation and ranker accuracy measurement.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "covopt/controller.hpp"
#include "covopt/errors.hpp"
#include "covopt/evaluator.hpp"
#include "covopt/ga.hpp"
#include "covopt/ranker.hpp"
#include "covopt/scenario.hpp"
#include "covopt/terrain.hpp"
#include "covopt/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace covopt;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitRuntime = 4;

fs::path default_out_dir() {
    const char* env = std::getenv("COVOPT_OUT_DIR");
    return (env && *env) ? fs::path(env) : fs::path(".");
}

void ensure_parent(const fs::path& file) {
    const fs::path dir = file.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
}

struct GenOptions {
    std::string scale;
    std::uint64_t seed = 1;
    std::string out;
    std::string grid_file;
    int grid_size = 256;
    double extent = 50.0;
    double roughness = 0.55;
    double max_height = 2.5;
};

int cmd_gen(const GenOptions& opt) {
    const Scale scale = parse_scale(opt.scale);

    DemGrid grid = [&] {
        if (!opt.grid_file.empty()) return load_grid_asc(opt.grid_file);
        const double cell = opt.extent / double(opt.grid_size - 1);
        const std::uint64_t terrain_seed = Rng(opt.seed).child("terrain").next_u64();
        return generate_terrain(terrain_seed, opt.grid_size, opt.grid_size, cell, opt.roughness,
                                opt.max_height);
    }();

    const ScenarioInstance inst = generate_instance(opt.seed, scale, grid);

    fs::path out = opt.out.empty()
                       ? default_out_dir() / ("instance-" + inst.id + ".json")
                       : fs::path(opt.out);
    ensure_parent(out);
    save_instance(inst, out);
    std::printf("wrote %s  (sites=%d targets=%d k=%d)\n", out.string().c_str(), inst.num_sites(),
                inst.num_targets(), inst.k);
    return 0;
}

struct RunOptions {
    std::string instance;
    std::string variant = "rishm";
    std::uint64_t seed = 1;
    int max_fes = 2000;
    int pop_size = 100;
    double delta = 0.2;
    int threads = 1;
    std::string out;
};

int cmd_run(const RunOptions& opt) {
    const ScenarioInstance inst = load_instance(opt.instance);

    RunConfig cfg;
    cfg.variant = parse_variant(opt.variant);
    cfg.seed = opt.seed;
    cfg.max_fes = opt.max_fes;
    cfg.pop_size = opt.pop_size;
    cfg.delta = opt.delta;
    cfg.threads = opt.threads;
    cfg.validate(inst);

    const RunResult res = run(inst, cfg);

    fs::path out = opt.out.empty()
                       ? default_out_dir() / ("result-" + inst.id + "-" + opt.variant + "-s" +
                                              std::to_string(opt.seed) + ".json")
                       : fs::path(opt.out);
    ensure_parent(out);
    save_result(res, out);
    std::printf("instance=%s variant=%s seed=%llu fe=%d best=%.10g coverage=%.6f -> %s\n",
                res.instance_id.c_str(), to_string(res.variant),
                (unsigned long long)res.seed, res.fe_used, res.best.fitness, res.best_coverage,
                out.string().c_str());
    return 0;
}

struct ReportOptions {
    std::vector<std::string> files;
    bool group = false;
    std::string csv;
};

int cmd_report(const ReportOptions& opt) {
    std::vector<RunResult> results;
    results.reserve(opt.files.size());
    for (const auto& f : opt.files) results.push_back(load_result(f));

    std::map<std::string, std::map<std::string, std::vector<const RunResult*>>> grouped;
    for (const auto& r : results) grouped[r.instance_id][to_string(r.variant)].push_back(&r);

    if (grouped.size() > 1 && !opt.group) {
        std::fprintf(stderr,
                     "error: result files span %zu instances; pass --group to aggregate per "
                     "instance\n",
                     grouped.size());
        return kExitUsage;
    }

    std::printf("# final best fitness per (instance, variant); std is population (divides by run "
                "count)\n");
    std::printf("%-24s %-18s %5s %14s %14s %14s\n", "instance", "variant", "runs", "avg_best",
                "std_best", "avg_coverage");
    for (const auto& [inst_id, variants] : grouped) {
        for (const auto& [variant, runs] : variants) {
            const double n = double(runs.size());
            double mean = 0, cov = 0;
            for (const auto* r : runs) {
                mean += r->best.fitness;
                cov += r->best_coverage;
            }
            mean /= n;
            cov /= n;
            double var = 0;
            for (const auto* r : runs) var += (r->best.fitness - mean) * (r->best.fitness - mean);
            const double stddev = std::sqrt(var / n);
            std::printf("%-24s %-18s %5zu %14.6g %14.6g %14.6g\n", inst_id.c_str(),
                        variant.c_str(), runs.size(), mean, stddev, cov);
        }
    }

    const fs::path csv_path =
        opt.csv.empty() ? default_out_dir() / "convergence.csv" : fs::path(opt.csv);
    ensure_parent(csv_path);
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw DataError("cannot write CSV file: " + csv_path.string());
    if (opt.group) {
        csv << "instance,variant,seed,fe,best_fitness\n";
        for (const auto& r : results)
            for (const auto& t : r.trace) {
                char line[160];
                std::snprintf(line, sizeof line, "%s,%s,%llu,%d,%.17g\n", r.instance_id.c_str(),
                              to_string(r.variant), (unsigned long long)r.seed, t.fe,
                              t.best_fitness);
                csv << line;
            }
    } else {
        csv << "variant,seed,fe,best_fitness\n";
        for (const auto& r : results)
            for (const auto& t : r.trace) {
                char line[128];
                std::snprintf(line, sizeof line, "%s,%llu,%d,%.17g\n", to_string(r.variant),
                              (unsigned long long)r.seed, t.fe, t.best_fitness);
                csv << line;
            }
    }
    if (!csv) throw DataError("failed writing CSV file: " + csv_path.string());
    std::printf("convergence CSV -> %s\n", csv_path.string().c_str());
    return 0;
}

struct AccuracyOptions {
    std::string instance;
    std::uint64_t seed = 1;
    int pop_size = 100;
    int threads = 1;
    std::string out;
};

int cmd_accuracy(const AccuracyOptions& opt) {
    const ScenarioInstance inst = load_instance(opt.instance);

    RunConfig cfg;
    cfg.seed = opt.seed;
    cfg.pop_size = opt.pop_size;
    cfg.threads = opt.threads;

    // Mirrors the optimizer's stream layout so the trained model state
    // matches the first fit of a real run with the same seed.
    const int init_n = cfg.initial_sample_count(inst);
    CachedEvaluator eval(inst, cfg.threads);
    EvalCounter counter{0, init_n + cfg.pop_size};
    std::vector<TracePoint> trace;
    Archive archive = initialize(inst, cfg, eval, counter, trace);

    Rng root(cfg.seed);
    Rng pairs_rng = root.child("ranker-pairs");
    RankModel model(inst.num_sites(), cfg.ranker, root.child("ranker-model").next_u64());
    model.fit(build_initial_pairs(archive.entries(), cfg.ranker, pairs_rng));

    Rng ga_rng = root.child("ga");
    auto population = archive.top(std::size_t(cfg.pop_size));
    GaConfig g = cfg.ga;
    g.pop_size = int(population.size());
    const auto offspring = ga_offspring(population, g, ga_rng);

    std::vector<double> truth;
    truth.reserve(offspring.size());
    for (const auto& sol : offspring) truth.push_back(eval.evaluate(sol, counter).fitness);
    const std::vector<double> scores = model.scores(offspring);

    long pairs = 0, correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = i + 1; j < truth.size(); ++j) {
            if (truth[i] == truth[j]) continue;
            ++pairs;
            const bool truly_better = truth[i] < truth[j];
            const bool predicted_better = scores[i] < scores[j];
            if (truly_better == predicted_better) ++correct;
        }
    const double pct = pairs > 0 ? 100.0 * double(correct) / double(pairs) : 0.0;

    std::printf("instance=%s seed=%llu offspring=%zu pairs=%ld correct=%ld accuracy=%.2f%%\n",
                inst.id.c_str(), (unsigned long long)opt.seed, offspring.size(), pairs, correct,
                pct);

    if (!opt.out.empty()) {
        const fs::path out(opt.out);
        ensure_parent(out);
        json doc{{"format", "covopt-accuracy"}, {"version", 1},
                 {"app_version", kVersion},     {"instance_id", inst.id},
                 {"seed", opt.seed},            {"offspring", offspring.size()},
                 {"pairs", pairs},              {"correct", correct},
                 {"accuracy_percent", pct}};
        std::ofstream f(out, std::ios::binary);
        if (!f) throw DataError("cannot write accuracy file: " + out.string());
        f << doc.dump(2) << '\n';
    }
    return 0;
}

}

int main(int argc, char** argv) {
    CLI::App app{"Directional sensor coverage optimization toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GenOptions gen;
    auto* cgen = app.add_subcommand("gen", "Generate a benchmark instance");
    cgen->add_option("--scale", gen.scale, "Instance scale")
        ->required()
        ->check(CLI::IsMember({"small", "medium", "large"}));
    cgen->add_option("--seed", gen.seed, "Generation seed");
    cgen->add_option("--out", gen.out, "Output instance file");
    cgen->add_option("--grid", gen.grid_file, "Import terrain from an ESRI ASCII grid")
        ->check(CLI::ExistingFile);
    cgen->add_option("--grid-size", gen.grid_size, "Synthetic terrain grid rows/cols")
        ->check(CLI::Range(3, 10000));
    cgen->add_option("--extent", gen.extent, "Terrain extent in km")
        ->check(CLI::PositiveNumber);
    cgen->add_option("--roughness", gen.roughness, "Fractal roughness in (0,1]")
        ->check(CLI::Range(1e-6, 1.0));
    cgen->add_option("--max-height", gen.max_height, "Maximum elevation in km")
        ->check(CLI::PositiveNumber);

    RunOptions runo;
    auto* crun = app.add_subcommand("run", "Run an optimization variant");
    crun->add_option("--instance", runo.instance, "Instance file")
        ->required()
        ->check(CLI::ExistingFile);
    crun->add_option("--variant", runo.variant, "Algorithm variant")
        ->check(CLI::IsMember(
            {"rishm", "rishm_wo_global", "rishm_wo_local", "ga_only", "random_search"}));
    crun->add_option("--seed", runo.seed, "Run seed");
    crun->add_option("--max-fes", runo.max_fes, "True evaluation budget")
        ->check(CLI::PositiveNumber);
    crun->add_option("--pop-size", runo.pop_size, "Population size")->check(CLI::Range(2, 100000));
    crun->add_option("--delta", runo.delta, "Fitness-diversity switch threshold")
        ->check(CLI::Range(0.0, 1.0));
    crun->add_option("--threads", runo.threads, "Evaluator threads")->check(CLI::PositiveNumber);
    crun->add_option("--out", runo.out, "Output result file");

    ReportOptions rep;
    auto* crep = app.add_subcommand("report", "Aggregate result files");
    crep->add_option("files", rep.files, "Result files")
        ->required()
        ->check(CLI::ExistingFile);
    crep->add_flag("--group", rep.group, "Allow and aggregate multiple instances");
    crep->add_option("--csv", rep.csv, "Convergence CSV output path");

    AccuracyOptions acc;
    auto* cacc = app.add_subcommand("accuracy", "Held-out pairwise ranking accuracy");
    cacc->add_option("--instance", acc.instance, "Instance file")
        ->required()
        ->check(CLI::ExistingFile);
    cacc->add_option("--seed", acc.seed, "Seed");
    cacc->add_option("--pop-size", acc.pop_size, "Population size")->check(CLI::Range(2, 100000));
    cacc->add_option("--threads", acc.threads, "Evaluator threads")->check(CLI::PositiveNumber);
    cacc->add_option("--out", acc.out, "Optional JSON report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (app.got_subcommand(cgen)) return cmd_gen(gen);
        if (app.got_subcommand(crun)) return cmd_run(runo);
        if (app.got_subcommand(crep)) return cmd_report(rep);
        if (app.got_subcommand(cacc)) return cmd_accuracy(acc);
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}

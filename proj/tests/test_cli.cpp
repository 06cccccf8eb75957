#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "covopt/controller.hpp"
#include "covopt/scenario.hpp"
#include "support/toys.hpp"

#ifndef COVOPT_CLI_PATH
#error "COVOPT_CLI_PATH must point at the command line binary"
#endif

namespace fs = std::filesystem;
using namespace covopt;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path()
              / ("covopt-cli-" + std::to_string(::getpid()) + "-"
                 + std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    fs::path operator/(const std::string& name) const { return dir / name; }
    static int& counter() {
        static int n = 0;
        return n;
    }
};

int run_cli(const std::string& args, const fs::path& stdout_to = {}) {
    std::string cmd = std::string(COVOPT_CLI_PATH) + " " + args;
    if (!stdout_to.empty()) cmd += " > " + stdout_to.string();
    cmd += " 2> /dev/null";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path write_tiny_instance(const Scratch& tmp, int sites = 4) {
    auto inst = toys::tiny_instance(sites);
    auto path = tmp / "tiny.json";
    save_instance(inst, path);
    return path;
}

RunResult stub_result(const std::string& instance_id, const std::string& variant,
                      std::uint64_t seed, double best_fitness, int trace_len) {
    RunResult r;
    r.instance_id = instance_id;
    r.variant = parse_variant(variant);
    r.seed = seed;
    r.max_fes = trace_len;
    r.fe_used = trace_len;
    r.total_weight = 40.0;
    r.best.solution.select = {1, 0};
    r.best.solution.pan = {0.0, 0.0};
    r.best.solution.tilt = {0.0, 0.0};
    r.best.fitness = best_fitness;
    r.best.eval_index = trace_len - 1;
    r.best_coverage = 1.0 - best_fitness / r.total_weight;
    for (int i = 0; i < trace_len; ++i)
        r.trace.push_back({i + 1, best_fitness + double(trace_len - 1 - i)});
    return r;
}

}

TEST_CASE("cli: version and usage errors") {
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("") != 0);
    CHECK(run_cli("gen --scale galactic") == 2);
    CHECK(run_cli("run") == 2);
    CHECK(run_cli("frobnicate") != 0);
}

TEST_CASE("cli: gen produces the documented instance, byte-stable") {
    Scratch tmp;
    auto out = tmp / "inst.json";
    CHECK(run_cli("gen --scale small --seed 7 --out " + out.string()) == 0);
    auto inst = load_instance(out);
    CHECK(inst.id == "small-7");
    CHECK(inst.num_sites() == 25);
    CHECK(inst.num_targets() == 300);
    CHECK(inst.k == 10);

    auto out2 = tmp / "inst2.json";
    CHECK(run_cli("gen --scale small --seed 7 --out " + out2.string()) == 0);
    CHECK(slurp(out) == slurp(out2));

    auto out3 = tmp / "inst3.json";
    CHECK(run_cli("gen --scale small --seed 8 --out " + out3.string()) == 0);
    CHECK(slurp(out) != slurp(out3));
}

TEST_CASE("cli: gen honours the output directory environment variable") {
    Scratch tmp;
    std::string cmd = "COVOPT_OUT_DIR=" + tmp.dir.string() + " " + COVOPT_CLI_PATH
                      + " gen --scale small --seed 3 > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    CHECK(WEXITSTATUS(rc) == 0);
    CHECK(fs::exists(tmp / "instance-small-3.json"));
}

TEST_CASE("cli: run executes a variant and writes a loadable result") {
    Scratch tmp;
    auto inst_path = write_tiny_instance(tmp);
    auto out = tmp / "result.json";
    CHECK(run_cli("run --instance " + inst_path.string()
                  + " --variant ga_only --seed 4 --max-fes 40 --out " + out.string())
          == 0);
    auto res = load_result(out);
    CHECK(res.variant == Variant::GaOnly);
    CHECK(res.seed == 4);
    CHECK(res.fe_used == 40);
    CHECK(int(res.trace.size()) == 40);
    CHECK(res.instance_id == "tiny");

    // byte-identical on repetition
    auto out2 = tmp / "result2.json";
    CHECK(run_cli("run --instance " + inst_path.string()
                  + " --variant ga_only --seed 4 --max-fes 40 --out " + out2.string())
          == 0);
    CHECK(slurp(out) == slurp(out2));
}

TEST_CASE("cli: run rejects garbage instances and unknown variants") {
    Scratch tmp;
    auto bad = tmp / "bad.json";
    std::ofstream(bad) << "{\"hello\": 42}";
    CHECK(run_cli("run --instance " + bad.string() + " --max-fes 40") == 3);

    auto inst_path = write_tiny_instance(tmp);
    CHECK(run_cli("run --instance " + inst_path.string() + " --variant hillclimb") == 2);
    // budget below the initial design is a usage error
    CHECK(run_cli("run --instance " + inst_path.string() + " --variant rishm --max-fes 10") == 2);
}

TEST_CASE("cli: run covers the surrogate variants end to end") {
    Scratch tmp;
    auto inst_path = write_tiny_instance(tmp);
    auto out = tmp / "wo-local.json";
    CHECK(run_cli("run --instance " + inst_path.string()
                  + " --variant rishm_wo_local --seed 2 --max-fes 30 --out " + out.string())
          == 0);
    auto res = load_result(out);
    CHECK(res.variant == Variant::RishmWoLocal);
    CHECK(res.fe_used == 30);
    CHECK(res.phase_log.empty());
}

TEST_CASE("cli: report aggregates results and emits the convergence csv") {
    Scratch tmp;
    auto a = tmp / "a.json";
    auto b = tmp / "b.json";
    save_result(stub_result("toy-1", "rishm", 1, 10.0, 3), a);
    save_result(stub_result("toy-1", "rishm", 2, 20.0, 2), b);

    auto table = tmp / "table.txt";
    auto csv = tmp / "conv.csv";
    CHECK(run_cli("report " + a.string() + " " + b.string() + " --csv " + csv.string(), table)
          == 0);

    // find the data row and parse its numeric columns
    std::istringstream lines(slurp(table));
    std::string line;
    bool found = false;
    while (std::getline(lines, line)) {
        if (line.rfind("toy-1", 0) != 0) continue;
        std::istringstream fields(line);
        std::string instance, variant;
        int runs = 0;
        double avg = 0, stddev = 0, cov = 0;
        fields >> instance >> variant >> runs >> avg >> stddev >> cov;
        CHECK(variant == "rishm");
        CHECK(runs == 2);
        CHECK(avg == doctest::Approx(15.0));
        CHECK(stddev == doctest::Approx(5.0));
        CHECK(cov == doctest::Approx(1.0 - 15.0 / 40.0));
        found = true;
    }
    CHECK(found);

    std::istringstream csv_lines(slurp(csv));
    std::vector<std::string> rows;
    while (std::getline(csv_lines, line))
        if (!line.empty()) rows.push_back(line);
    REQUIRE(rows.size() == 6);  // header + 3 + 2 trace rows
    CHECK(rows[0] == "variant,seed,fe,best_fitness");
    CHECK(rows[1].rfind("rishm,1,1,", 0) == 0);
}

TEST_CASE("cli: report refuses mixed instances unless grouping is requested") {
    Scratch tmp;
    auto a = tmp / "a.json";
    auto b = tmp / "b.json";
    save_result(stub_result("toy-1", "rishm", 1, 10.0, 2), a);
    save_result(stub_result("toy-2", "rishm", 1, 12.0, 2), b);

    CHECK(run_cli("report " + a.string() + " " + b.string()) == 2);

    auto csv = tmp / "grouped.csv";
    CHECK(run_cli("report " + a.string() + " " + b.string() + " --group --csv " + csv.string())
          == 0);
    std::istringstream csv_lines(slurp(csv));
    std::string header;
    std::getline(csv_lines, header);
    CHECK(header == "instance,variant,seed,fe,best_fitness");
}

TEST_CASE("cli: accuracy reports held-out ranking performance") {
    Scratch tmp;
    auto inst_path = write_tiny_instance(tmp, 5);
    auto out = tmp / "acc.json";
    CHECK(run_cli("accuracy --instance " + inst_path.string()
                  + " --seed 6 --pop-size 30 --out " + out.string())
          == 0);
    auto doc = nlohmann::json::parse(slurp(out));
    CHECK(doc.at("format").get<std::string>() == "covopt-accuracy");
    CHECK(doc.at("instance_id").get<std::string>() == "tiny");
    CHECK(doc.at("offspring").get<int>() == 30);
    CHECK(doc.at("pairs").get<long>() > 0);
    double acc = doc.at("accuracy_percent").get<double>();
    CHECK(acc >= 0.0);
    CHECK(acc <= 100.0);
}

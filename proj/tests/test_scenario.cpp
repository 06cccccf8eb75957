#include <filesystem>
#include <fstream>
#include <set>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "covopt/errors.hpp"
#include "covopt/scenario.hpp"
#include "covopt/terrain.hpp"
#include "support/toys.hpp"

using namespace covopt;
namespace fs = std::filesystem;

namespace {

const DemGrid& test_grid() {
    static const DemGrid g = generate_terrain(5, 64, 64, 50.0 / 63.0, 0.55, 2.5);
    return g;
}

}

TEST_CASE("sensor params: defaults and validation") {
    SensorParams p;
    CHECK(p.beta_d == 1.0);
    CHECK(p.beta_p == 0.15);
    CHECK(p.beta_t == 0.15);
    CHECK(p.t_d == 25.0);
    CHECK(p.t_p == 40.0);
    CHECK(p.t_t == 40.0);
    CHECK_NOTHROW(p.validate());
    p.beta_d = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SensorParams{};
    p.t_p = 200.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = SensorParams{};
    p.t_t = 91.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("scale parsing round trip") {
    for (auto s : {Scale::Small, Scale::Medium, Scale::Large})
        CHECK(parse_scale(to_string(s)) == s);
    CHECK_THROWS_AS(parse_scale("tiny"), std::invalid_argument);
}

TEST_CASE("generate_instance: table dimensions per scale") {
    auto small = generate_instance(7, Scale::Small, test_grid());
    CHECK(small.num_sites() == 25);
    CHECK(small.num_targets() == 300);
    CHECK(small.k == 10);
    CHECK(small.dimension() == 75);
    CHECK(small.id == "small-7");

    auto medium = generate_instance(7, Scale::Medium, test_grid());
    CHECK(medium.num_sites() == 50);
    CHECK(medium.num_targets() == 867);
    CHECK(medium.dimension() == 150);

    auto large = generate_instance(7, Scale::Large, test_grid());
    CHECK(large.num_sites() == 100);
    CHECK(large.num_targets() == 1875);
    CHECK(large.dimension() == 300);
    CHECK(large.k == 10);
}

TEST_CASE("generate_instance: geometry and weights") {
    auto inst = generate_instance(3, Scale::Small, test_grid());
    CHECK_NOTHROW(inst.validate());

    for (const auto& s : inst.sites) {
        CHECK(inst.grid.contains(s.x, s.y));
        CHECK(s.z == doctest::Approx(inst.grid.elevation_at(s.x, s.y) + 0.01).epsilon(1e-12));
    }

    for (const auto& t : inst.targets) {
        CHECK(inst.grid.contains(t.position.x, t.position.y));
        CHECK(t.weight >= 1.0);
        CHECK(t.weight <= 5.0);
        // z is the layer altitude unless terrain pushes it up
        CHECK(t.position.z >= inst.grid.elevation_at(t.position.x, t.position.y) + 0.01 - 1e-12);
    }
    // three altitude layers present
    int at3 = 0, at10 = 0, at20 = 0;
    for (const auto& t : inst.targets) {
        if (t.position.z == 3.0) ++at3;
        if (t.position.z == 10.0) ++at10;
        if (t.position.z == 20.0) ++at20;
    }
    CHECK(at3 + at10 + at20 == 300);  // terrain maxes at 2.5 so no clamping here
    CHECK(at3 == 100);
    CHECK(at10 == 100);
    CHECK(at20 == 100);
}

TEST_CASE("generate_instance: deterministic in all arguments") {
    auto a = generate_instance(11, Scale::Small, test_grid());
    auto b = generate_instance(11, Scale::Small, test_grid());
    CHECK(a.sites == b.sites);
    CHECK(a.targets.size() == b.targets.size());
    for (std::size_t i = 0; i < a.targets.size(); ++i) {
        CHECK(a.targets[i].position == b.targets[i].position);
        CHECK(a.targets[i].weight == b.targets[i].weight);
    }
    auto c = generate_instance(12, Scale::Small, test_grid());
    CHECK_FALSE(a.sites == c.sites);
}

TEST_CASE("total_weight: hand cases") {
    auto inst = toys::tiny_instance(3, 3, 1);
    inst.targets[0].weight = 1.0;
    inst.targets[1].weight = 1.0;
    inst.targets[2].weight = 1.0;
    CHECK(total_weight(inst) == doctest::Approx(3.0).epsilon(1e-15));

    inst.targets.resize(2);
    inst.targets[0].weight = 1.0;
    inst.targets[1].weight = 2.5;
    CHECK(total_weight(inst) == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("instance file round trip is exact") {
    auto inst = generate_instance(19, Scale::Small, test_grid());
    const fs::path p = fs::temp_directory_path() / "covopt_inst.json";
    save_instance(inst, p);
    auto back = load_instance(p);
    CHECK(back.id == inst.id);
    CHECK(back.k == inst.k);
    CHECK(back.grid == inst.grid);
    CHECK(back.sites == inst.sites);
    CHECK(back.params == inst.params);
    REQUIRE(back.targets.size() == inst.targets.size());
    for (std::size_t i = 0; i < inst.targets.size(); ++i) {
        CHECK(back.targets[i].position == inst.targets[i].position);
        CHECK(back.targets[i].weight == inst.targets[i].weight);
    }
    fs::remove(p);
}

TEST_CASE("total_weight matches independent re-summation from the file") {
    auto inst = generate_instance(23, Scale::Small, test_grid());
    const fs::path p = fs::temp_directory_path() / "covopt_inst2.json";
    save_instance(inst, p);

    std::ifstream in(p);
    nlohmann::json doc;
    in >> doc;
    double sum = 0.0;
    for (const auto& t : doc.at("targets")) sum += t.at(3).get<double>();
    CHECK(total_weight(inst) == doctest::Approx(sum).epsilon(1e-12));
    fs::remove(p);
}

TEST_CASE("load_instance rejects garbage") {
    const fs::path p = fs::temp_directory_path() / "covopt_garbage.json";
    {
        std::ofstream f(p);
        f << "{not json";
    }
    CHECK_THROWS_AS(load_instance(p), DataError);
    {
        std::ofstream f(p);
        f << "{\"format\":\"something-else\",\"version\":1}";
    }
    CHECK_THROWS_AS(load_instance(p), DataError);
    CHECK_THROWS_AS(load_instance(fs::temp_directory_path() / "covopt_nofile.json"), DataError);
    fs::remove(p);
}

TEST_CASE("instance validation catches bad setups") {
    auto inst = toys::tiny_instance();
    inst.k = 0;
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
    inst = toys::tiny_instance();
    inst.k = inst.num_sites() + 1;
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
    inst = toys::tiny_instance();
    inst.targets.clear();
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
    inst = toys::tiny_instance();
    inst.sites[0].x = -100.0;
    CHECK_THROWS_AS(inst.validate(), std::invalid_argument);
}

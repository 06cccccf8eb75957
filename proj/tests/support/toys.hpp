// Small hand-built instances and random solution helpers shared by tests.
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "covopt/genome.hpp"
#include "covopt/rng.hpp"
#include "covopt/scenario.hpp"
#include "covopt/terrain.hpp"

namespace toys {

inline covopt::DemGrid flat_grid(int rows = 64, int cols = 64, double cell = 1.0,
                                 double elevation = 0.0) {
    return covopt::DemGrid(0.0, 0.0, cell, rows, cols,
                           std::vector<double>(std::size_t(rows) * std::size_t(cols), elevation));
}

/// Deterministic tiny instance on flat ground: sites on a line, targets on a
/// coarse lattice slightly above ground, unit-ish weights.
inline covopt::ScenarioInstance tiny_instance(int num_sites = 6, int num_targets = 8, int k = 2,
                                              std::string id = "tiny") {
    covopt::ScenarioInstance inst{flat_grid(), {}, {}, k, {}, std::move(id)};
    for (int j = 0; j < num_sites; ++j)
        inst.sites.push_back({3.0 + 6.0 * (j % 10), 12.0 + 7.0 * (j / 10) + 3.0 * (j % 3), 0.01});
    for (int i = 0; i < num_targets; ++i) {
        covopt::Target t;
        t.position = {8.0 + 6.0 * (i % 4), 12.0 + 9.0 * (i / 4), 1.0 + 0.5 * (i % 3)};
        t.weight = 1.0 + 0.25 * i;
        inst.targets.push_back(t);
    }
    inst.validate();
    return inst;
}

inline covopt::Solution random_valid_solution(const covopt::ScenarioInstance& inst,
                                              covopt::Rng& rng) {
    const std::size_t z = std::size_t(inst.num_sites());
    covopt::Solution s;
    s.select = covopt::repair(std::vector<std::uint8_t>(z, 0), inst.k, rng);
    s.pan.resize(z);
    s.tilt.resize(z);
    for (auto& v : s.pan) v = rng.uniform(covopt::kPanMin, covopt::kPanMax);
    for (auto& v : s.tilt) v = rng.uniform(covopt::kTiltMin, covopt::kTiltMax);
    return s;
}

/// Random rough-terrain toy instance for oracle comparisons.
inline covopt::ScenarioInstance random_toy_instance(covopt::Rng& rng, int max_sites = 4,
                                                    int max_targets = 5, int max_k = 2) {
    covopt::ScenarioInstance inst{covopt::generate_terrain(rng.next_u64(), 9, 9, 2.0, 0.7, 1.5),
                                  {}, {}, 1, {}, "toy"};
    const int z = 2 + int(rng.index(std::size_t(max_sites - 1)));
    const int q = 1 + int(rng.index(std::size_t(max_targets)));
    inst.k = 1 + int(rng.index(std::size_t(std::min(max_k, z))));

    const double span = inst.grid.cell_size() * double(inst.grid.cols() - 1);
    for (int j = 0; j < z; ++j) {
        covopt::Point3 p{rng.uniform(0.0, span), rng.uniform(0.0, span), 0.0};
        p.z = inst.grid.elevation_at(p.x, p.y) + rng.uniform(0.01, 1.0);
        inst.sites.push_back(p);
    }
    for (int i = 0; i < q; ++i) {
        covopt::Target t;
        t.position = {rng.uniform(0.0, span), rng.uniform(0.0, span), 0.0};
        t.position.z = inst.grid.elevation_at(t.position.x, t.position.y) + rng.uniform(0.0, 8.0);
        t.weight = rng.uniform(0.2, 5.0);
        inst.targets.push_back(t);
    }
    inst.validate();
    return inst;
}

}

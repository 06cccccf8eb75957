#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "covopt/terrain.hpp"

namespace covopt {

struct SensorParams {
    double beta_d = 1.0;
    double beta_p = 0.15;
    double beta_t = 0.15;
    double t_d = 25.0;  // km
    double t_p = 40.0;  // degrees
    double t_t = 40.0;  // degrees

    void validate() const;

    friend bool operator==(const SensorParams&, const SensorParams&) = default;
};

struct Target {
    Point3 position;
    double weight = 1.0;

    friend bool operator==(const Target&, const Target&) = default;
};

enum class Scale { Small, Medium, Large };

const char* to_string(Scale scale);
Scale parse_scale(const std::string& name);

/// One coverage problem: candidate sites on terrain, weighted aerial targets,
/// a deployment budget k, and the sensor model parameters.
struct ScenarioInstance {
    DemGrid grid;
    std::vector<Point3> sites;
    std::vector<Target> targets;
    int k = 10;
    SensorParams params;
    std::string id;

    int num_sites() const noexcept { return int(sites.size()); }
    int num_targets() const noexcept { return int(targets.size()); }
    /// One binary plus two continuous genes per site.
    int dimension() const noexcept { return 3 * num_sites(); }

    void validate() const;
};

/// Deterministic instance families: |Z|/|Q| = 25/300, 50/867, 100/1875 for
/// small/medium/large, k = 10.  Sites are uniform on the terrain plus a
/// 0.01 km mast; targets form near-uniform lattices on altitude layers at
/// 3, 10 and 20 km; weights follow a Gaussian bump (peak 5, base 1) around a
/// seed-chosen critical center with sigma 10 km.
ScenarioInstance generate_instance(std::uint64_t seed, Scale scale, const DemGrid& grid);

/// Sum of target weights, reduced with tree_sum for bit-stable totals.
double total_weight(const ScenarioInstance& inst);

/// Versioned self-describing JSON document; save followed by load reproduces
/// every numeric field bit-exactly.
void save_instance(const ScenarioInstance& inst, const std::filesystem::path& path);
ScenarioInstance load_instance(const std::filesystem::path& path);

}

#include "covopt/scenario.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "covopt/errors.hpp"
#include "covopt/reduce.hpp"
#include "covopt/rng.hpp"

namespace covopt {

using nlohmann::json;

namespace {

constexpr double kMastHeight = 0.01;     // km above terrain
constexpr double kWeightSigma = 10.0;    // km, spread of the critical bump
constexpr double kLayerAltitudes[] = {3.0, 10.0, 20.0};

struct ScaleSpec {
    int num_sites;
    int num_targets;
};

ScaleSpec scale_spec(Scale scale) {
    switch (scale) {
        case Scale::Small: return {25, 300};
        case Scale::Medium: return {50, 867};
        case Scale::Large: return {100, 1875};
    }
    throw std::invalid_argument("unknown scale");
}

}

void SensorParams::validate() const {
    if (!(beta_d > 0) || !(beta_p > 0) || !(beta_t > 0) || !(t_d > 0) || !(t_p > 0) || !(t_t > 0))
        throw std::invalid_argument("SensorParams: all parameters must be positive");
    if (t_p > 180.0) throw std::invalid_argument("SensorParams: t_p must be <= 180");
    if (t_t > 90.0) throw std::invalid_argument("SensorParams: t_t must be <= 90");
}

const char* to_string(Scale scale) {
    switch (scale) {
        case Scale::Small: return "small";
        case Scale::Medium: return "medium";
        case Scale::Large: return "large";
    }
    return "?";
}

Scale parse_scale(const std::string& name) {
    if (name == "small") return Scale::Small;
    if (name == "medium") return Scale::Medium;
    if (name == "large") return Scale::Large;
    throw std::invalid_argument("unknown scale '" + name + "' (expected small|medium|large)");
}

void ScenarioInstance::validate() const {
    params.validate();
    if (k <= 0 || k > num_sites())
        throw std::invalid_argument("instance: k must satisfy 0 < k <= |Z|");
    if (targets.empty()) throw std::invalid_argument("instance: needs at least one target");
    for (const auto& s : sites)
        if (!grid.contains(s.x, s.y))
            throw std::invalid_argument("instance: site footprint outside grid");
    for (const auto& t : targets) {
        if (!grid.contains(t.position.x, t.position.y))
            throw std::invalid_argument("instance: target footprint outside grid");
        if (!(t.weight >= 0) || !std::isfinite(t.weight))
            throw std::invalid_argument("instance: target weight must be finite and >= 0");
    }
}

ScenarioInstance generate_instance(std::uint64_t seed, Scale scale, const DemGrid& grid) {
    const ScaleSpec spec = scale_spec(scale);
    Rng base(seed);
    Rng site_rng = base.child("sites");
    Rng center_rng = base.child("critical-center");

    ScenarioInstance inst{grid, {}, {}, 10, SensorParams{},
                          std::string(to_string(scale)) + "-" + std::to_string(seed)};

    inst.sites.reserve(spec.num_sites);
    for (int i = 0; i < spec.num_sites; ++i) {
        double x = site_rng.uniform(grid.min_x(), grid.max_x());
        double y = site_rng.uniform(grid.min_y(), grid.max_y());
        inst.sites.push_back({x, y, grid.elevation_at(x, y) + kMastHeight});
    }

    const double cx = center_rng.uniform(grid.min_x(), grid.max_x());
    const double cy = center_rng.uniform(grid.min_y(), grid.max_y());

    const int per_layer = spec.num_targets / 3;
    const int remainder = spec.num_targets % 3;
    const double width = grid.max_x() - grid.min_x();
    const double height = grid.max_y() - grid.min_y();

    inst.targets.reserve(spec.num_targets);
    for (int layer = 0; layer < 3; ++layer) {
        const int count = per_layer + (layer < remainder ? 1 : 0);
        const int nx = int(std::ceil(std::sqrt(double(count))));
        const int ny = (count + nx - 1) / nx;
        int placed = 0;
        for (int iy = 0; iy < ny && placed < count; ++iy) {
            for (int ix = 0; ix < nx && placed < count; ++ix, ++placed) {
                double x = grid.min_x() + (ix + 0.5) * width / nx;
                double y = grid.min_y() + (iy + 0.5) * height / ny;
                // Clamp above terrain in case an imported grid pierces a layer.
                double z = std::max(kLayerAltitudes[layer], grid.elevation_at(x, y) + kMastHeight);
                double dx = x - cx, dy = y - cy;
                double w = 1.0 + 4.0 * std::exp(-(dx * dx + dy * dy) /
                                                (2.0 * kWeightSigma * kWeightSigma));
                inst.targets.push_back({{x, y, z}, w});
            }
        }
    }

    inst.validate();
    return inst;
}

double total_weight(const ScenarioInstance& inst) {
    std::vector<double> w;
    w.reserve(inst.targets.size());
    for (const auto& t : inst.targets) w.push_back(t.weight);
    return tree_sum(w);
}

void save_instance(const ScenarioInstance& inst, const std::filesystem::path& path) {
    inst.validate();
    json doc;
    doc["format"] = "covopt-instance";
    doc["version"] = 1;
    doc["id"] = inst.id;
    doc["k"] = inst.k;
    doc["params"] = {{"beta_d", inst.params.beta_d}, {"beta_p", inst.params.beta_p},
                     {"beta_t", inst.params.beta_t}, {"t_d", inst.params.t_d},
                     {"t_p", inst.params.t_p},       {"t_t", inst.params.t_t}};
    doc["grid"] = {{"origin_x", inst.grid.origin_x()},
                   {"origin_y", inst.grid.origin_y()},
                   {"cell_size", inst.grid.cell_size()},
                   {"rows", inst.grid.rows()},
                   {"cols", inst.grid.cols()},
                   {"elevation", inst.grid.elevation()}};
    json sites = json::array();
    for (const auto& s : inst.sites) sites.push_back({s.x, s.y, s.z});
    doc["sites"] = std::move(sites);
    json targets = json::array();
    for (const auto& t : inst.targets)
        targets.push_back({t.position.x, t.position.y, t.position.z, t.weight});
    doc["targets"] = std::move(targets);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write instance file: " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw DataError("failed writing instance file: " + path.string());
}

ScenarioInstance load_instance(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open instance file: " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("instance file parse error: " + std::string(e.what()));
    }
    try {
        if (doc.at("format").get<std::string>() != "covopt-instance")
            throw DataError("not a covopt instance file: " + path.string());
        if (doc.at("version").get<int>() != 1)
            throw DataError("unsupported instance file version");
        const auto& g = doc.at("grid");
        DemGrid grid(g.at("origin_x").get<double>(), g.at("origin_y").get<double>(),
                     g.at("cell_size").get<double>(), g.at("rows").get<int>(),
                     g.at("cols").get<int>(), g.at("elevation").get<std::vector<double>>());
        ScenarioInstance inst{std::move(grid), {}, {}, doc.at("k").get<int>(), SensorParams{},
                              doc.at("id").get<std::string>()};
        const auto& p = doc.at("params");
        inst.params.beta_d = p.at("beta_d").get<double>();
        inst.params.beta_p = p.at("beta_p").get<double>();
        inst.params.beta_t = p.at("beta_t").get<double>();
        inst.params.t_d = p.at("t_d").get<double>();
        inst.params.t_p = p.at("t_p").get<double>();
        inst.params.t_t = p.at("t_t").get<double>();
        for (const auto& s : doc.at("sites"))
            inst.sites.push_back({s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()});
        for (const auto& t : doc.at("targets"))
            inst.targets.push_back({{t.at(0).get<double>(), t.at(1).get<double>(),
                                     t.at(2).get<double>()},
                                    t.at(3).get<double>()});
        inst.validate();
        return inst;
    } catch (const json::exception& e) {
        throw DataError("instance file structure error: " + std::string(e.what()));
    } catch (const std::invalid_argument& e) {
        throw DataError("instance file invalid: " + std::string(e.what()));
    }
}

}

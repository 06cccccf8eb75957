#include "covopt/evaluator.hpp"

#include <algorithm>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "covopt/errors.hpp"
#include "covopt/reduce.hpp"

namespace covopt {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kRadPerDeg = std::numbers::pi / 180.0;

/// Runs fn(begin, end) over [0, n) split into contiguous chunks.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        std::size_t begin = n * w / workers;
        std::size_t end = n * (w + 1) / workers;
        pool.emplace_back(fn, begin, end);
    }
    for (auto& t : pool) t.join();
}

/// Membership product for one sensor pose and target, with visibility known.
double pose_probability(const Point3& s, double pan_deg, double tilt_deg, const Target& q,
                        const SensorParams& p) {
    const double dx = q.position.x - s.x;
    const double dy = q.position.y - s.y;
    const double dz = q.position.z - s.z;
    const double horiz = std::sqrt(dx * dx + dy * dy);
    const double dist = std::sqrt(dx * dx + dy * dy + dz * dz);

    double alpha_p, alpha_t;
    if (horiz == 0.0) {
        alpha_p = 0.0;
        double sign = dz > 0.0 ? 1.0 : (dz < 0.0 ? -1.0 : 0.0);
        alpha_t = sign * 90.0 - tilt_deg;
    } else {
        const double heading = pan_deg * kRadPerDeg;
        double cosv = (std::cos(heading) * dx + std::sin(heading) * dy) / horiz;
        cosv = std::clamp(cosv, -1.0, 1.0);
        alpha_p = std::acos(cosv) * kDegPerRad;
        alpha_t = std::atan(dz / horiz) * kDegPerRad - tilt_deg;
    }
    return mu_distance(dist, p) * mu_pan(alpha_p, p) * mu_tilt(alpha_t, p);
}

void check_angles(double pan_deg, double tilt_deg) {
    if (!(pan_deg >= kPanMin && pan_deg <= kPanMax))
        throw std::invalid_argument("sense_probability: pan outside [-180, 180]");
    if (!(tilt_deg >= kTiltMin && tilt_deg <= kTiltMax))
        throw std::invalid_argument("sense_probability: tilt outside [-90, 90]");
}

std::vector<int> selected_sites(const Solution& sol) {
    std::vector<int> idx;
    idx.reserve(sol.selected_count());
    for (std::size_t j = 0; j < sol.select.size(); ++j)
        if (sol.select[j]) idx.push_back(int(j));
    return idx;
}

}

double mu_distance(double d, const SensorParams& p) {
    if (!(d >= 0.0)) throw std::invalid_argument("mu_distance: d must be >= 0");
    return logistic(-p.beta_d * (d - p.t_d));
}

double mu_pan(double alpha_p_deg, const SensorParams& p) {
    return logistic(p.beta_p * (alpha_p_deg + p.t_p)) - logistic(p.beta_p * (alpha_p_deg - p.t_p));
}

double mu_tilt(double alpha_t_deg, const SensorParams& p) {
    return logistic(p.beta_t * (alpha_t_deg + p.t_t)) - logistic(p.beta_t * (alpha_t_deg - p.t_t));
}

double sense_probability(const Point3& sensor_pos, double pan_deg, double tilt_deg,
                         const Target& q, const DemGrid& grid, const SensorParams& p) {
    check_angles(pan_deg, tilt_deg);
    if (!line_of_sight(grid, sensor_pos, q.position)) return 0.0;
    return pose_probability(sensor_pos, pan_deg, tilt_deg, q, p);
}

namespace {

ObjectiveValue evaluate_impl(const Solution& sol, const ScenarioInstance& inst,
                             EvalCounter& counter, int threads,
                             const std::vector<std::uint8_t>* visibility) {
    if (!is_valid(sol, inst.k))
        throw std::invalid_argument("evaluate: solution invalid for this instance");
    if (sol.num_sites() != std::size_t(inst.num_sites()))
        throw std::invalid_argument("evaluate: solution site count does not match instance");
    if (counter.exhausted()) throw BudgetExhausted(counter.budget);

    const auto sel = selected_sites(sol);
    const std::size_t nq = inst.targets.size();
    std::vector<double> contrib(nq);

    parallel_for(nq, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t qi = begin; qi < end; ++qi) {
            const Target& q = inst.targets[qi];
            double miss = 1.0;
            for (int site : sel) {
                bool vis = visibility
                               ? (*visibility)[std::size_t(site) * nq + qi] != 0
                               : line_of_sight(inst.grid, inst.sites[site], q.position);
                if (!vis) continue;  // P = 0 contributes factor 1
                double prob = pose_probability(inst.sites[site], sol.pan[site], sol.tilt[site],
                                               q, inst.params);
                miss *= 1.0 - prob;
            }
            contrib[qi] = q.weight * miss;
        }
    });

    ObjectiveValue out;
    out.fitness = tree_sum(contrib);
    out.coverage_fraction = 1.0 - out.fitness / total_weight(inst);
    ++counter.used;
    return out;
}

}

ObjectiveValue evaluate(const Solution& sol, const ScenarioInstance& inst, EvalCounter& counter,
                        int threads) {
    return evaluate_impl(sol, inst, counter, threads, nullptr);
}

CachedEvaluator::CachedEvaluator(const ScenarioInstance& inst, int threads)
    : inst_(&inst), threads_(threads), total_weight_(covopt::total_weight(inst)) {
    inst.validate();
    const std::size_t nz = inst.sites.size();
    const std::size_t nq = inst.targets.size();
    visible_.assign(nz * nq, 0);
    parallel_for(nz, threads_, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t qi = 0; qi < nq; ++qi)
                visible_[i * nq + qi] =
                    line_of_sight(inst.grid, inst.sites[i], inst.targets[qi].position) ? 1 : 0;
    });
}

bool CachedEvaluator::visible(int site, int target) const {
    return visible_[std::size_t(site) * inst_->targets.size() + target] != 0;
}

ObjectiveValue CachedEvaluator::evaluate(const Solution& sol, EvalCounter& counter) const {
    return evaluate_impl(sol, *inst_, counter, threads_, &visible_);
}

}

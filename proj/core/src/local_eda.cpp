#include "covopt/local_eda.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace covopt {

namespace {

std::vector<std::size_t> best_indices(std::span<const EvaluatedSolution> archive,
                                      std::size_t count) {
    std::vector<std::size_t> idx(archive.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return archive[a].fitness < archive[b].fitness;
    });
    idx.resize(count);
    return idx;
}

}

EdaModel fit_eda(std::span<const EvaluatedSolution> archive, int n_best) {
    if (n_best <= 0) throw std::invalid_argument("fit_eda: n_best must be positive");
    if (std::size_t(n_best) > archive.size())
        throw std::invalid_argument("fit_eda: archive smaller than n_best");

    const auto idx = best_indices(archive, std::size_t(n_best));
    const std::size_t z = archive[idx[0]].solution.num_sites();
    const std::size_t genes = 2 * z;

    double worst = archive[idx[0]].fitness;
    for (std::size_t i : idx) worst = std::max(worst, archive[i].fitness);

    EdaModel model;
    model.weights.reserve(idx.size());
    double fit_sum = 0.0;
    for (std::size_t i : idx) {
        double fit = worst - archive[i].fitness + 1e-12;
        model.weights.push_back(fit);
        fit_sum += fit;
    }
    for (double& w : model.weights) w /= fit_sum;

    model.mean.assign(genes, 0.0);
    model.stddev.assign(genes, 0.0);
    model.select_prob.assign(z, 0.0);

    auto gene = [&](const Solution& s, std::size_t j) {
        return j < z ? s.pan[j] : s.tilt[j - z];
    };

    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Solution& s = archive[idx[r]].solution;
        const double w = model.weights[r];
        for (std::size_t j = 0; j < genes; ++j) model.mean[j] += w * gene(s, j);
        for (std::size_t j = 0; j < z; ++j)
            if (s.select[j]) model.select_prob[j] += w;
    }
    // Spread uses the plain population variance around the weighted mean.
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const Solution& s = archive[idx[r]].solution;
        for (std::size_t j = 0; j < genes; ++j) {
            double d = gene(s, j) - model.mean[j];
            model.stddev[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < genes; ++j)
        model.stddev[j] = std::sqrt(model.stddev[j] / double(n_best));
    for (double& p : model.select_prob) p = std::clamp(p, 0.0, 1.0);
    return model;
}

std::vector<Solution> sample_eda(const EdaModel& model, int n_samples, int k, Rng& rng) {
    const std::size_t z = model.select_prob.size();
    if (k <= 0 || std::size_t(k) > z)
        throw std::invalid_argument("sample_eda: k outside [1, |Z|]");
    if (model.mean.size() != 2 * z || model.stddev.size() != 2 * z)
        throw std::invalid_argument("sample_eda: inconsistent model");

    std::vector<std::size_t> order(z);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return model.select_prob[a] > model.select_prob[b];
    });

    std::vector<Solution> out;
    out.reserve(std::size_t(n_samples));
    for (int s = 0; s < n_samples; ++s) {
        Solution sol;
        sol.select.assign(z, 0);
        sol.pan.resize(z);
        sol.tilt.resize(z);

        int ones = 0;
        while (ones < k) {
            int placed_this_pass = 0;
            for (std::size_t j : order) {
                if (ones >= k) break;
                if (sol.select[j]) continue;
                if (rng.uniform01() < model.select_prob[j]) {
                    sol.select[j] = 1;
                    ++ones;
                    ++placed_this_pass;
                }
            }
            if (ones < k && placed_this_pass == 0) {
                // Nothing fired this pass: force the best remaining gene.
                for (std::size_t j : order) {
                    if (!sol.select[j]) {
                        sol.select[j] = 1;
                        ++ones;
                        break;
                    }
                }
            }
        }

        for (std::size_t j = 0; j < z; ++j)
            sol.pan[j] = std::clamp(rng.normal(model.mean[j], model.stddev[j]), kPanMin, kPanMax);
        for (std::size_t j = 0; j < z; ++j)
            sol.tilt[j] = std::clamp(rng.normal(model.mean[z + j], model.stddev[z + j]),
                                     kTiltMin, kTiltMax);
        out.push_back(std::move(sol));
    }
    return out;
}

double RbfnModel::predict(const Solution& sol) const {
    const double denom = 2.0 * gamma * gamma;
    double acc = 0.0;
    for (std::size_t i = 0; i < centers.size(); ++i) {
        double d = gower_distance(sol, centers[i]);
        acc += weights[i] * std::exp(-d * d / denom);
    }
    return acc;
}

RbfnModel fit_rbfn(std::span<const EvaluatedSolution> archive, int count, double ridge) {
    if (archive.size() < 2) throw std::invalid_argument("fit_rbfn: need at least two entries");
    if (count < 1) throw std::invalid_argument("fit_rbfn: count must be positive");
    if (ridge < 0) throw std::invalid_argument("fit_rbfn: ridge must be >= 0");
    const std::size_t n = std::min<std::size_t>(count, archive.size());

    RbfnModel model;
    model.ridge = ridge;
    const auto idx = best_indices(archive, n);
    for (std::size_t i : idx) {
        model.centers.push_back(archive[i].solution);
        model.center_fitness.push_back(archive[i].fitness);
    }

    Eigen::MatrixXd dist(n, n);
    std::vector<double> pairwise;
    pairwise.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        dist(i, i) = 0.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = gower_distance(model.centers[i], model.centers[j]);
            dist(i, j) = dist(j, i) = d;
            pairwise.push_back(d);
        }
    }
    double gamma = 0.1;
    if (!pairwise.empty()) {
        std::sort(pairwise.begin(), pairwise.end());
        const std::size_t m = pairwise.size();
        double median = m % 2 ? pairwise[m / 2] : 0.5 * (pairwise[m / 2 - 1] + pairwise[m / 2]);
        if (median > 0.0) gamma = median;
    }
    model.gamma = gamma;

    Eigen::MatrixXd kernel =
        (-dist.array().square() / (2.0 * gamma * gamma)).exp().matrix();
    Eigen::VectorXd f(n);
    for (std::size_t i = 0; i < n; ++i) f[Eigen::Index(i)] = model.center_fitness[i];

    auto solve = [&](double lambda) {
        Eigen::MatrixXd a = kernel;
        a.diagonal().array() += lambda;
        Eigen::VectorXd w = a.ldlt().solve(f);
        double residual = (a * w - f).cwiseAbs().maxCoeff();
        bool ok = w.allFinite() && residual <= 1e-6 * (1.0 + f.cwiseAbs().maxCoeff());
        return std::make_pair(w, ok);
    };

    auto [w, ok] = solve(ridge);
    if (!ok) {
        std::tie(w, ok) = solve(ridge + 1e-8);
        model.fallback_regularized = true;
        model.ridge = ridge + 1e-8;
        if (!ok) throw std::runtime_error("fit_rbfn: system unsolvable even with fallback ridge");
    }
    model.weights.assign(w.data(), w.data() + w.size());
    return model;
}

namespace {

std::vector<Solution> preselect_impl(const std::function<double(const Solution&)>& predict,
                                     std::span<const Solution> candidates,
                                     std::span<const Solution> population) {
    if (candidates.size() < 2)
        throw std::invalid_argument("local_preselect: need at least two candidates");

    std::size_t exploit = 0;
    double best_pred = predict(candidates[0]);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        double p = predict(candidates[i]);
        if (p < best_pred) {
            best_pred = p;
            exploit = i;
        }
    }

    std::vector<double> uncertainty(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& p : population)
            nearest = std::min(nearest, normalized_euclidean(candidates[i], p));
        uncertainty[i] = population.empty() ? 0.0 : nearest;
    }

    // Most uncertain candidate, skipping the exploitation pick so a clash
    // automatically degrades to the second-most-uncertain.
    std::size_t explore = candidates.size();  // sentinel
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (i == exploit) continue;
        if (explore == candidates.size() || uncertainty[i] > uncertainty[explore]) explore = i;
    }

    return {candidates[exploit], candidates[explore]};
}

}

std::vector<Solution> local_preselect(const RbfnModel& rbfn, std::span<const Solution> candidates,
                                      std::span<const Solution> population) {
    return preselect_impl([&](const Solution& s) { return rbfn.predict(s); }, candidates,
                          population);
}

std::vector<Solution> local_preselect(const std::function<double(const Solution&)>& predict,
                                      std::span<const Solution> candidates,
                                      std::span<const Solution> population) {
    return preselect_impl(predict, candidates, population);
}

}

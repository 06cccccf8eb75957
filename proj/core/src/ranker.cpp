#include "covopt/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "covopt/errors.hpp"
#include "covopt/evaluator.hpp"

namespace covopt {

using MatF = Eigen::MatrixXf;
using VecF = Eigen::VectorXf;

void RankerConfig::validate() const {
    if (embed_size <= 0 || d_model <= 0 || feedforward_dim <= 0 || n_heads <= 0 ||
        batch_size <= 0 || epochs_per_fit <= 0 || update_threshold <= 0 || recent_window <= 0 ||
        augmentation_factor <= 0 || preselect_count <= 0)
        throw std::invalid_argument("RankerConfig: all counts must be positive");
    if (d_model % n_heads != 0)
        throw std::invalid_argument("RankerConfig: d_model must be divisible by n_heads");
    if (!(learning_rate > 0)) throw std::invalid_argument("RankerConfig: learning_rate must be > 0");
}

// ---------------------------------------------------------------------------
// PairDataset

PairDataset PairDataset::from_samples(std::vector<PairSample> samples) {
    PairDataset ds;
    for (auto& s : samples) {
        if (s.label != 0 && s.label != 1)
            throw std::invalid_argument("PairSample: label must be 0 or 1");
        std::uint32_t a = ds.add_solution(std::move(s.first));
        std::uint32_t b = ds.add_solution(std::move(s.second));
        ds.records_.push_back({a, b, std::uint8_t(s.label), 0, 0});
        ++ds.base_count_;
    }
    return ds;
}

std::uint32_t PairDataset::add_solution(Solution s) {
    pool_.push_back(std::move(s));
    return std::uint32_t(pool_.size() - 1);
}

void PairDataset::append_pair(std::uint32_t first_id, std::uint32_t second_id, int label,
                              int augment_copies, Rng& rng) {
    if (first_id >= pool_.size() || second_id >= pool_.size())
        throw std::invalid_argument("PairDataset: solution id out of range");
    if (label != 0 && label != 1)
        throw std::invalid_argument("PairDataset: label must be 0 or 1");
    records_.push_back({first_id, second_id, std::uint8_t(label), 0, 0});
    ++base_count_;
    for (int c = 0; c < augment_copies; ++c)
        records_.push_back({first_id, second_id, std::uint8_t(label), 1, rng.next_u64()});
}

std::size_t PairDataset::num_sites() const {
    return pool_.empty() ? 0 : pool_.front().num_sites();
}

PairSample PairDataset::sample(std::size_t i) const {
    const Record& r = records_.at(i);
    if (!r.augmented) return {pool_[r.first_id], pool_[r.second_id], r.label};
    Rng prng(r.perm_seed);
    auto pi = prng.permutation(pool_[r.first_id].num_sites());
    auto [a, b] = permute_pair(pool_[r.first_id], pool_[r.second_id], pi);
    return {std::move(a), std::move(b), r.label};
}

namespace {

void append_labeled(PairDataset& ds, std::uint32_t a, double fa, std::uint32_t b, double fb,
                    int copies, Rng& rng) {
    if (fa == fb) return;  // tie: superiority undefined
    ds.append_pair(a, b, fa < fb ? 0 : 1, copies, rng);
}

}

PairDataset build_initial_pairs(std::span<const EvaluatedSolution> archive,
                                const RankerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (archive.size() < 2)
        throw std::invalid_argument("build_initial_pairs: need at least two archive entries");
    PairDataset ds;
    std::vector<std::uint32_t> ids;
    ids.reserve(archive.size());
    for (const auto& e : archive) ids.push_back(ds.add_solution(e.solution));
    const int copies = cfg.augmentation_factor - 1;
    for (std::size_t i = 0; i < archive.size(); ++i)
        for (std::size_t j = 0; j < archive.size(); ++j)
            if (i != j)
                append_labeled(ds, ids[i], archive[i].fitness, ids[j], archive[j].fitness,
                               copies, rng);
    return ds;
}

PairDataset build_cross_pairs(std::span<const EvaluatedSolution> old_entries,
                              std::span<const EvaluatedSolution> new_entries,
                              const RankerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (old_entries.empty() || new_entries.empty())
        throw std::invalid_argument("build_cross_pairs: both sides must be non-empty");
    PairDataset ds;
    std::vector<std::uint32_t> old_ids, new_ids;
    for (const auto& e : old_entries) old_ids.push_back(ds.add_solution(e.solution));
    for (const auto& e : new_entries) new_ids.push_back(ds.add_solution(e.solution));
    const int copies = cfg.augmentation_factor - 1;
    for (std::size_t i = 0; i < old_entries.size(); ++i)
        for (std::size_t j = 0; j < new_entries.size(); ++j)
            append_labeled(ds, old_ids[i], old_entries[i].fitness, new_ids[j],
                           new_entries[j].fitness, copies, rng);
    return ds;
}

// ---------------------------------------------------------------------------
// RankModel

namespace {

struct Tensor {
    MatF w, m, v;  // parameter and first/second adaptive moments

    void init_shape(int rows, int cols) {
        w.setZero(rows, cols);
        m.setZero(rows, cols);
        v.setZero(rows, cols);
    }
    void reset_moments() {
        m.setZero();
        v.setZero();
    }
};

void fill_uniform(MatF& m, float lo, float hi, Rng& rng) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = float(rng.uniform(lo, hi));
}

void fill_normal(MatF& m, float stddev, Rng& rng) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = float(rng.normal(0.0, stddev));
}

void linear_init(Tensor& w, Tensor& b, int fan_in, Rng& rng) {
    const float bound = 1.0f / std::sqrt(float(fan_in));
    fill_uniform(w.w, -bound, bound, rng);
    fill_uniform(b.w, -bound, bound, rng);
}

constexpr float kBnEps = 1e-5f;
constexpr float kBnMomentum = 0.1f;
constexpr std::uint32_t kCheckpointMagic = 0x4b52'5643;  // "CVRK"
constexpr std::uint32_t kCheckpointVersion = 1;

}

struct RankModel::Impl {
    int num_sites = 0;
    RankerConfig cfg;
    std::uint64_t seed = 0;
    Rng rng{0};
    bool fitted = false;
    std::vector<double> epoch_losses;

    // Parameters, in serialization order.
    Tensor emb_w, emb_b;          // embed_size x 3 (select, pan, tilt)
    Tensor lift_w, lift_b;        // d x embed, d x 1
    Tensor q_w, q_b, k_w, k_b, v_w, v_b;  // d x d, d x 1
    Tensor o_w, o_b;              // d x d, d x 1
    Tensor fc1_w, fc1_b;          // ff x d, ff x 1
    Tensor bn_gamma, bn_beta;     // ff x 1
    Tensor fc2_w, fc2_b;          // 1 x ff, 1 x 1
    MatF bn_rmean, bn_rvar;       // ff x 1 running statistics
    long adam_step = 0;

    std::vector<Tensor*> tensors() {
        return {&emb_w, &emb_b, &lift_w, &lift_b, &q_w, &q_b, &k_w, &k_b, &v_w, &v_b,
                &o_w,   &o_b,   &fc1_w,  &fc1_b,  &bn_gamma, &bn_beta, &fc2_w, &fc2_b};
    }

    Impl(int sites, const RankerConfig& c, std::uint64_t sd) : num_sites(sites), cfg(c), seed(sd), rng(Rng(sd)) {
        cfg.validate();
        if (sites <= 0) throw std::invalid_argument("RankModel: num_sites must be positive");
        const int e = cfg.embed_size, d = cfg.d_model, ff = cfg.feedforward_dim;
        emb_w.init_shape(e, 3);
        emb_b.init_shape(e, 3);
        lift_w.init_shape(d, e);
        lift_b.init_shape(d, 1);
        for (Tensor* t : {&q_w, &k_w, &v_w, &o_w}) t->init_shape(d, d);
        for (Tensor* t : {&q_b, &k_b, &v_b, &o_b}) t->init_shape(d, 1);
        fc1_w.init_shape(ff, d);
        fc1_b.init_shape(ff, 1);
        bn_gamma.init_shape(ff, 1);
        bn_beta.init_shape(ff, 1);
        fc2_w.init_shape(1, ff);
        fc2_b.init_shape(1, 1);
        bn_rmean.setZero(ff, 1);
        bn_rvar.setOnes(ff, 1);

        Rng init = rng.child("init");
        // Multiplicative fusion wants embeddings centered near one.
        fill_normal(emb_w.w, 0.5f, init);
        emb_b.w.setOnes();
        linear_init(lift_w, lift_b, e, init);
        linear_init(q_w, q_b, d, init);
        linear_init(k_w, k_b, d, init);
        linear_init(v_w, v_b, d, init);
        linear_init(o_w, o_b, d, init);
        linear_init(fc1_w, fc1_b, d, init);
        bn_gamma.w.setOnes();
        bn_beta.w.setZero();
        linear_init(fc2_w, fc2_b, ff, init);
    }

    // -- forward ------------------------------------------------------------

    struct Forward {
        MatF xin;               // UZ x 3 raw inputs
        MatF eb, ep, et, e;     // UZ x embed
        MatF tok, q, k, v;      // UZ x d
        std::vector<MatF> probs;  // U*H attention maps, Z x Z
        MatF ctx, attn;         // UZ x d
        MatF pooled;            // U x d
        MatF h1, xhat, act;     // U x ff
        VecF mean, var;         // ff
        Eigen::VectorXf scores;  // U
        int count = 0;
    };

    void load_inputs(Forward& f, const std::function<const Solution&(std::size_t)>& sol,
                     std::size_t count) const {
        const int z = num_sites;
        f.count = int(count);
        f.xin.resize(Eigen::Index(count) * z, 3);
        for (std::size_t u = 0; u < count; ++u) {
            const Solution& s = sol(u);
            if (int(s.num_sites()) != z)
                throw std::invalid_argument("RankModel: solution site count mismatch");
            const Eigen::Index base = Eigen::Index(u) * z;
            for (int j = 0; j < z; ++j) {
                f.xin(base + j, 0) = float(s.select[j]);
                f.xin(base + j, 1) = float(s.pan[j] / kPanMax);
                f.xin(base + j, 2) = float(s.tilt[j] / kTiltMax);
            }
        }
    }

    /// training=true uses multiplicity-weighted batch statistics (weights w_u,
    /// total n) and updates running stats; inference uses the frozen ones.
    void forward(Forward& f, bool training, const std::vector<float>* mult) {
        const int z = num_sites, d = cfg.d_model, h = cfg.n_heads, dh = d / h;
        const int u_count = f.count;
        const Eigen::Index rows = Eigen::Index(u_count) * z;
        const float scale = 1.0f / std::sqrt(float(dh));

        f.eb.noalias() = f.xin.col(0) * emb_w.w.col(0).transpose();
        f.eb.rowwise() += emb_b.w.col(0).transpose();
        f.ep.noalias() = f.xin.col(1) * emb_w.w.col(1).transpose();
        f.ep.rowwise() += emb_b.w.col(1).transpose();
        f.et.noalias() = f.xin.col(2) * emb_w.w.col(2).transpose();
        f.et.rowwise() += emb_b.w.col(2).transpose();
        f.e = f.eb.cwiseProduct(f.ep).cwiseProduct(f.et);

        f.tok.noalias() = f.e * lift_w.w.transpose();
        f.tok.rowwise() += lift_b.w.col(0).transpose();
        f.q.noalias() = f.tok * q_w.w.transpose();
        f.q.rowwise() += q_b.w.col(0).transpose();
        f.k.noalias() = f.tok * k_w.w.transpose();
        f.k.rowwise() += k_b.w.col(0).transpose();
        f.v.noalias() = f.tok * v_w.w.transpose();
        f.v.rowwise() += v_b.w.col(0).transpose();

        f.ctx.resize(rows, d);
        f.probs.resize(std::size_t(u_count) * h);
        for (int u = 0; u < u_count; ++u) {
            const Eigen::Index r0 = Eigen::Index(u) * z;
            for (int hh = 0; hh < h; ++hh) {
                auto Q = f.q.block(r0, hh * dh, z, dh);
                auto K = f.k.block(r0, hh * dh, z, dh);
                auto V = f.v.block(r0, hh * dh, z, dh);
                MatF& P = f.probs[std::size_t(u) * h + hh];
                P.noalias() = Q * K.transpose();
                P *= scale;
                for (int r = 0; r < z; ++r) {
                    float mx = P.row(r).maxCoeff();
                    P.row(r) = (P.row(r).array() - mx).exp();
                    P.row(r) /= P.row(r).sum();
                }
                f.ctx.block(r0, hh * dh, z, dh).noalias() = P * V;
            }
        }
        f.attn.noalias() = f.ctx * o_w.w.transpose();
        f.attn.rowwise() += o_b.w.col(0).transpose();

        f.pooled.resize(u_count, d);
        for (int u = 0; u < u_count; ++u)
            f.pooled.row(u) = f.attn.middleRows(Eigen::Index(u) * z, z).colwise().mean();

        f.h1.noalias() = f.pooled * fc1_w.w.transpose();
        f.h1.rowwise() += fc1_b.w.col(0).transpose();

        const int ff = cfg.feedforward_dim;
        if (training) {
            float n = 0;
            for (float m : *mult) n += m;
            f.mean.setZero(ff);
            f.var.setZero(ff);
            for (int u = 0; u < u_count; ++u)
                f.mean += (*mult)[u] * f.h1.row(u).transpose();
            f.mean /= n;
            for (int u = 0; u < u_count; ++u)
                f.var += (*mult)[u] * (f.h1.row(u).transpose() - f.mean).array().square().matrix();
            f.var /= n;
            // PyTorch-style running stats: biased batch var normalizes
            // activations, unbiased feeds the running average.
            bn_rmean.col(0) = (1.0f - kBnMomentum) * bn_rmean.col(0) + kBnMomentum * f.mean;
            float unbias = n > 1.0f ? n / (n - 1.0f) : 1.0f;
            bn_rvar.col(0) = (1.0f - kBnMomentum) * bn_rvar.col(0) + kBnMomentum * unbias * f.var;
        } else {
            f.mean = bn_rmean.col(0);
            f.var = bn_rvar.col(0);
        }
        VecF inv_std = (f.var.array() + kBnEps).rsqrt().matrix();
        f.xhat = ((f.h1.rowwise() - f.mean.transpose()).array().rowwise() *
                  inv_std.transpose().array())
                     .matrix();
        MatF y = (f.xhat.array().rowwise() * bn_gamma.w.col(0).transpose().array()).matrix();
        y.rowwise() += bn_beta.w.col(0).transpose();
        f.act = y.cwiseMax(0.0f);

        f.scores.noalias() = f.act * fc2_w.w.transpose();
        f.scores.array() += fc2_b.w(0, 0);
    }

    // -- training -----------------------------------------------------------

    struct Grads {
        MatF emb_w, emb_b, lift_w, lift_b, q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
        MatF fc1_w, fc1_b, bn_gamma, bn_beta, fc2_w, fc2_b;

        std::vector<MatF*> list() {
            return {&emb_w, &emb_b, &lift_w, &lift_b, &q_w, &q_b, &k_w, &k_b, &v_w, &v_b,
                    &o_w,   &o_b,   &fc1_w,  &fc1_b,  &bn_gamma, &bn_beta, &fc2_w, &fc2_b};
        }
    };

    void backward(const Forward& f, const Eigen::VectorXf& gscore,
                  const std::vector<float>& mult, Grads& g) {
        const int z = num_sites, d = cfg.d_model, h = cfg.n_heads, dh = d / h;
        const int u_count = f.count;
        const float scale = 1.0f / std::sqrt(float(dh));
        float n = 0;
        for (float m : mult) n += m;

        // score head
        g.fc2_w.noalias() = gscore.transpose() * f.act;
        g.fc2_b(0, 0) = gscore.sum();
        MatF dact = gscore * fc2_w.w;  // U x ff

        // ReLU + batch norm (multiplicity-weighted backward)
        MatF y = (f.xhat.array().rowwise() * bn_gamma.w.col(0).transpose().array()).matrix();
        y.rowwise() += bn_beta.w.col(0).transpose();
        MatF dy = (y.array() > 0.0f).select(dact, MatF::Zero(dact.rows(), dact.cols()));

        VecF s1 = dy.colwise().sum().transpose();                       // ff
        VecF s2 = (dy.array() * f.xhat.array()).colwise().sum().transpose().matrix();
        g.bn_beta.col(0) = s1;
        g.bn_gamma.col(0) = s2;

        VecF inv_std = (f.var.array() + kBnEps).rsqrt().matrix();
        VecF coeff = (bn_gamma.w.col(0).array() * inv_std.array()).matrix();
        MatF dh1(u_count, cfg.feedforward_dim);
        for (int u = 0; u < u_count; ++u) {
            float mu_n = mult[u] / n;
            dh1.row(u) = (coeff.array() *
                          (dy.row(u).transpose().array() - mu_n * s1.array() -
                           f.xhat.row(u).transpose().array() * (mu_n * s2.array())))
                             .matrix()
                             .transpose();
        }

        g.fc1_w.noalias() = dh1.transpose() * f.pooled;
        g.fc1_b.col(0) = dh1.colwise().sum().transpose();
        MatF dpooled = dh1 * fc1_w.w;  // U x d

        const Eigen::Index rows = Eigen::Index(u_count) * z;
        MatF dattn(rows, d);
        const float inv_z = 1.0f / float(z);
        for (int u = 0; u < u_count; ++u)
            dattn.middleRows(Eigen::Index(u) * z, z) =
                (MatF::Ones(z, 1) * dpooled.row(u)) * inv_z;

        g.o_w.noalias() = dattn.transpose() * f.ctx;
        g.o_b.col(0) = dattn.colwise().sum().transpose();
        MatF dctx = dattn * o_w.w;

        MatF dq = MatF::Zero(rows, d), dk = MatF::Zero(rows, d), dv = MatF::Zero(rows, d);
        MatF dP(z, z), dS(z, z);
        for (int u = 0; u < u_count; ++u) {
            const Eigen::Index r0 = Eigen::Index(u) * z;
            for (int hh = 0; hh < h; ++hh) {
                const MatF& P = f.probs[std::size_t(u) * h + hh];
                auto dC = dctx.block(r0, hh * dh, z, dh);
                auto V = f.v.block(r0, hh * dh, z, dh);
                auto Q = f.q.block(r0, hh * dh, z, dh);
                auto K = f.k.block(r0, hh * dh, z, dh);
                dv.block(r0, hh * dh, z, dh).noalias() = P.transpose() * dC;
                dP.noalias() = dC * V.transpose();
                VecF rowdot = (dP.array() * P.array()).rowwise().sum().matrix();
                dS = (dP.colwise() - rowdot).cwiseProduct(P);
                dq.block(r0, hh * dh, z, dh).noalias() = (dS * K) * scale;
                dk.block(r0, hh * dh, z, dh).noalias() = (dS.transpose() * Q) * scale;
            }
        }

        g.q_w.noalias() = dq.transpose() * f.tok;
        g.q_b.col(0) = dq.colwise().sum().transpose();
        g.k_w.noalias() = dk.transpose() * f.tok;
        g.k_b.col(0) = dk.colwise().sum().transpose();
        g.v_w.noalias() = dv.transpose() * f.tok;
        g.v_b.col(0) = dv.colwise().sum().transpose();

        MatF dtok = dq * q_w.w;
        dtok.noalias() += dk * k_w.w;
        dtok.noalias() += dv * v_w.w;

        g.lift_w.noalias() = dtok.transpose() * f.e;
        g.lift_b.col(0) = dtok.colwise().sum().transpose();
        MatF de = dtok * lift_w.w;

        MatF deb = de.cwiseProduct(f.ep).cwiseProduct(f.et);
        MatF dep = de.cwiseProduct(f.eb).cwiseProduct(f.et);
        MatF det = de.cwiseProduct(f.eb).cwiseProduct(f.ep);
        g.emb_w.col(0).noalias() = deb.transpose() * f.xin.col(0);
        g.emb_w.col(1).noalias() = dep.transpose() * f.xin.col(1);
        g.emb_w.col(2).noalias() = det.transpose() * f.xin.col(2);
        g.emb_b.col(0) = deb.colwise().sum().transpose();
        g.emb_b.col(1) = dep.colwise().sum().transpose();
        g.emb_b.col(2) = det.colwise().sum().transpose();
    }

    void adam_step_update(Grads& g) {
        ++adam_step;
        const float lr = float(cfg.learning_rate);
        const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
        const float c1 = 1.0f - float(std::pow(0.9, double(adam_step)));
        const float c2 = 1.0f - float(std::pow(0.999, double(adam_step)));
        auto ts = tensors();
        auto gs = g.list();
        for (std::size_t i = 0; i < ts.size(); ++i) {
            Tensor& t = *ts[i];
            MatF& gr = *gs[i];
            t.m = b1 * t.m + (1.0f - b1) * gr;
            t.v = b2 * t.v + (1.0f - b2) * gr.cwiseProduct(gr);
            t.w.array() -=
                lr * (t.m.array() / c1) / ((t.v.array() / c2).sqrt() + eps);
        }
    }

    void fit(const PairDataset& pairs) {
        if (pairs.empty()) throw std::invalid_argument("RankModel::fit: empty pair set");
        if (int(pairs.num_sites()) != num_sites)
            throw std::invalid_argument("RankModel::fit: dataset site count mismatch");

        for (Tensor* t : tensors()) t->reset_moments();
        adam_step = 0;
        epoch_losses.assign(std::size_t(cfg.epochs_per_fit), 0.0);

        Rng shuffle_rng = rng.child("fit-shuffle");
        std::vector<std::size_t> order(pairs.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        std::vector<std::int32_t> slot_of(pairs.pool_size(), -1);
        std::vector<std::uint32_t> batch_ids;
        std::vector<float> mult;
        std::vector<std::pair<std::int32_t, std::int32_t>> batch_slots;
        Forward fwd;
        Grads grads;
        {
            auto ts = tensors();
            auto gs = grads.list();
            for (std::size_t i = 0; i < ts.size(); ++i)
                gs[i]->setZero(ts[i]->w.rows(), ts[i]->w.cols());
        }

        for (int epoch = 0; epoch < cfg.epochs_per_fit; ++epoch) {
            shuffle_rng.shuffle(order);
            double loss_sum = 0.0;
            std::size_t pos = 0;
            while (pos < order.size()) {
                const std::size_t bsz = std::min<std::size_t>(cfg.batch_size, order.size() - pos);

                batch_ids.clear();
                mult.clear();
                batch_slots.clear();
                for (std::size_t i = 0; i < bsz; ++i) {
                    const auto& rec = pairs.record(order[pos + i]);
                    for (std::uint32_t id : {rec.first_id, rec.second_id}) {
                        if (slot_of[id] < 0) {
                            slot_of[id] = std::int32_t(batch_ids.size());
                            batch_ids.push_back(id);
                            mult.push_back(0.0f);
                        }
                        mult[std::size_t(slot_of[id])] += 1.0f;
                    }
                    batch_slots.emplace_back(slot_of[pairs.record(order[pos + i]).first_id],
                                             slot_of[pairs.record(order[pos + i]).second_id]);
                }

                load_inputs(
                    fwd, [&](std::size_t u) -> const Solution& { return pairs.pooled(batch_ids[u]); },
                    batch_ids.size());
                forward(fwd, true, &mult);

                Eigen::VectorXd gscore = Eigen::VectorXd::Zero(batch_ids.size());
                const double inv_b = 1.0 / double(bsz);
                for (std::size_t i = 0; i < bsz; ++i) {
                    const auto& rec = pairs.record(order[pos + i]);
                    auto [sa, sb] = batch_slots[i];
                    const double d = double(fwd.scores[sa]) - double(fwd.scores[sb]);
                    const double yhat = logistic(d);
                    const double y = double(rec.label);
                    // BCE in a softplus form that is stable for large |d|.
                    const double sp = d > 0 ? d + std::log1p(std::exp(-d)) : std::log1p(std::exp(d));
                    loss_sum += y == 0.0 ? sp : sp - d;
                    const double gd = (yhat - y) * inv_b;
                    gscore[sa] += gd;
                    gscore[sb] -= gd;
                }

                backward(fwd, gscore.cast<float>(), mult, grads);
                adam_step_update(grads);

                for (std::uint32_t id : batch_ids) slot_of[id] = -1;
                pos += bsz;
            }
            epoch_losses[std::size_t(epoch)] = loss_sum / double(pairs.size());
        }
        fitted = true;
    }

    std::vector<double> infer(std::span<const Solution> sols) {
        if (!fitted)
            throw std::logic_error("RankModel: model must be fitted before scoring");
        std::vector<double> out;
        out.reserve(sols.size());
        Forward fwd;
        constexpr std::size_t kChunk = 256;
        for (std::size_t begin = 0; begin < sols.size(); begin += kChunk) {
            const std::size_t count = std::min(kChunk, sols.size() - begin);
            load_inputs(
                fwd, [&](std::size_t u) -> const Solution& { return sols[begin + u]; }, count);
            forward(fwd, false, nullptr);
            for (std::size_t u = 0; u < count; ++u) out.push_back(double(fwd.scores[Eigen::Index(u)]));
        }
        return out;
    }

    // -- serialization ------------------------------------------------------

    void save(std::ostream& out) const {
        auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
        auto put_i32 = [&](std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
        auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
        auto put_f64 = [&](double v) { out.write(reinterpret_cast<const char*>(&v), 8); };
        auto put_mat = [&](const MatF& m) {
            put_i32(std::int32_t(m.rows()));
            put_i32(std::int32_t(m.cols()));
            out.write(reinterpret_cast<const char*>(m.data()),
                      std::streamsize(sizeof(float)) * m.size());
        };
        put_u32(kCheckpointMagic);
        put_u32(kCheckpointVersion);
        put_i32(num_sites);
        put_i32(cfg.embed_size);
        put_i32(cfg.d_model);
        put_i32(cfg.feedforward_dim);
        put_i32(cfg.n_heads);
        put_i32(cfg.batch_size);
        put_f64(cfg.learning_rate);
        put_i32(cfg.epochs_per_fit);
        put_i32(cfg.update_threshold);
        put_i32(cfg.recent_window);
        put_i32(cfg.augmentation_factor);
        put_i32(cfg.preselect_count);
        put_u64(seed);
        put_u32(fitted ? 1 : 0);
        for (const Tensor* t : const_cast<Impl*>(this)->tensors()) put_mat(t->w);
        put_mat(bn_rmean);
        put_mat(bn_rvar);
        if (!out) throw DataError("RankModel::save: stream write failed");
    }

    static std::unique_ptr<Impl> load(std::istream& in) {
        auto get_u32 = [&] {
            std::uint32_t v;
            in.read(reinterpret_cast<char*>(&v), 4);
            return v;
        };
        auto get_i32 = [&] {
            std::int32_t v;
            in.read(reinterpret_cast<char*>(&v), 4);
            return v;
        };
        auto get_u64 = [&] {
            std::uint64_t v;
            in.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        auto get_f64 = [&] {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            return v;
        };
        if (get_u32() != kCheckpointMagic) throw DataError("model checkpoint: bad magic");
        if (get_u32() != kCheckpointVersion) throw DataError("model checkpoint: unsupported version");
        const int sites = get_i32();
        RankerConfig cfg;
        cfg.embed_size = get_i32();
        cfg.d_model = get_i32();
        cfg.feedforward_dim = get_i32();
        cfg.n_heads = get_i32();
        cfg.batch_size = get_i32();
        cfg.learning_rate = get_f64();
        cfg.epochs_per_fit = get_i32();
        cfg.update_threshold = get_i32();
        cfg.recent_window = get_i32();
        cfg.augmentation_factor = get_i32();
        cfg.preselect_count = get_i32();
        const std::uint64_t seed = get_u64();
        const bool fitted = get_u32() != 0;
        if (!in) throw DataError("model checkpoint: truncated header");

        auto impl = std::make_unique<Impl>(sites, cfg, seed);
        auto get_mat = [&](MatF& m) {
            const std::int32_t r = get_i32(), c = get_i32();
            if (r != m.rows() || c != m.cols())
                throw DataError("model checkpoint: tensor shape mismatch");
            in.read(reinterpret_cast<char*>(m.data()), std::streamsize(sizeof(float)) * m.size());
        };
        for (Tensor* t : impl->tensors()) get_mat(t->w);
        get_mat(impl->bn_rmean);
        get_mat(impl->bn_rvar);
        if (!in) throw DataError("model checkpoint: truncated tensor data");
        impl->fitted = fitted;
        return impl;
    }
};

RankModel::RankModel(int num_sites, const RankerConfig& cfg, std::uint64_t seed)
    : impl_(std::make_unique<Impl>(num_sites, cfg, seed)) {}
RankModel::RankModel(RankModel&&) noexcept = default;
RankModel& RankModel::operator=(RankModel&&) noexcept = default;
RankModel::~RankModel() = default;

int RankModel::num_sites() const { return impl_->num_sites; }
const RankerConfig& RankModel::config() const { return impl_->cfg; }
bool RankModel::fitted() const { return impl_->fitted; }
const std::vector<double>& RankModel::epoch_losses() const { return impl_->epoch_losses; }

void RankModel::fit(const PairDataset& pairs) { impl_->fit(pairs); }

double RankModel::score(const Solution& sol) const {
    return impl_->infer(std::span<const Solution>(&sol, 1)).front();
}

std::vector<double> RankModel::scores(std::span<const Solution> sols) const {
    return impl_->infer(sols);
}

void RankModel::save(std::ostream& out) const { impl_->save(out); }

void RankModel::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model checkpoint: " + path.string());
    impl_->save(out);
}

RankModel RankModel::load(std::istream& in) {
    RankModel model(1, RankerConfig{}, 0);
    model.impl_ = Impl::load(in);
    return model;
}

RankModel RankModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model checkpoint: " + path.string());
    return load(in);
}

double predict_pair(const RankModel& model, const Solution& a, const Solution& b) {
    const Solution sols[2] = {a, b};
    auto s = model.scores(std::span<const Solution>(sols, 2));
    return logistic(s[0] - s[1]);
}

std::vector<std::size_t> vote_preselect_indices(const std::vector<double>& parent_scores,
                                                const std::vector<double>& offspring_scores,
                                                int tau) {
    if (tau <= 0 || std::size_t(tau) > offspring_scores.size())
        throw std::invalid_argument("vote_preselect: tau outside [1, |offspring|]");
    std::vector<double> sums(offspring_scores.size(), 0.0);
    for (std::size_t o = 0; o < offspring_scores.size(); ++o)
        for (double ps : parent_scores) sums[o] += logistic(offspring_scores[o] - ps);
    std::vector<std::size_t> idx(offspring_scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return sums[a] < sums[b]; });
    idx.resize(std::size_t(tau));
    return idx;
}

namespace {

std::vector<Solution> gather(std::span<const Solution> offspring,
                             const std::vector<std::size_t>& idx) {
    std::vector<Solution> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(offspring[i]);
    return out;
}

}

std::vector<Solution> vote_preselect(const RankModel& model, std::span<const Solution> parents,
                                     std::span<const Solution> offspring, int tau) {
    auto ps = model.scores(parents);
    auto os = model.scores(offspring);
    return gather(offspring, vote_preselect_indices(ps, os, tau));
}

std::vector<Solution> vote_preselect(const std::function<double(const Solution&)>& score,
                                     std::span<const Solution> parents,
                                     std::span<const Solution> offspring, int tau) {
    std::vector<double> ps, os;
    ps.reserve(parents.size());
    os.reserve(offspring.size());
    for (const auto& p : parents) ps.push_back(score(p));
    for (const auto& o : offspring) os.push_back(score(o));
    return gather(offspring, vote_preselect_indices(ps, os, tau));
}

bool maybe_update(RankModel& model, std::span<const EvaluatedSolution> archive,
                  std::size_t new_count, bool best_improved, const RankerConfig& cfg, Rng& rng) {
    cfg.validate();
    if (new_count > archive.size())
        throw std::invalid_argument("maybe_update: new_count exceeds archive size");
    if (new_count < std::size_t(cfg.update_threshold) || !best_improved) return false;

    const std::size_t old_total = archive.size() - new_count;
    if (old_total == 0) return false;
    const std::size_t window = std::min<std::size_t>(cfg.recent_window, old_total);
    const std::size_t window_begin = old_total - window;
    const std::size_t pick = std::min<std::size_t>(cfg.update_threshold, window);

    auto chosen = rng.sample_without_replacement(window, pick);
    std::vector<EvaluatedSolution> old_entries;
    old_entries.reserve(pick);
    for (std::size_t c : chosen) old_entries.push_back(archive[window_begin + c]);

    auto ds = build_cross_pairs(old_entries, archive.subspan(old_total), cfg, rng);
    if (ds.empty()) return false;  // everything tied: nothing to learn from
    model.fit(ds);
    return true;
}

}

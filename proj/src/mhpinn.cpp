#include "stlpinn/mhpinn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "stlpinn/error.hpp"
#include "stlpinn/refsolvers.hpp"

namespace stlpinn {

namespace {

std::atomic<std::size_t> g_training_calls{0};

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
    return Eigen::Map<const RowMajor>(m.data(), static_cast<Eigen::Index>(m.rows()),
                                      static_cast<Eigen::Index>(m.cols()));
}

struct Coefficients {
    Eigen::MatrixXd A, B;
    std::vector<Eigen::MatrixXd> C;
};

Coefficients coefficients(const ProblemSpec& spec) {
    Coefficients c{to_eigen(spec.A), to_eigen(spec.B), {}};
    for (const auto& cj : spec.C) c.C.push_back(to_eigen(cj));
    return c;
}

PointBatch interior_batch(const CollocationSet& colloc) { return {colloc.interior, true}; }

PointBatch boundary_batch(const CollocationSet& colloc) {
    Eigen::MatrixXd pts(colloc.initial.rows(), colloc.initial.cols() + colloc.edges.cols());
    pts << colloc.initial, colloc.edges;
    return {std::move(pts), false};
}

// Loss of one head given shared features; optionally accumulates adjoint seeds and dL/dW.
LossBreakdown head_terms(const FeatureBatch& fi, const Eigen::MatrixXd& hi_aug,
                         const FeatureBatch& fb, const Eigen::MatrixXd& hb_aug,
                         const Eigen::MatrixXd& W, const Coefficients& coef,
                         const HeadTargets& tg, std::size_t n_ic, const LossConfig& cfg,
                         BatchAdjoint* seed_i, BatchAdjoint* seed_b, Eigen::MatrixXd* grad_w) {
    const Eigen::Index m = fi.h.rows();
    const double n1 = static_cast<double>(fi.h.cols());
    const double n2 = static_cast<double>(fb.h.cols());
    const auto w_top = W.topRows(m);

    LossBreakdown out;
    Eigen::MatrixXd r = coef.A * (W.transpose() * hi_aug) - tg.forcing;
    r.noalias() += coef.B * (w_top.transpose() * fi.dh[0]);
    for (std::size_t j = 0; j < coef.C.size(); ++j)
        r.noalias() += coef.C[j] * (w_top.transpose() * fi.dh[j + 1]);
    out.residual = cfg.omega1 / n1 * r.squaredNorm();

    const Eigen::MatrixXd d = W.transpose() * hb_aug - tg.boundary;
    const auto ic_cols = static_cast<Eigen::Index>(n_ic);
    out.ic = cfg.omega2 / n2 * d.leftCols(ic_cols).squaredNorm();
    out.bc = cfg.omega2 / n2 * d.rightCols(d.cols() - ic_cols).squaredNorm();
    out.total = out.residual + out.ic + out.bc;

    if (!grad_w) return out;
    const Eigen::MatrixXd g = (2.0 * cfg.omega1 / n1) * r;
    const Eigen::MatrixXd g_u = coef.A.transpose() * g;
    std::vector<Eigen::MatrixXd> g_ut;
    g_ut.push_back(coef.B.transpose() * g);
    for (const auto& cj : coef.C) g_ut.push_back(cj.transpose() * g);
    const Eigen::MatrixXd g_b = (2.0 * cfg.omega2 / n2) * d;

    grad_w->noalias() = hi_aug * g_u.transpose();
    grad_w->noalias() += hb_aug * g_b.transpose();
    for (std::size_t k = 0; k < g_ut.size(); ++k)
        grad_w->topRows(m).noalias() += fi.dh[k] * g_ut[k].transpose();

    seed_i->h.noalias() += w_top * g_u;
    for (std::size_t k = 0; k < g_ut.size(); ++k) seed_i->dh[k].noalias() += w_top * g_ut[k];
    seed_b->h.noalias() += w_top * g_b;
    return out;
}

void check_finite(const LossBreakdown& l) {
    if (!std::isfinite(l.total))
        throw Error(Errc::NonFiniteLoss, "loss evaluated to " + std::to_string(l.total));
}

void check_geometry(const std::vector<ProblemSpec>& specs) {
    const ProblemSpec& ref = specs.front();
    for (const auto& s : specs)
        if (s.n != ref.n || s.d != ref.d || s.T != ref.T || s.L != ref.L)
            throw Error(Errc::GeometryMismatch, "training heads must share n, d and the domain");
}

}  // namespace

ProblemSpec HeadConfig::problem() const { return linearize(instantiate(family, alpha, params)); }

double scheduled_lr(const TrainConfig& cfg, std::size_t epoch) {
    const std::size_t step = cfg.step_size == 0 ? 1 : cfg.step_size;
    return cfg.lr * std::pow(cfg.gamma, static_cast<double>(epoch / step));
}

CollocationSet sample_collocation(const ProblemSpec& domain, const LossConfig& cfg) {
    const double T = domain.T;
    CollocationSet set;
    std::mt19937_64 rng(cfg.sampling_seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool random = cfg.sampling == Sampling::Random;

    if (domain.is_ode()) {
        if (cfg.n1 == 0) throw Error(Errc::InvalidCounts, "N1 must be positive");
        if (cfg.n2 != 1) throw Error(Errc::InvalidCounts, "ODE problems use exactly one IC point");
        set.interior.resize(1, static_cast<Eigen::Index>(cfg.n1));
        if (random) {
            std::vector<double> ts(cfg.n1);
            for (auto& t : ts) t = T * unit(rng);
            std::sort(ts.begin(), ts.end());
            for (std::size_t i = 0; i < cfg.n1; ++i) set.interior(0, static_cast<Eigen::Index>(i)) = ts[i];
        } else if (cfg.n1 == 1) {
            set.interior(0, 0) = 0.5 * T;
        } else {
            const auto ts = linspace(0.0, T, cfg.n1);
            for (std::size_t i = 0; i < cfg.n1; ++i) set.interior(0, static_cast<Eigen::Index>(i)) = ts[i];
        }
        set.initial = Eigen::MatrixXd::Zero(1, 1);
        set.edges.resize(1, 0);
        return set;
    }

    if (domain.d != 1) throw Error(Errc::Unsupported, "only one spatial dimension is supported");
    if (cfg.ar_nt == 0 || cfg.ar_nx == 0 || cfg.ar_edge == 0 || cfg.ar_ic == 0)
        throw Error(Errc::InvalidCounts, "grid counts must be positive");
    const double L = domain.L.at(0);
    const auto nt = static_cast<Eigen::Index>(cfg.ar_nt), nx = static_cast<Eigen::Index>(cfg.ar_nx);
    set.interior.resize(2, nt * nx);
    if (random) {
        for (Eigen::Index p = 0; p < nt * nx; ++p) {
            set.interior(0, p) = T * unit(rng);
            set.interior(1, p) = L * unit(rng);
        }
    } else {
        const auto ts = linspace(0.0, T, cfg.ar_nt), xs = linspace(0.0, L, cfg.ar_nx);
        for (Eigen::Index i = 0; i < nt; ++i)
            for (Eigen::Index j = 0; j < nx; ++j) {
                set.interior(0, i * nx + j) = ts[static_cast<std::size_t>(i)];
                set.interior(1, i * nx + j) = xs[static_cast<std::size_t>(j)];
            }
    }
    const auto n_ic = static_cast<Eigen::Index>(cfg.ar_ic);
    const auto n_edge = static_cast<Eigen::Index>(cfg.ar_edge);
    set.initial.resize(2, n_ic);
    const auto xs = linspace(0.0, L, cfg.ar_ic);
    for (Eigen::Index i = 0; i < n_ic; ++i) {
        set.initial(0, i) = 0.0;
        set.initial(1, i) = random ? L * unit(rng) : xs[static_cast<std::size_t>(i)];
    }
    set.edges.resize(2, 2 * n_edge);
    const auto ts = linspace(0.0, T, cfg.ar_edge);
    for (Eigen::Index side = 0; side < 2; ++side)
        for (Eigen::Index i = 0; i < n_edge; ++i) {
            set.edges(0, side * n_edge + i) = random ? T * unit(rng) : ts[static_cast<std::size_t>(i)];
            set.edges(1, side * n_edge + i) = side == 0 ? 0.0 : L;
        }
    return set;
}

Eigen::MatrixXd augment(const Eigen::MatrixXd& h) {
    Eigen::MatrixXd out(h.rows() + 1, h.cols());
    out.topRows(h.rows()) = h;
    out.row(h.rows()).setOnes();
    return out;
}

Eigen::MatrixXd head_output(const BaseNetwork& net, const Eigen::MatrixXd& W,
                            const Eigen::MatrixXd& points) {
    const FeatureBatch fb = forward_batch(net, {points, false});
    if (W.rows() != fb.h.rows() + 1)
        throw Error(Errc::ShapeMismatch, "head weights must have m+1 rows");
    return W.transpose() * augment(fb.h);
}

HeadTargets head_targets(const ProblemSpec& spec, const CollocationSet& colloc) {
    const auto n = static_cast<Eigen::Index>(spec.n);
    HeadTargets tg;
    tg.forcing.resize(n, colloc.interior.cols());
    std::vector<double> x(static_cast<std::size_t>(colloc.interior.rows()));
    for (Eigen::Index p = 0; p < colloc.interior.cols(); ++p) {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = colloc.interior(static_cast<Eigen::Index>(k), p);
        const Vector f = spec.forcing(x);
        for (Eigen::Index c = 0; c < n; ++c) tg.forcing(c, p) = f[static_cast<std::size_t>(c)];
    }
    tg.boundary.resize(n, static_cast<Eigen::Index>(colloc.n2()));
    for (Eigen::Index p = 0; p < colloc.initial.cols(); ++p) {
        const Vector y = spec.is_ode()
                             ? spec.y0
                             : spec.ic(std::span<const double>(&colloc.initial(1, p), spec.d));
        for (Eigen::Index c = 0; c < n; ++c) tg.boundary(c, p) = y[static_cast<std::size_t>(c)];
    }
    const Eigen::Index off = colloc.initial.cols();
    for (Eigen::Index p = 0; p < colloc.edges.cols(); ++p) {
        for (std::size_t k = 0; k < x.size(); ++k) x[k] = colloc.edges(static_cast<Eigen::Index>(k), p);
        const Vector y = spec.bc(x);
        for (Eigen::Index c = 0; c < n; ++c) tg.boundary(c, off + p) = y[static_cast<std::size_t>(c)];
    }
    return tg;
}

LossBreakdown head_loss(const BaseNetwork& net, const Eigen::MatrixXd& W, const ProblemSpec& spec,
                        const CollocationSet& colloc, const LossConfig& cfg) {
    if (W.rows() != static_cast<Eigen::Index>(net.feature_dim() + 1) ||
        W.cols() != static_cast<Eigen::Index>(spec.n))
        throw Error(Errc::ShapeMismatch, "head weights must be (m+1) x n");
    const FeatureBatch fi = forward_batch(net, interior_batch(colloc));
    const FeatureBatch fb = forward_batch(net, boundary_batch(colloc));
    const LossBreakdown l = head_terms(fi, augment(fi.h), fb, augment(fb.h), W, coefficients(spec),
                                       head_targets(spec, colloc),
                                       static_cast<std::size_t>(colloc.initial.cols()), cfg,
                                       nullptr, nullptr, nullptr);
    check_finite(l);
    return l;
}

MultiHeadGradient multihead_gradient(const BaseNetwork& net, std::span<const Eigen::MatrixXd> heads,
                                     std::span<const ProblemSpec> specs,
                                     std::span<const HeadTargets> targets,
                                     const CollocationSet& colloc, const LossConfig& cfg) {
    if (heads.size() != specs.size() || heads.size() != targets.size())
        throw Error(Errc::ShapeMismatch, "heads, specs and targets differ in count");
    std::vector<Coefficients> coefs;
    for (const auto& s : specs) coefs.push_back(coefficients(s));
    const std::size_t n_ic = static_cast<std::size_t>(colloc.initial.cols());
    const std::vector<PointBatch> batches{interior_batch(colloc), boundary_batch(colloc)};

    MultiHeadGradient out;
    const LossGradient lg = loss_gradient(net, batches, [&](std::span<const FeatureBatch> fb) {
        const FeatureBatch& fi = fb[0];
        const FeatureBatch& fbd = fb[1];
        const Eigen::MatrixXd hi_aug = augment(fi.h), hb_aug = augment(fbd.h);
        BatchAdjoint seed_i{Eigen::MatrixXd::Zero(fi.h.rows(), fi.h.cols()), {}};
        for (const auto& d : fi.dh) seed_i.dh.push_back(Eigen::MatrixXd::Zero(d.rows(), d.cols()));
        BatchAdjoint seed_b{Eigen::MatrixXd::Zero(fbd.h.rows(), fbd.h.cols()), {}};
        LossValue value;
        for (std::size_t i = 0; i < heads.size(); ++i) {
            if (heads[i].rows() != fi.h.rows() + 1 ||
                heads[i].cols() != static_cast<Eigen::Index>(specs[i].n))
                throw Error(Errc::ShapeMismatch, "head weights must be (m+1) x n");
            Eigen::MatrixXd gw(heads[i].rows(), heads[i].cols());
            out.loss += head_terms(fi, hi_aug, fbd, hb_aug, heads[i], coefs[i], targets[i], n_ic,
                                   cfg, &seed_i, &seed_b, &gw);
            value.head_grads.push_back(std::move(gw));
        }
        value.loss = out.loss.total;
        value.seeds.push_back(std::move(seed_i));
        value.seeds.push_back(std::move(seed_b));
        return value;
    });
    out.grad = lg.grad;
    return out;
}

Checkpoint train(const std::vector<HeadConfig>& heads, const LossConfig& loss,
                 const TrainConfig& cfg) {
    ++g_training_calls;
    if (heads.empty()) throw Error(Errc::InvalidConfig, "at least one head is required");
    if (!(cfg.lr > 0.0)) throw Error(Errc::InvalidConfig, "learning rate must be positive");
    if (!(cfg.gamma > 0.0 && cfg.gamma <= 1.0))
        throw Error(Errc::InvalidConfig, "gamma must lie in (0, 1]");
    if (!(loss.omega1 > 0.0 && loss.omega2 > 0.0))
        throw Error(Errc::InvalidConfig, "loss weights must be positive");

    std::vector<ProblemSpec> specs;
    for (const auto& h : heads) specs.push_back(h.problem());
    check_geometry(specs);
    const ProblemSpec& ref = specs.front();
    if (cfg.widths.empty() || cfg.widths.front() != ref.d + 1)
        throw Error(Errc::GeometryMismatch, "network input width must be d + 1 = " +
                                                std::to_string(ref.d + 1));

    Checkpoint ck;
    ck.heads = heads;
    ck.loss = loss;
    ck.train = cfg;
    ck.net = BaseNetwork::init(cfg.widths, cfg.seed, InitScheme{cfg.init_gain});
    const auto rows = static_cast<Eigen::Index>(ck.net.feature_dim() + 1);
    const auto n = static_cast<Eigen::Index>(ref.n);
    std::mt19937_64 head_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
    const double bound = cfg.init_gain / std::sqrt(static_cast<double>(ck.net.feature_dim()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < heads.size(); ++i) {
        Eigen::MatrixXd w = Eigen::MatrixXd::Zero(rows, n);
        for (Eigen::Index r = 0; r + 1 < rows; ++r)
            for (Eigen::Index c = 0; c < n; ++c) w(r, c) = dist(head_rng);
        ck.head_weights.push_back(std::move(w));
    }
    if (cfg.epochs == 0) return ck;

    const CollocationSet colloc = sample_collocation(ref, loss);
    std::vector<HeadTargets> targets;
    for (const auto& s : specs) targets.push_back(head_targets(s, colloc));

    const std::size_t base_count = ck.net.parameter_count();
    const std::size_t head_count = static_cast<std::size_t>(rows * n);
    Vector params = ck.net.flatten();
    for (const auto& w : ck.head_weights) params.insert(params.end(), w.data(), w.data() + w.size());
    Vector grads(params.size());
    AdamState adam;

    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        MultiHeadGradient mg;
        try {
            mg = multihead_gradient(ck.net, ck.head_weights, specs, targets, colloc, loss);
        } catch (const Error& err) {
            if (err.code() != Errc::NonFiniteLoss) throw;
            throw Error(Errc::Diverged, "loss became non-finite at epoch " + std::to_string(e));
        }
        ck.history.total.push_back(mg.loss.total);
        ck.history.residual.push_back(mg.loss.residual);
        ck.history.ic.push_back(mg.loss.ic);
        ck.history.bc.push_back(mg.loss.bc);

        const Vector gb = mg.grad.flatten_base();
        std::copy(gb.begin(), gb.end(), grads.begin());
        for (std::size_t i = 0; i < mg.grad.heads.size(); ++i)
            std::copy(mg.grad.heads[i].data(), mg.grad.heads[i].data() + head_count,
                      grads.begin() + static_cast<std::ptrdiff_t>(base_count + i * head_count));
        adam_step(params, grads, adam, scheduled_lr(cfg, e));

        ck.net.assign(std::span<const double>(params.data(), base_count));
        for (std::size_t i = 0; i < ck.head_weights.size(); ++i)
            std::copy(params.begin() + static_cast<std::ptrdiff_t>(base_count + i * head_count),
                      params.begin() + static_cast<std::ptrdiff_t>(base_count + (i + 1) * head_count),
                      ck.head_weights[i].data());
    }
    if (!ck.net.all_finite()) throw Error(Errc::Diverged, "parameters became non-finite");
    return ck;
}

Checkpoint train_vanilla(const HeadConfig& target, const LossConfig& loss, const TrainConfig& cfg) {
    return train({target}, loss, cfg);
}

std::size_t training_invocations() noexcept { return g_training_calls.load(); }

}  // namespace stlpinn

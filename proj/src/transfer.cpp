#include "stlpinn/transfer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <string>

#include "stlpinn/error.hpp"

namespace stlpinn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Row-major flattening of an n x N matrix: entry (r, p) lands at r * N + p, matching D.
Eigen::VectorXd stack_rows(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    for (Eigen::Index r = 0; r < m.rows(); ++r) v.segment(r * m.cols(), m.cols()) = m.row(r).transpose();
    return v;
}

void enumerate_powers(std::size_t index, int remaining, int weight, std::vector<int>& powers,
                      std::vector<MultinomialTerm>& out) {
    if (index == powers.size()) {
        if (remaining == 0 && weight == 0) {
            double coef = 1.0;
            int total = 0;
            // q! / prod l_i! built incrementally as a product of binomials.
            for (int l : powers) {
                for (int j = 1; j <= l; ++j) coef *= static_cast<double>(total + j) / j;
                total += l;
            }
            out.push_back({coef, powers});
        }
        return;
    }
    const int idx = static_cast<int>(index);
    for (int l = 0; l <= remaining; ++l) {
        if (idx * l > weight) break;
        powers[index] = l;
        enumerate_powers(index + 1, remaining - l, weight - idx * l, powers, out);
    }
    powers[index] = 0;
}

}  // namespace

FrozenFeatures freeze_features(const BaseNetwork& net, const CollocationSet& colloc) {
    const auto in = static_cast<Eigen::Index>(net.input_dim());
    if (colloc.interior.rows() != in || colloc.initial.rows() != in ||
        (colloc.edges.cols() > 0 && colloc.edges.rows() != in))
        throw Error(Errc::GeometryMismatch, "collocation points do not match the network input");
    FrozenFeatures ff;
    ff.colloc = colloc;
    ff.n_ic = static_cast<std::size_t>(colloc.initial.cols());
    const FeatureBatch fi = forward_batch(net, {colloc.interior, true});
    ff.h = augment(fi.h);
    for (const auto& d : fi.dh) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d.rows() + 1, d.cols());
        a.topRows(d.rows()) = d;
        ff.dh.push_back(std::move(a));
    }
    Eigen::MatrixXd pts(in, colloc.initial.cols() + colloc.edges.cols());
    pts << colloc.initial, colloc.edges;
    ff.hb = augment(forward_batch(net, {pts, false}).h);
    return ff;
}

TransferOperator assemble_operator(std::shared_ptr<const FrozenFeatures> ff, const DenseMatrix& A,
                                   const DenseMatrix& B, const std::vector<DenseMatrix>& C,
                                   double omega1, double omega2, const TransferOptions& opts) {
    const auto start = Clock::now();
    const std::size_t n = A.rows();
    if (!A.square() || B.rows() != n || B.cols() != n)
        throw Error(Errc::DimensionMismatch, "coefficient matrices must be n x n");
    if (C.size() + 1 != ff->dh.size())
        throw Error(Errc::DimensionMismatch, "need one C matrix per spatial dimension");
    for (const auto& c : C)
        if (c.rows() != n || c.cols() != n)
            throw Error(Errc::DimensionMismatch, "coefficient matrices must be n x n");

    const auto rows = static_cast<Eigen::Index>(ff->rows());
    const auto n1 = static_cast<Eigen::Index>(ff->n1());
    const auto ne = static_cast<Eigen::Index>(n);
    TransferOperator op;
    op.features = ff;
    op.n = n;
    op.omega1 = omega1;
    op.omega2 = omega2;
    op.ridge = opts.ridge;

    // Block (r, c) of the stacked H* is A[r,c] h^T + B[r,c] h_t^T + sum_j C_j[r,c] h_xj^T.
    op.D = Eigen::MatrixXd::Zero(ne * n1, ne * rows);
    for (Eigen::Index r = 0; r < ne; ++r)
        for (Eigen::Index c = 0; c < ne; ++c) {
            auto block = op.D.block(r * n1, c * rows, n1, rows);
            const auto ur = static_cast<std::size_t>(r), uc = static_cast<std::size_t>(c);
            if (A(ur, uc) != 0.0) block += A(ur, uc) * ff->h.transpose();
            if (B(ur, uc) != 0.0) block += B(ur, uc) * ff->dh[0].transpose();
            for (std::size_t j = 0; j < C.size(); ++j)
                if (C[j](ur, uc) != 0.0) block += C[j](ur, uc) * ff->dh[j + 1].transpose();
        }

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(ne * rows, ne * rows);
    m.selfadjointView<Eigen::Lower>().rankUpdate(op.D.transpose(), omega1 / static_cast<double>(n1));
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(rows, rows);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(ff->hb, omega2 / static_cast<double>(ff->n2()));
    const Eigen::MatrixXd gram_full = gram.selfadjointView<Eigen::Lower>();
    for (Eigen::Index c = 0; c < ne; ++c) m.block(c * rows, c * rows, rows, rows) += gram_full;
    if (opts.ridge > 0.0) m.diagonal().array() += opts.ridge;
    // Mirror the lower triangle so M is exactly symmetric.
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose().triangularView<Eigen::StrictlyUpper>();

    op.M = DenseMatrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            op.M(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
    if (opts.solver == TransferSolver::StackedQR) {
        const auto n2 = static_cast<Eigen::Index>(ff->n2());
        const Eigen::Index extra = opts.ridge > 0.0 ? ne * rows : 0;
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(ne * n1 + ne * n2 + extra, ne * rows);
        s.topRows(ne * n1) = std::sqrt(omega1 / static_cast<double>(n1)) * op.D;
        const double sb = std::sqrt(omega2 / static_cast<double>(n2));
        for (Eigen::Index c = 0; c < ne; ++c)
            s.block(ne * n1 + c * n2, c * rows, n2, rows) = sb * ff->hb.transpose();
        if (extra > 0)
            s.bottomRows(extra).diagonal().setConstant(std::sqrt(opts.ridge));
        auto qr = std::make_shared<Eigen::ColPivHouseholderQR<Eigen::MatrixXd>>(s);
        if (qr->rank() == 0) throw Error(Errc::SingularM, "stacked transfer system has rank 0");
        op.qr = std::move(qr);
        op.assembly_seconds = seconds_since(start);
        return op;
    }
    try {
        op.factor = factorize(op.M, opts.kind);
    } catch (const Error& e) {
        if (e.code() == Errc::SingularMatrix || e.code() == Errc::NotPositiveDefinite)
            throw Error(Errc::SingularM,
                        std::string(e.what()) +
                            "; the frozen features are rank deficient, try more collocation "
                            "points, a smaller m, or an explicit ridge");
        throw;
    }
    op.assembly_seconds = seconds_since(start);
    return op;
}

Vector transfer_rhs(const TransferOperator& op, const Eigen::MatrixXd& forcing,
                    const Eigen::MatrixXd& boundary) {
    const FrozenFeatures& ff = *op.features;
    const auto ne = static_cast<Eigen::Index>(op.n);
    const auto rows = static_cast<Eigen::Index>(ff.rows());
    if (forcing.rows() != ne || forcing.cols() != static_cast<Eigen::Index>(ff.n1()) ||
        boundary.rows() != ne || boundary.cols() != static_cast<Eigen::Index>(ff.n2()))
        throw Error(Errc::DimensionMismatch, "forcing must be n x N1 and boundary values n x N2");
    Eigen::VectorXd rhs = (op.omega1 / static_cast<double>(ff.n1())) * (op.D.transpose() * stack_rows(forcing));
    const double wb = op.omega2 / static_cast<double>(ff.n2());
    for (Eigen::Index c = 0; c < ne; ++c)
        rhs.segment(c * rows, rows).noalias() += wb * (ff.hb * boundary.row(c).transpose());
    return Vector(rhs.data(), rhs.data() + rhs.size());
}

Eigen::MatrixXd weights_from_vector(std::span<const double> w, std::size_t rows, std::size_t n) {
    if (w.size() != rows * n) throw Error(Errc::DimensionMismatch, "weight vector length");
    Eigen::MatrixXd W(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(n));
    std::copy(w.begin(), w.end(), W.data());
    return W;
}

QuadraticLoss transfer_loss(const TransferOperator& op, const Eigen::MatrixXd& W,
                            const Eigen::MatrixXd& forcing, const Eigen::MatrixXd& boundary) {
    const FrozenFeatures& ff = *op.features;
    const Eigen::Map<const Eigen::VectorXd> w(W.data(), W.size());
    const double w1 = op.omega1 / static_cast<double>(ff.n1());
    const double w2 = op.omega2 / static_cast<double>(ff.n2());
    const Eigen::VectorXd r = op.D * w - stack_rows(forcing);
    const Eigen::MatrixXd rb = W.transpose() * ff.hb - boundary;  // n x N2
    QuadraticLoss out;
    out.value = w1 * r.squaredNorm() + w2 * rb.squaredNorm() + op.ridge * w.squaredNorm();
    Eigen::VectorXd g = 2.0 * w1 * (op.D.transpose() * r) + 2.0 * op.ridge * w;
    const auto rows = static_cast<Eigen::Index>(ff.rows());
    for (Eigen::Index c = 0; c < rb.rows(); ++c)
        g.segment(c * rows, rows) += 2.0 * w2 * (ff.hb * rb.row(c).transpose());
    out.gradient.assign(g.data(), g.data() + g.size());
    return out;
}

Eigen::MatrixXd TransferSolution::combined(std::optional<std::size_t> p) const {
    const std::size_t last = p ? std::min(*p + 1, weights.size()) : weights.size();
    Eigen::MatrixXd sum = weights.at(0);
    double scale = 1.0;
    for (std::size_t k = 1; k < last; ++k) {
        scale *= beta;
        sum += scale * weights[k];
    }
    return sum;
}

Eigen::MatrixXd TransferSolution::evaluate(const Eigen::MatrixXd& points,
                                           std::optional<std::size_t> p) const {
    if (!net) throw Error(Errc::InvalidConfig, "transfer solution has no network attached");
    return head_output(*net, combined(p), points);
}

namespace {

Vector stacked_solve(const TransferOperator& op, const Eigen::MatrixXd& forcing,
                     const Eigen::MatrixXd& boundary) {
    const FrozenFeatures& ff = *op.features;
    const auto ne = static_cast<Eigen::Index>(op.n);
    const auto n1 = static_cast<Eigen::Index>(ff.n1());
    const auto n2 = static_cast<Eigen::Index>(ff.n2());
    if (forcing.rows() != ne || forcing.cols() != n1 || boundary.rows() != ne || boundary.cols() != n2)
        throw Error(Errc::DimensionMismatch, "forcing must be n x N1 and boundary values n x N2");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(op.qr->rows());
    b.head(ne * n1) = std::sqrt(op.omega1 / static_cast<double>(n1)) * stack_rows(forcing);
    b.segment(ne * n1, ne * n2) = std::sqrt(op.omega2 / static_cast<double>(n2)) * stack_rows(boundary);
    const Eigen::VectorXd w = op.qr->solve(b);
    return Vector(w.data(), w.data() + w.size());
}

}  // namespace

TransferSolution solve_weights(const TransferOperator& op, const Eigen::MatrixXd& forcing,
                               const Eigen::MatrixXd& boundary,
                               std::shared_ptr<const BaseNetwork> net) {
    const auto start = Clock::now();
    Vector w;
    if (op.qr) {
        w = stacked_solve(op, forcing, boundary);
    } else {
        const Vector rhs = transfer_rhs(op, forcing, boundary);
        w = solve(op.factor, rhs);
    }
    TransferSolution sol;
    sol.net = std::move(net);
    sol.weights.push_back(weights_from_vector(w, op.features->rows(), op.n));
    sol.solve_seconds = seconds_since(start);
    return sol;
}

TransferOperator target_operator(const Checkpoint& ck, const ProblemSpec& target,
                                 const TransferOptions& opts) {
    const ProblemSpec& ref = ck.heads.at(0).problem();
    if (target.n != ref.n || target.d != ref.d || target.T != ref.T || target.L != ref.L)
        throw Error(Errc::GeometryMismatch, "target domain differs from the training domain");
    auto ff = std::make_shared<const FrozenFeatures>(
        freeze_features(ck.net, sample_collocation(target, ck.loss)));
    return assemble_operator(std::move(ff), target.A, target.B, target.C,
                             opts.omega1.value_or(ck.loss.omega1),
                             opts.omega2.value_or(ck.loss.omega2), opts);
}

TransferSolution transfer_linear(const Checkpoint& ck, const ProblemSpec& target,
                                 const TransferOptions& opts) {
    if (!target.is_linear())
        throw Error(Errc::Unsupported, "nonlinear targets go through transfer_nonlinear");
    const TransferOperator op = target_operator(ck, target, opts);
    const HeadTargets tg = head_targets(target, op.features->colloc);
    TransferSolution sol =
        solve_weights(op, tg.forcing, tg.boundary, std::make_shared<const BaseNetwork>(ck.net));
    sol.assembly_seconds = op.assembly_seconds;
    return sol;
}

std::vector<MultinomialTerm> perturbation_terms(std::size_t k, int q) {
    if (k == 0) throw Error(Errc::InvalidOrder, "perturbation forcing is defined for k >= 1");
    if (q < 2) throw Error(Errc::InvalidOrder, "the polynomial exponent must be at least 2");
    std::vector<MultinomialTerm> out;
    std::vector<int> powers(k, 0);
    enumerate_powers(0, q, static_cast<int>(k - 1), powers, out);
    return out;
}

double perturbation_value(std::span<const MultinomialTerm> terms, std::span<const double> y) {
    double sum = 0.0;
    for (const auto& t : terms) {
        double prod = t.coefficient;
        for (std::size_t i = 0; i < t.powers.size(); ++i)
            for (int e = 0; e < t.powers[i]; ++e) prod *= y[i];
        sum += prod;
    }
    return -sum;
}

PointFunction perturbation_rhs(std::size_t k, const ProblemSpec& spec,
                               std::vector<PointFunction> history) {
    if (k == 0) return spec.forcing;
    if (!spec.nonlinearity) throw Error(Errc::AlreadyLinear, "spec has no polynomial term");
    if (history.size() < k) throw Error(Errc::InvalidOrder, "need Y_0..Y_{k-1}");
    const Nonlinearity nl = *spec.nonlinearity;
    const std::size_t n = spec.n;
    auto terms = perturbation_terms(k, nl.q);
    history.resize(k);
    return [terms = std::move(terms), history = std::move(history), nl, n](std::span<const double> x) {
        std::vector<double> y(history.size());
        for (std::size_t i = 0; i < history.size(); ++i) y[i] = history[i](x).at(nl.source);
        Vector f(n, 0.0);
        f[nl.target] = perturbation_value(terms, y);
        return f;
    };
}

TransferSolution solve_target(const TransferOperator& op, const ProblemSpec& target, std::size_t p,
                              std::shared_ptr<const BaseNetwork> net) {
    const FrozenFeatures& ff = *op.features;
    const HeadTargets tg = head_targets(linearize(target), ff.colloc);

    TransferSolution sol;
    sol.net = std::move(net);
    sol.beta = target.nonlinearity ? target.nonlinearity->beta : 0.0;
    const auto solve_start = Clock::now();
    sol.weights.push_back(solve_weights(op, tg.forcing, tg.boundary).weights[0]);

    if (p > 0 && !target.nonlinearity) {
        // Linear target: every higher term solves a homogeneous problem with zero data.
        for (std::size_t k = 1; k <= p; ++k)
            sol.weights.push_back(Eigen::MatrixXd::Zero(sol.weights[0].rows(), sol.weights[0].cols()));
    } else if (p > 0) {
        const Nonlinearity nl = *target.nonlinearity;
        const auto src = static_cast<Eigen::Index>(nl.source);
        const auto tgt = static_cast<Eigen::Index>(nl.target);
        const Eigen::MatrixXd zero_b = Eigen::MatrixXd::Zero(tg.boundary.rows(), tg.boundary.cols());
        // Source component of every Y_i at the interior points, one row per i.
        Eigen::MatrixXd ys(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(ff.n1()));
        std::vector<double> yp(p);
        for (std::size_t k = 1; k <= p; ++k) {
            const auto prev = static_cast<Eigen::Index>(k - 1);
            ys.row(prev) = sol.weights[k - 1].col(src).transpose() * ff.h;
            const auto terms = perturbation_terms(k, nl.q);
            Eigen::MatrixXd fk = Eigen::MatrixXd::Zero(tg.forcing.rows(), tg.forcing.cols());
            for (Eigen::Index j = 0; j < fk.cols(); ++j) {
                for (std::size_t i = 0; i < k; ++i) yp[i] = ys(static_cast<Eigen::Index>(i), j);
                fk(tgt, j) = perturbation_value(terms, std::span<const double>(yp.data(), k));
            }
            Eigen::MatrixXd wk = solve_weights(op, fk, zero_b).weights[0];
            if (!wk.allFinite())
                throw Error(Errc::NonFiniteSeries, "term " + std::to_string(k) + " is not finite");
            sol.weights.push_back(std::move(wk));
        }
    }
    sol.solve_seconds = seconds_since(solve_start);
    return sol;
}

TransferSolution transfer_nonlinear(const Checkpoint& ck, const ProblemSpec& target, std::size_t p,
                                    const TransferOptions& opts) {
    const TransferOperator op = target_operator(ck, linearize(target), opts);
    TransferSolution sol = solve_target(op, target, p, std::make_shared<const BaseNetwork>(ck.net));
    sol.assembly_seconds = op.assembly_seconds;
    return sol;
}

OrderSelection select_p(const Checkpoint& ck, const ProblemSpec& target, std::size_t p_max,
                        const Eigen::MatrixXd& points, const Eigen::MatrixXd& reference,
                        const TransferOptions& opts) {
    if (p_max > 20) throw Error(Errc::InvalidOrder, "p must lie in [0, 20]");
    const TransferSolution sol = transfer_nonlinear(ck, target, p_max, opts);
    if (reference.cols() != points.cols() ||
        reference.rows() != static_cast<Eigen::Index>(target.n))
        throw Error(Errc::DimensionMismatch, "reference must be n x N at the given points");
    // Y_k values are linear in W_k, so the partial sums reuse the features once.
    const FeatureBatch fb = forward_batch(ck.net, {points, false});
    const Eigen::MatrixXd haug = augment(fb.h);
    OrderSelection out;
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(reference.rows(), reference.cols());
    double scale = 1.0;
    for (std::size_t p = 0; p <= p_max; ++p) {
        u += scale * (sol.weights[p].transpose() * haug);
        scale *= sol.beta;
        out.mae.push_back((u - reference).cwiseAbs().mean());
        if (out.mae.back() < out.mae[out.p_opt]) out.p_opt = p;
    }
    return out;
}

SolverSolution perturbation_oracle(const ProblemSpec& spec, std::size_t p,
                                   std::span<const double> t_grid, const Tolerances& tol) {
    if (!spec.is_ode()) throw Error(Errc::Unsupported, "oracle mode integrates ODE systems");
    if (!spec.nonlinearity) throw Error(Errc::AlreadyLinear, "spec has no polynomial term");
    const std::size_t n = spec.n;
    const Nonlinearity nl = *spec.nonlinearity;
    const Factorization bf = factorize(spec.B);
    std::vector<std::vector<MultinomialTerm>> terms(p + 1);
    for (std::size_t k = 1; k <= p; ++k) terms[k] = perturbation_terms(k, nl.q);

    OdeSystem sys;
    sys.n = n * (p + 1);
    sys.rhs = [&, n](double t, std::span<const double> y, std::span<double> dy) {
        std::vector<double> src(p + 1);
        for (std::size_t k = 0; k <= p; ++k) src[k] = y[k * n + nl.source];
        const double x[1] = {t};
        for (std::size_t k = 0; k <= p; ++k) {
            Vector f = k == 0 ? spec.forcing(x) : Vector(n, 0.0);
            if (k > 0) f[nl.target] = perturbation_value(terms[k], std::span<const double>(src.data(), k));
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c) f[r] -= spec.A(r, c) * y[k * n + c];
            const Vector d = solve(bf, f);
            std::copy(d.begin(), d.end(), dy.begin() + static_cast<std::ptrdiff_t>(k * n));
        }
    };
    Vector y0(sys.n, 0.0);
    std::copy(spec.y0.begin(), spec.y0.end(), y0.begin());
    const SolverSolution full = radau_solve(sys, y0, t_grid, tol);

    SolverSolution out = full;
    out.values = DenseMatrix(full.values.rows(), n);
    for (std::size_t i = 0; i < full.values.rows(); ++i) {
        double scale = 1.0;
        for (std::size_t k = 0; k <= p; ++k) {
            for (std::size_t c = 0; c < n; ++c) out.values(i, c) += scale * full.values(i, k * n + c);
            scale *= nl.beta;
        }
    }
    return out;
}

}  // namespace stlpinn

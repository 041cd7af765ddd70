#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "stlpinn/diffnet.hpp"
#include "stlpinn/equations.hpp"
#include "stlpinn/linalg.hpp"
#include "stlpinn/mhpinn.hpp"
#include "stlpinn/refsolvers.hpp"

namespace stlpinn {

/// Augmented features [h; 1] and their input derivatives at fixed collocation points.
/// dh[0] is the time derivative, dh[j] the derivative along x_j; their bias rows are zero.
struct FrozenFeatures {
    Eigen::MatrixXd h;                // (m+1) x N1
    std::vector<Eigen::MatrixXd> dh;  // d+1 entries, (m+1) x N1
    Eigen::MatrixXd hb;               // (m+1) x N2, IC points first
    std::size_t n_ic = 0;
    CollocationSet colloc;

    std::size_t rows() const noexcept { return static_cast<std::size_t>(h.rows()); }
    std::size_t n1() const noexcept { return static_cast<std::size_t>(h.cols()); }
    std::size_t n2() const noexcept { return static_cast<std::size_t>(hb.cols()); }
};

/// Throws GeometryMismatch when the points do not match the network input.
FrozenFeatures freeze_features(const BaseNetwork& net, const CollocationSet& colloc);

/// Normal: factorize M (LU or Cholesky per kind). StackedQR: column-pivoted Householder QR of
/// the weighted stacked system whose normal equations are M w = rhs. Same minimizer, but the
/// conditioning is that of the features rather than its square.
enum class TransferSolver { Normal, StackedQR };

struct TransferOptions {
    TransferSolver solver = TransferSolver::Normal;
    FactorKind kind = FactorKind::LU;
    double ridge = 0.0;  // Tikhonov shift added to M's diagonal; 0 disables it
    std::optional<double> omega1;  // default: the checkpoint's training weights
    std::optional<double> omega2;
};

/// Everything that depends on the target coefficients but not on forcing or IC/BC values.
struct TransferOperator {
    std::shared_ptr<const FrozenFeatures> features;
    std::size_t n = 0;
    double omega1 = 1.0;
    double omega2 = 1.0;
    double ridge = 0.0;
    Eigen::MatrixXd D;   // stacked H* rows (component-major): (n N1) x n(m+1)
    DenseMatrix M;       // n(m+1) x n(m+1)
    Factorization factor;  // Normal solver only
    std::shared_ptr<const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>> qr;  // StackedQR only
    double assembly_seconds = 0.0;  // H*, M and factorization

    std::size_t unknowns() const noexcept { return M.rows(); }
};

/// Throws SingularM, DimensionMismatch.
TransferOperator assemble_operator(std::shared_ptr<const FrozenFeatures> ff, const DenseMatrix& A,
                                   const DenseMatrix& B, const std::vector<DenseMatrix>& C,
                                   double omega1, double omega2,
                                   const TransferOptions& opts = {});

/// Right-hand side of the normal equations for forcing (n x N1) and boundary values (n x N2).
Vector transfer_rhs(const TransferOperator& op, const Eigen::MatrixXd& forcing,
                    const Eigen::MatrixXd& boundary);

/// Weight vector in Kronecker order (component blocks of length m+1) reshaped to (m+1) x n.
Eigen::MatrixXd weights_from_vector(std::span<const double> w, std::size_t rows, std::size_t n);

/// Quadratic transfer loss at W and its gradient (the normal-equation residual).
struct QuadraticLoss {
    double value = 0.0;
    Vector gradient;
};

QuadraticLoss transfer_loss(const TransferOperator& op, const Eigen::MatrixXd& W,
                            const Eigen::MatrixXd& forcing, const Eigen::MatrixXd& boundary);

struct TransferSolution {
    std::shared_ptr<const BaseNetwork> net;
    std::vector<Eigen::MatrixXd> weights;  // W_0..W_p, (m+1) x n each
    double beta = 0.0;
    double assembly_seconds = 0.0;  // zero when an existing operator was reused
    double solve_seconds = 0.0;

    /// sum_k beta^k W_k, or the first p+1 terms when p is given.
    Eigen::MatrixXd combined(std::optional<std::size_t> p = std::nullopt) const;
    /// u at points (columns are (t, x...)), n x N.
    Eigen::MatrixXd evaluate(const Eigen::MatrixXd& points,
                             std::optional<std::size_t> p = std::nullopt) const;
    double total_seconds() const noexcept { return assembly_seconds + solve_seconds; }
};

/// RHS-only solve on an assembled operator; no factorization takes place.
TransferSolution solve_weights(const TransferOperator& op, const Eigen::MatrixXd& forcing,
                               const Eigen::MatrixXd& boundary,
                               std::shared_ptr<const BaseNetwork> net = nullptr);

/// Operator for a target instance on the checkpoint's training collocation points.
TransferOperator target_operator(const Checkpoint& ck, const ProblemSpec& target,
                                 const TransferOptions& opts = {});

/// freeze -> assemble -> solve for a linear target. Throws Unsupported for nonlinear targets.
TransferSolution transfer_linear(const Checkpoint& ck, const ProblemSpec& target,
                                 const TransferOptions& opts = {});

/// One multinomial term coefficient * prod_i Y_i^{powers[i]}.
struct MultinomialTerm {
    double coefficient = 0.0;
    std::vector<int> powers;  // over Y_0..Y_{k-1}
};

/// Terms of the beta^(k-1) coefficient of (sum_i Y_i)^q: sum l_i = q and sum i l_i = k - 1.
/// Throws InvalidOrder for k = 0 or q < 2.
std::vector<MultinomialTerm> perturbation_terms(std::size_t k, int q);

/// F_k at one point from source-component values y[i] = Y_i, i < k. The sign makes
/// F_1 = -Y_0^q.
double perturbation_value(std::span<const MultinomialTerm> terms, std::span<const double> y);

/// Closure form of F_k: the target component is -sum(...) of the source components of
/// Y_0..Y_{k-1}; other components are zero. For k = 0 the original forcing is returned.
PointFunction perturbation_rhs(std::size_t k, const ProblemSpec& spec,
                               std::vector<PointFunction> history);

/// RHS-only solve of any target whose linear part matches the operator: Y_0 from the
/// target's forcing and IC/BC, then the p cascade terms for a polynomial target. The
/// returned assembly time is zero. Throws NonFiniteSeries.
TransferSolution solve_target(const TransferOperator& op, const ProblemSpec& target, std::size_t p,
                              std::shared_ptr<const BaseNetwork> net = nullptr);

/// Sequential RHS-only solves for Y_0..Y_p on one operator. Y_0 carries the IC/BC, the rest
/// zero IC/BC. Throws NonFiniteSeries.
TransferSolution transfer_nonlinear(const Checkpoint& ck, const ProblemSpec& target, std::size_t p,
                                    const TransferOptions& opts = {});

struct OrderSelection {
    std::size_t p_opt = 0;
    std::vector<double> mae;  // index = p
};

/// MAE against reference values (n x N at points) for every p <= p_max.
OrderSelection select_p(const Checkpoint& ck, const ProblemSpec& target, std::size_t p_max,
                        const Eigen::MatrixXd& points, const Eigen::MatrixXd& reference,
                        const TransferOptions& opts = {});

/// Network-free check of the cascade: integrates Y_0..Y_p as one triangular ODE system with
/// Radau and returns sum_k beta^k Y_k on t_grid (values n columns).
SolverSolution perturbation_oracle(const ProblemSpec& spec, std::size_t p,
                                   std::span<const double> t_grid, const Tolerances& tol = {});

}  // namespace stlpinn

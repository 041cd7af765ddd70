#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "stlpinn/equations.hpp"
#include "stlpinn/linalg.hpp"

namespace stlpinn {

/// RK45 step-size controller. Elementary: h *= 0.9 err^(-1/5). PI: h *= 0.9 err^(-0.7/5)
/// err_prev^(0.4/5), which is smoother but settles at a smaller error ratio and so takes
/// more steps when accuracy, not stability, limits the step.
enum class StepControl { Elementary, PI };

struct Tolerances {
    double rtol = 1e-8;
    double atol = 1e-8;
    double max_step = 0.0;      // 0 -> whole interval
    double initial_step = 0.0;  // 0 -> automatic
    std::size_t max_steps = 2'000'000;
    StepControl control = StepControl::Elementary;
};

/// values(i, c): component c at output point i. For PDE solves points are ordered
/// time-major: i = it * nx + ix.
struct SolverSolution {
    std::vector<double> times;
    std::vector<double> space;  // empty for ODEs
    DenseMatrix values;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;
    std::size_t rhs_evals = 0;
    std::size_t jacobian_evals = 0;
    std::size_t factorizations = 0;
    double wall_clock_s = 0.0;

    std::size_t total_steps() const noexcept { return accepted_steps + rejected_steps; }
};

/// Generic first-order system dy/dt = rhs(t, y).
struct OdeSystem {
    std::size_t n = 0;
    std::function<void(double t, std::span<const double> y, std::span<double> dy)> rhs;
    /// Optional analytic Jacobian; finite differences are used when empty.
    std::function<void(double t, std::span<const double> y, DenseMatrix& jac)> jacobian;
};

OdeSystem ode_system(const ProblemSpec& spec);

/// Dormand-Prince 5(4) with adaptive steps (see StepControl) and dense output at t_grid.
/// t_grid must be non-decreasing and start at t0. Throws StepUnderflow, MaxStepsExceeded.
SolverSolution rk45_solve(const OdeSystem& sys, std::span<const double> y0,
                          std::span<const double> t_grid, const Tolerances& tol = {});
SolverSolution rk45_solve(const ProblemSpec& spec, const Tolerances& tol,
                          std::span<const double> t_grid);

/// Three-stage Radau IIA (order 5) with simplified Newton iterations.
/// Throws NewtonDivergence, StepUnderflow, MaxStepsExceeded.
SolverSolution radau_solve(const OdeSystem& sys, std::span<const double> y0,
                           std::span<const double> t_grid, const Tolerances& tol = {});
SolverSolution radau_solve(const ProblemSpec& spec, const Tolerances& tol,
                           std::span<const double> t_grid);

/// Superbee flux limiter.
double superbee(double r) noexcept;

/// One flux-limited Lax-Wendroff step of u_t + mu u_x = 0 on cell averages with zero
/// Dirichlet ghost cells. Throws CFLViolation when |mu| dt / dx > 1.
void lw_superbee_advect(std::span<double> cells, double mu, double dx, double dt);

enum class ReactionSubstep { Exact, Radau };

struct ArGrid {
    std::size_t cells = 200;  // finite-volume cells on [0, L]
    double cfl = 0.9;
    ReactionSubstep reaction = ReactionSubstep::Exact;
};

/// Exact solution of y' = -alpha [[k1,-k2],[-k1,k2]] y over dt, applied to every cell.
void ar_reaction_substep(std::span<double> y1, std::span<double> y2, double alpha, double k1,
                         double k2, double dt);

/// Godunov-split advection (LW + superbee) then reaction per step, with dt from the CFL
/// number and shortened to land on every requested output time. Output on cell centres.
SolverSolution godunov_split_solve(const ProblemSpec& spec, const ArGrid& grid,
                                   std::span<const double> t_grid, const Tolerances& tol = {});

/// Cell-centre coordinates used by godunov_split_solve.
std::vector<double> ar_cell_centres(double L, std::size_t cells);

/// Evenly spaced points including both ends.
std::vector<double> linspace(double a, double b, std::size_t count);

}  // namespace stlpinn

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "stlpinn/equations.hpp"
#include "stlpinn/error.hpp"
#include "stlpinn/refsolvers.hpp"

using namespace stlpinn;

namespace {

double max_error_vs_oho(const SolverSolution& sol, double alpha, std::span<const double> y0) {
    double worst = 0.0;
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        const auto a = analytic_oho(alpha, y0, sol.times[i]);
        worst = std::max({worst, std::abs(sol.values(i, 0) - a[0]),
                          std::abs(sol.values(i, 1) - a[1])});
    }
    return worst;
}

double total_variation(std::span<const double> u) {
    double tv = std::abs(u.front()) + std::abs(u.back());  // zero ghost cells on both sides
    for (std::size_t i = 1; i < u.size(); ++i) tv += std::abs(u[i] - u[i - 1]);
    return tv;
}

// Exact solution of the pure advection problem: spline shifted by mu t, zero inflow.
double shifted_spline(double x, double shift) {
    const double s = x - shift;
    return s < 0.0 ? 0.0 : spline_ic(1.0, 1.0, s);
}

}  // namespace

TEST_CASE("linspace") {
    const auto g = linspace(0.0, 1.0, 5);
    CHECK(g == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
    CHECK(linspace(2.0, 3.0, 1) == std::vector<double>{2.0});
}

TEST_CASE("RK45 on OHO") {
    const auto grid = linspace(0.0, 1.0, 101);
    for (double alpha : {20.0, 50.0}) {
        const ProblemSpec s = instantiate(Family::OHO, alpha);
        const SolverSolution sol = rk45_solve(s, Tolerances{}, grid);
        CHECK(max_error_vs_oho(sol, alpha, s.y0) < 1e-6);
        CHECK(sol.times == grid);
    }
}

TEST_CASE("RK45 with the PI controller") {
    const auto grid = linspace(0.0, 1.0, 101);
    const ProblemSpec s = instantiate(Family::OHO, 50.0);
    Tolerances pi;
    pi.control = StepControl::PI;
    const SolverSolution a = rk45_solve(s, pi, grid);
    const SolverSolution b = rk45_solve(s, Tolerances{}, grid);
    CHECK(max_error_vs_oho(a, 50.0, s.y0) < 1e-6);
    // Smaller steady-state error ratio, so at least as many steps.
    CHECK(a.accepted_steps >= b.accepted_steps);
}

TEST_CASE("RK45 on a constant system") {
    OdeSystem sys{1, [](double, std::span<const double>, std::span<double> dy) { dy[0] = 0.0; }, {}};
    const Vector y0{3.25};
    const auto grid = linspace(0.0, 1.0, 11);
    const SolverSolution sol = rk45_solve(sys, y0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) CHECK(sol.values(i, 0) == 3.25);
    CHECK(sol.rejected_steps == 0);
}

TEST_CASE("RK45 step count grows with stiffness while Radau stays flat") {
    const Vector grid{0.0, 1.0};
    const ProblemSpec lo = instantiate(Family::OHO, 20.0), hi = instantiate(Family::OHO, 200.0);
    const auto rk_lo = rk45_solve(lo, Tolerances{}, grid), rk_hi = rk45_solve(hi, Tolerances{}, grid);
    const auto ra_lo = radau_solve(lo, Tolerances{}, grid), ra_hi = radau_solve(hi, Tolerances{}, grid);
    MESSAGE("rk45 steps " << rk_lo.total_steps() << " -> " << rk_hi.total_steps() << ", radau "
                          << ra_lo.total_steps() << " -> " << ra_hi.total_steps());
    CHECK(rk_hi.total_steps() >= 2 * rk_lo.total_steps());
    CHECK(ra_hi.total_steps() <= 3 * ra_lo.total_steps());
}

TEST_CASE("RK45 reports step underflow") {
    OdeSystem blow{1, [](double, std::span<const double> y, std::span<double> dy) {
                       dy[0] = y[0] * y[0];
                   }, {}};
    const Vector y0{1.0};
    const Vector grid{0.0, 2.0};  // blows up at t = 1
    try {
        rk45_solve(blow, y0, grid);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK((e.code() == Errc::StepUnderflow || e.code() == Errc::MaxStepsExceeded));
    }
}

TEST_CASE("Radau on OHO") {
    const auto grid = linspace(0.0, 1.0, 101);
    for (double alpha : {20.0, 200.0}) {
        const ProblemSpec s = instantiate(Family::OHO, alpha);
        const SolverSolution sol = radau_solve(s, Tolerances{}, grid);
        CHECK(max_error_vs_oho(sol, alpha, s.y0) < 1e-6);
    }
}

TEST_CASE("Radau keeps a constant state") {
    OdeSystem sys{2, [](double, std::span<const double>, std::span<double> dy) {
                      dy[0] = dy[1] = 0.0;
                  }, {}};
    const Vector y0{1.5, -0.25};
    const auto grid = linspace(0.0, 1.0, 7);
    const SolverSolution sol = radau_solve(sys, y0, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(sol.values(i, 0) == 1.5);
        CHECK(sol.values(i, 1) == -0.25);
    }
}

TEST_CASE("Radau Duffing residual along dense output") {
    const ProblemSpec s = instantiate(Family::Duffing, 40.0);
    Tolerances tol;
    tol.rtol = tol.atol = 1e-10;
    const double h = 1e-3;
    std::vector<double> grid;
    for (double t = 0.0; t <= 1.0 + 1e-12; t += h) grid.push_back(std::min(t, 1.0));
    const SolverSolution sol = radau_solve(s, tol, grid);
    double worst = 0.0;
    for (std::size_t i = 200; i + 1 < grid.size(); ++i) {
        const Vector f = s.ode_rhs(grid[i], sol.values.row(i));
        for (std::size_t c = 0; c < 2; ++c) {
            const double deriv = (sol.values(i + 1, c) - sol.values(i - 1, c)) /
                                 (grid[i + 1] - grid[i - 1]);
            worst = std::max(worst, std::abs(deriv - f[c]));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("RK45 and Radau agree") {
    const auto grid = linspace(0.0, 1.0, 51);
    const Tolerances tol;
    for (const ProblemSpec& s : {instantiate(Family::OHO, 30.0), instantiate(Family::NCFF, 30.0),
                                 instantiate(Family::Duffing, 30.0)}) {
        const auto a = rk45_solve(s, tol, grid);
        const auto b = radau_solve(s, tol, grid);
        double worst = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (std::size_t c = 0; c < 2; ++c)
                worst = std::max(worst, std::abs(a.values(i, c) - b.values(i, c)) /
                                            std::max(1.0, std::abs(b.values(i, c))));
        CHECK(worst <= 10.0 * (tol.rtol + tol.rtol));
    }
}

TEST_CASE("Radau order under step halving") {
    // Loose tolerances plus a step cap pin the step size, exposing the order-5 behaviour.
    const ProblemSpec s = instantiate(Family::OHO, 3.0);
    const Vector grid{0.0, 1.0};
    std::vector<double> errs;
    for (double h : {0.25, 0.125, 0.0625}) {
        Tolerances tol;
        tol.rtol = tol.atol = 1.0;
        tol.initial_step = tol.max_step = h;
        const SolverSolution sol = radau_solve(s, tol, grid);
        CHECK(sol.rejected_steps == 0);
        errs.push_back(max_error_vs_oho(sol, 3.0, s.y0));
    }
    MESSAGE("errors " << errs[0] << " " << errs[1] << " " << errs[2]);
    for (std::size_t i = 1; i < errs.size(); ++i) CHECK(errs[i] * 4.0 <= errs[i - 1]);
}

TEST_CASE("superbee limiter") {
    CHECK(superbee(-1.0) == 0.0);
    CHECK(superbee(0.25) == 0.5);
    CHECK(superbee(0.75) == 1.0);
    CHECK(superbee(1.5) == 1.5);
    CHECK(superbee(3.0) == 2.0);
}

TEST_CASE("advection of a constant state") {
    std::vector<double> u(20, 0.7);
    lw_superbee_advect(u, 0.5, 0.1, 0.1);
    // Only the inflow cell sees the zero ghost value.
    for (std::size_t i = 1; i < u.size(); ++i) CHECK(u[i] == 0.7);
    CHECK(u[0] < 0.7);
}

TEST_CASE("unit CFL shifts exactly one cell") {
    std::vector<double> u{0.0, 1.0, 3.0, 2.0, 5.0, 0.5};
    std::vector<double> v = u;
    lw_superbee_advect(v, 2.0, 0.5, 0.25);
    CHECK(v[0] == 0.0);
    for (std::size_t i = 1; i < u.size(); ++i) CHECK(v[i] == doctest::Approx(u[i - 1]));
    std::vector<double> w = u;
    lw_superbee_advect(w, -2.0, 0.5, 0.25);
    for (std::size_t i = 0; i + 1 < u.size(); ++i) CHECK(w[i] == doctest::Approx(u[i + 1]));
    CHECK(w.back() == 0.0);
}

TEST_CASE("CFL violation") {
    std::vector<double> u(5, 1.0);
    try {
        lw_superbee_advect(u, 1.0, 0.1, 0.2);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CFLViolation);
    }
}

TEST_CASE("advection is total-variation diminishing") {
    const std::size_t n = 100;
    const auto x = ar_cell_centres(1.0, n);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = std::exp(-200.0 * (x[i] - 0.3) * (x[i] - 0.3));
    double tv = total_variation(u);
    for (int step = 0; step < 100; ++step) {
        lw_superbee_advect(u, 1.0, 0.01, 0.005);
        const double next = total_variation(u);
        CHECK(next <= tv + 1e-12);
        tv = next;
    }
}

TEST_CASE("reaction substep") {
    std::vector<double> y1{0.3, 1.0, 0.0}, y2{0.7, 0.2, 2.0};
    const std::vector<double> mass{1.0, 1.2, 2.0};
    ar_reaction_substep(y1, y2, 50.0, 1e-3, 2e-3, 0.37);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(y1[i] + y2[i] - mass[i]) <= 1e-12);

    // Matrix exponential of -alpha K dt via a truncated Taylor series with squaring.
    const double alpha = 400.0, k1 = 1e-3, k2 = 2e-3, dt = 0.9;
    const DenseMatrix k{{k1, -k2}, {-k1, k2}};
    const DenseMatrix small = (-alpha * dt / 1024.0) * k;
    DenseMatrix e = DenseMatrix::identity(2), term = DenseMatrix::identity(2);
    for (int j = 1; j < 20; ++j) {
        term = (1.0 / j) * (term * small);
        e = e + term;
    }
    for (int s = 0; s < 10; ++s) e = e * e;
    std::vector<double> a{0.8}, b{0.1};
    ar_reaction_substep(a, b, alpha, k1, k2, dt);
    CHECK(std::abs(a[0] - (e(0, 0) * 0.8 + e(0, 1) * 0.1)) <= 1e-12);
    CHECK(std::abs(b[0] - (e(1, 0) * 0.8 + e(1, 1) * 0.1)) <= 1e-12);
}

TEST_CASE("pure advection converges to the shifted profile") {
    FamilyParams fp;
    fp.mu = 0.25;
    const ProblemSpec s = instantiate(Family::AR, 0.0, fp);
    const Vector grid{0.0, 1.0};
    double prev = 1e300;
    for (std::size_t cells : {50, 100, 200, 400}) {
        const SolverSolution sol = godunov_split_solve(s, ArGrid{cells, 0.9}, grid);
        double l1 = 0.0;
        for (std::size_t i = 0; i < cells; ++i)
            for (std::size_t c = 0; c < 2; ++c)
                l1 += std::abs(sol.values(cells + i, c) - shifted_spline(sol.space[i], 0.25)) /
                      static_cast<double>(cells);
        MESSAGE(cells << " cells: L1 " << l1);
        CHECK(l1 < prev);
        CHECK(l1 < 0.05);
        prev = l1;
    }
}

TEST_CASE("split solve reaches the chemical equilibrium ratio") {
    FamilyParams fp;
    fp.T = 5.0;
    const ProblemSpec s = instantiate(Family::AR, 5000.0, fp);
    const Vector grid{0.0, 5.0};
    for (ReactionSubstep r : {ReactionSubstep::Exact, ReactionSubstep::Radau}) {
        const SolverSolution sol = godunov_split_solve(s, ArGrid{100, 0.9, r}, grid);
        for (std::size_t i = 0; i < 100; ++i) {
            const double y1 = sol.values(100 + i, 0), y2 = sol.values(100 + i, 1);
            if (y1 + y2 > 1e-6) CHECK(std::abs(y1 / y2 / 2.0 - 1.0) < 1e-2);
        }
    }
}

TEST_CASE("split solve output layout") {
    const ProblemSpec s = instantiate(Family::AR, 10.0);
    const auto grid = linspace(0.0, 1.0, 4);
    const SolverSolution sol = godunov_split_solve(s, ArGrid{40}, grid);
    CHECK(sol.values.rows() == 4 * 40);
    CHECK(sol.space.size() == 40);
    CHECK(sol.values(5, 0) == doctest::Approx(spline_ic(1.0, 1.0, sol.space[5])));
    CHECK_THROWS_AS(godunov_split_solve(instantiate(Family::OHO, 5.0), ArGrid{}, grid), Error);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "stlpinn/equations.hpp"
#include "stlpinn/error.hpp"
#include "stlpinn/refsolvers.hpp"

using namespace stlpinn;

namespace {

template <class F>
Errc error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::IoError;
}

}  // namespace

TEST_CASE("family names") {
    CHECK(parse_family("oho") == Family::OHO);
    CHECK(parse_family("NCFF") == Family::NCFF);
    CHECK(parse_family("Duffing") == Family::Duffing);
    CHECK(parse_family("ar") == Family::AR);
    CHECK(error_of([] { parse_family("vdp"); }) == Errc::UnknownFamily);
    CHECK(family_name(Family::Duffing) == "Duffing");
}

TEST_CASE("OHO instance") {
    const ProblemSpec s = instantiate(Family::OHO, 20.0);
    CHECK(s.A == DenseMatrix{{0, -1}, {1, 20}});
    CHECK(s.B == DenseMatrix::identity(2));
    CHECK(s.y0 == Vector{1.0, 0.5});
    const double x[1] = {0.3};
    CHECK(s.forcing(x) == Vector{0.0, 0.0});
    CHECK(s.is_ode());
    CHECK(s.is_linear());
}

TEST_CASE("NCFF instance") {
    const ProblemSpec s = instantiate(Family::NCFF, 10.0);
    CHECK(s.A == DenseMatrix{{2, -1}, {-9, 10}});
    const double t = 0.7;
    const double x[1] = {t};
    const Vector f = s.forcing(x);
    CHECK(f[0] == doctest::Approx(2 * std::sin(t)));
    CHECK(f[1] == doctest::Approx(10 * (std::cos(t) - std::sin(t))));
}

TEST_CASE("AR instance") {
    const ProblemSpec s = instantiate(Family::AR, 6.0);
    CHECK(s.d == 1);
    CHECK(s.A(0, 0) == doctest::Approx(6e-3));
    CHECK(s.A(0, 1) == doctest::Approx(-1.2e-2));
    CHECK(s.A(1, 0) == doctest::Approx(-6e-3));
    CHECK(s.A(1, 1) == doctest::Approx(1.2e-2));
    CHECK(s.C.size() == 1);
    CHECK(s.C[0] == DenseMatrix{{1.8e-4, 0}, {0, 1.8e-4}});
}

TEST_CASE("Duffing instance and linearization") {
    const ProblemSpec s = instantiate(Family::Duffing, 40.0);
    REQUIRE(s.nonlinearity.has_value());
    CHECK(s.nonlinearity->target == 1);
    CHECK(s.nonlinearity->q == 3);
    CHECK(s.nonlinearity->beta == 0.5);
    CHECK(s.A == DenseMatrix{{0, -1}, {0.1, 40}});
    const ProblemSpec lin = linearize(s);
    CHECK(lin.is_linear());
    CHECK(lin.A == s.A);
    const double x[1] = {1.2};
    CHECK(lin.forcing(x)[1] == doctest::Approx(std::cos(1.2)));
    const ProblemSpec twice = linearize(lin);
    CHECK(twice.A == lin.A);
    CHECK(twice.is_linear());
}

TEST_CASE("invalid alpha") {
    CHECK(error_of([] { instantiate(Family::OHO, -1.0); }) == Errc::InvalidAlpha);
    CHECK(error_of([] { instantiate(Family::OHO, NAN); }) == Errc::InvalidAlpha);
}

TEST_CASE("stiffness ratios") {
    CHECK(stiffness_ratio(instantiate(Family::OHO, 20.0)).ratio ==
          doctest::Approx(397.997487421).epsilon(1e-9));
    CHECK(stiffness_ratio(instantiate(Family::NCFF, 99.0)).ratio ==
          doctest::Approx(100.0).epsilon(1e-12));
    CHECK(stiffness_ratio(instantiate(Family::OHO, 2.0)).ratio == doctest::Approx(1.0));
    CHECK(error_of([] { stiffness_ratio(instantiate(Family::AR, 5.0)); }) == Errc::ZeroEigenvalue);

    for (double a = 3.0; a <= 400.0; a *= 1.37) {
        const double root = (a + std::sqrt(a * a - 4.0)) / 2.0;
        CHECK(stiffness_ratio(instantiate(Family::OHO, a)).ratio ==
              doctest::Approx(root * root).epsilon(1e-9));
    }
    for (double a = 1.0; a <= 400.0; a *= 1.41)
        CHECK(std::abs(stiffness_ratio(instantiate(Family::NCFF, a)).ratio - (a + 1.0)) <=
              1e-12 * (a + 1.0));
}

TEST_CASE("analytic OHO") {
    const Vector zero{0, 0};
    const auto z = analytic_oho(20.0, zero, 0.4);
    CHECK(z[0] == 0.0);
    CHECK(z[1] == 0.0);
    const Vector y0{1.0, 0.5};
    const auto a = analytic_oho(20.0, y0, 0.0);
    CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(error_of([&] { analytic_oho(2.0, y0, 1.0); }) == Errc::RepeatedRoot);

    // Residual y1'' + alpha y1' + y1 with y1' = y2 and y2' from finite differences of y2.
    const double alpha = 20.0, h = 1e-5;
    for (int i = 0; i < 100; ++i) {
        const double t = 0.01 + i * 0.0099;
        const auto c = analytic_oho(alpha, y0, t);
        const auto p = analytic_oho(alpha, y0, t + h);
        const auto m = analytic_oho(alpha, y0, t - h);
        const double y1dot = (p[0] - m[0]) / (2 * h);
        const double y2dot = (p[1] - m[1]) / (2 * h);
        CHECK(std::abs(y1dot - c[1]) < 1e-8);
        CHECK(std::abs(y2dot + alpha * c[1] + c[0]) < 1e-6);
    }
}

TEST_CASE("analytic OHO against Radau") {
    const ProblemSpec s = instantiate(Family::OHO, 20.0);
    Tolerances tol;
    tol.rtol = tol.atol = 1e-10;
    const Vector grid{0.0, 1.0};
    const SolverSolution sol = radau_solve(s, tol, grid);
    const auto a = analytic_oho(20.0, s.y0, 1.0);
    CHECK(std::abs(sol.values(1, 0) - a[0]) < 1e-8);
    CHECK(std::abs(sol.values(1, 1) - a[1]) < 1e-8);
}

TEST_CASE("analytic NCFF") {
    const Vector y0{2.0, 4.0};
    const auto at0 = analytic_ncff(10.0, 1.0, y0, 0.0);
    CHECK(at0[0] == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(at0[1] == doctest::Approx(4.0).epsilon(1e-13));

    // Starting on the particular solution leaves only the sinusoid.
    const Vector particular{0.0, 1.0};
    for (double t : {0.3, 1.7, 4.0}) {
        const auto v = analytic_ncff(10.0, 1.0, particular, t);
        CHECK(v[0] == doctest::Approx(std::sin(t)).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(std::cos(t)).epsilon(1e-12));
    }

    ProblemSpec s = instantiate(Family::NCFF, 10.0);
    Tolerances tol;
    tol.rtol = tol.atol = 1e-10;
    const Vector grid{0.0, 2.0};
    const SolverSolution sol = radau_solve(s, tol, grid);
    const auto a = analytic_ncff(10.0, 1.0, y0, 2.0);
    CHECK(std::abs(sol.values(1, 0) - a[0]) < 1e-8);
    CHECK(std::abs(sol.values(1, 1) - a[1]) < 1e-8);
}

TEST_CASE("spline initial condition") {
    CHECK(spline_ic(1.0, 1.0, 0.0) == doctest::Approx(0.0));
    CHECK(spline_ic(1.0, 1.0, 0.5) == doctest::Approx(1.0));
    CHECK(spline_ic(1.0, 1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    // Frozen from an independent clamped-spline solve.
    CHECK(spline_ic(1.0, 1.0, 0.125) == doctest::Approx(0.15625).epsilon(1e-13));
    CHECK(spline_ic(1.0, 1.0, 0.3) == doctest::Approx(0.648).epsilon(1e-13));
    CHECK(spline_ic(1.0, 1.0, 0.375) == doctest::Approx(0.84375).epsilon(1e-13));
    CHECK(spline_ic(2.0, 1.0, 0.125) == doctest::Approx(0.3125).epsilon(1e-13));
    CHECK(error_of([] { spline_ic(1.0, 1.0, 1.5); }) == Errc::OutOfDomain);
    CHECK(error_of([] { spline_ic(1.0, 1.0, -0.1); }) == Errc::OutOfDomain);
}

TEST_CASE("spline is C2 at interior knots") {
    const double p = 1.3, L = 2.0, h = 1e-4;
    for (double knot : {0.25 * L, 0.5 * L, 0.75 * L}) {
        const double c = spline_ic(p, L, knot);
        const double left = (spline_ic(p, L, knot - 2 * h) - 2 * spline_ic(p, L, knot - h) + c) /
                            (h * h);
        const double right = (c - 2 * spline_ic(p, L, knot + h) + spline_ic(p, L, knot + 2 * h)) /
                             (h * h);
        // One-sided second differences carry O(h) truncation from the third derivative.
        CHECK(std::abs(left - right) < 1e-8 * p + 1e-2);
    }
}

TEST_CASE("AR initial condition uses the spline on both components") {
    FamilyParams fp;
    fp.y0max = 1.5;
    const ProblemSpec s = instantiate(Family::AR, 10.0, fp);
    const double x[1] = {0.3};
    const Vector v = s.ic(x);
    CHECK(v[0] == doctest::Approx(1.5 * 0.648));
    CHECK(v[1] == doctest::Approx(1.5 * 0.648));
}

TEST_CASE("Duffing right-hand side includes the cubic term") {
    const ProblemSpec s = instantiate(Family::Duffing, 40.0);
    const Vector y{2.0, 0.5};
    const Vector r = s.ode_rhs(0.0, y);
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(1.0 - (0.1 * 2.0 + 40.0 * 0.5) - 0.5 * 8.0));
    const DenseMatrix j = s.ode_jacobian(0.0, y);
    CHECK(j(1, 0) == doctest::Approx(-0.1 - 0.5 * 3.0 * 4.0));
    CHECK(j(1, 1) == doctest::Approx(-40.0));
}

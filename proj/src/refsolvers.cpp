#include "stlpinn/refsolvers.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "stlpinn/error.hpp"

namespace stlpinn {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_grid(std::span<const double> t_grid) {
    if (t_grid.empty()) throw Error(Errc::InvalidConfig, "empty output grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] >= t_grid[i - 1]))
            throw Error(Errc::InvalidConfig, "output grid must be non-decreasing");
}

// RMS norm of v / scale.
double scaled_norm(std::span<const double> v, std::span<const double> scale) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double r = v[i] / scale[i];
        s += r * r;
    }
    return std::sqrt(s / static_cast<double>(v.size()));
}

void error_scale(std::span<const double> y, std::span<const double> y_new, const Tolerances& tol,
                 std::span<double> scale) {
    for (std::size_t i = 0; i < y.size(); ++i)
        scale[i] = tol.atol + tol.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
}

void numeric_jacobian(const OdeSystem& sys, double t, std::span<const double> y,
                      std::span<const double> f0, DenseMatrix& jac) {
    const std::size_t n = sys.n;
    Vector yp(y.begin(), y.end()), f1(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double delta = std::sqrt(std::numeric_limits<double>::epsilon()) *
                             std::max(1e-5, std::abs(y[j]));
        yp[j] = y[j] + delta;
        sys.rhs(t, yp, f1);
        for (std::size_t i = 0; i < n; ++i) jac(i, j) = (f1[i] - f0[i]) / delta;
        yp[j] = y[j];
    }
}

// Dormand-Prince 5(4) tableau.
namespace dp {
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// Continuous extension coefficients.
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
}  // namespace dp

// PI controller: h_new = h * safety * err^-(0.7/5) * err_prev^(0.4/5).
// The elementary controller is h_new = h * safety * err^-(1/5).
constexpr double kSafety = 0.9;
constexpr double kPiAlpha = 0.7 / 5.0;
constexpr double kPiBeta = 0.4 / 5.0;
constexpr double kMinFactor = 0.2;
constexpr double kMaxFactor = 10.0;

double initial_step(const OdeSystem& sys, double t0, std::span<const double> y0,
                    std::span<const double> f0, const Tolerances& tol, double span_len,
                    double hmax, std::size_t order) {
    const std::size_t n = sys.n;
    Vector scale(n);
    for (std::size_t i = 0; i < n; ++i) scale[i] = tol.atol + tol.rtol * std::abs(y0[i]);
    const double d0 = scaled_norm(y0, scale);
    const double d1 = scaled_norm(f0, scale);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span_len);
    Vector y1(n), f1(n), diff(n);
    for (std::size_t i = 0; i < n; ++i) y1[i] = y0[i] + h0 * f0[i];
    sys.rhs(t0 + h0, y1, f1);
    for (std::size_t i = 0; i < n; ++i) diff[i] = f1[i] - f0[i];
    const double d2 = scaled_norm(diff, scale) / h0;
    const double dmax = std::max(d1, d2);
    const double h1 = dmax <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                    : std::pow(0.01 / dmax, 1.0 / static_cast<double>(order + 1));
    return std::min({100.0 * h0, h1, hmax});
}

// Radau IIA (s = 3) coefficients.
struct RadauTableau {
    double c1, c2;
    std::array<std::array<double, 3>, 3> a;
    double dd1, dd2, dd3;  // embedded error formula
    double u1;             // inverse of the real eigenvalue of A
};

const RadauTableau& radau_tableau() {
    static const RadauTableau tab = [] {
        const double s6 = std::sqrt(6.0);
        RadauTableau r{};
        r.c1 = (4.0 - s6) / 10.0;
        r.c2 = (4.0 + s6) / 10.0;
        r.a = {{{(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0},
                {(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0},
                {(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0}}};
        r.dd1 = -(13.0 + 7.0 * s6) / 3.0;
        r.dd2 = (-13.0 + 7.0 * s6) / 3.0;
        r.dd3 = -1.0 / 3.0;
        r.u1 = 30.0 / (6.0 + std::cbrt(81.0) - std::cbrt(9.0));
        return r;
    }();
    return tab;
}

// Cubic through (0, y0), (c1, y0+z1), (c2, y0+z2), (1, y0+z3), evaluated at s.
void radau_interpolate(const RadauTableau& tab, std::span<const double> y0,
                       const std::array<Vector, 3>& z, double s, std::span<double> out) {
    const std::array<double, 4> nodes{0.0, tab.c1, tab.c2, 1.0};
    std::array<double, 4> w{};
    for (std::size_t i = 0; i < 4; ++i) {
        double l = 1.0;
        for (std::size_t j = 0; j < 4; ++j)
            if (j != i) l *= (s - nodes[j]) / (nodes[i] - nodes[j]);
        w[i] = l;
    }
    for (std::size_t k = 0; k < y0.size(); ++k)
        out[k] = y0[k] + w[1] * z[0][k] + w[2] * z[1][k] + w[3] * z[2][k];
}

}  // namespace

std::vector<double> linspace(double a, double b, std::size_t count) {
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    const double step = (b - a) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = a + step * static_cast<double>(i);
    out.back() = b;
    return out;
}

OdeSystem ode_system(const ProblemSpec& spec) {
    if (!spec.is_ode()) throw Error(Errc::Unsupported, "ODE solvers need a d = 0 problem");
    OdeSystem sys;
    sys.n = spec.n;
    sys.rhs = [&spec](double t, std::span<const double> y, std::span<double> dy) {
        const Vector r = spec.ode_rhs(t, y);
        std::copy(r.begin(), r.end(), dy.begin());
    };
    sys.jacobian = [&spec](double t, std::span<const double> y, DenseMatrix& jac) {
        jac = spec.ode_jacobian(t, y);
    };
    return sys;
}

SolverSolution rk45_solve(const OdeSystem& sys, std::span<const double> y0,
                          std::span<const double> t_grid, const Tolerances& tol) {
    using namespace dp;
    const auto start = Clock::now();
    check_grid(t_grid);
    if (y0.size() != sys.n) throw Error(Errc::DimensionMismatch, "y0 size");
    if (!(tol.rtol > 0.0) || !(tol.atol > 0.0))
        throw Error(Errc::InvalidConfig, "tolerances must be positive");
    const std::size_t n = sys.n;
    const double t0 = t_grid.front(), t_end = t_grid.back();
    const double span_len = t_end - t0;

    SolverSolution sol;
    sol.times.assign(t_grid.begin(), t_grid.end());
    sol.values = DenseMatrix(t_grid.size(), n);
    std::size_t next_out = 0;
    while (next_out < t_grid.size() && t_grid[next_out] == t0) {
        std::copy(y0.begin(), y0.end(), sol.values.row(next_out).begin());
        ++next_out;
    }
    if (next_out == t_grid.size()) {
        sol.wall_clock_s = seconds_since(start);
        return sol;
    }

    const double hmax = tol.max_step > 0.0 ? tol.max_step : span_len;
    Vector y(y0.begin(), y0.end()), y_new(n), tmp(n), err(n), scale(n);
    std::array<Vector, 7> k;
    for (auto& v : k) v.assign(n, 0.0);
    sys.rhs(t0, y, k[0]);
    sol.rhs_evals = 1;
    double h = tol.initial_step > 0.0 ? tol.initial_step
                                      : initial_step(sys, t0, y, k[0], tol, span_len, hmax, 4);
    ++sol.rhs_evals;
    double t = t0;
    double err_prev = 1e-4;
    bool last_rejected = false;
    std::array<Vector, 5> cont;
    for (auto& v : cont) v.assign(n, 0.0);

    while (next_out < t_grid.size()) {
        if (sol.total_steps() >= tol.max_steps)
            throw Error(Errc::MaxStepsExceeded, "RK45 exceeded " + std::to_string(tol.max_steps) +
                                                    " steps");
        if (h < 1e-14 * span_len)
            throw Error(Errc::StepUnderflow, "RK45 step " + std::to_string(h) + " at t = " +
                                                 std::to_string(t));
        h = std::min(h, hmax);
        if (t + 1.01 * h >= t_end) h = t_end - t;

        auto stage = [&](std::size_t idx, double c, std::initializer_list<double> coefs) {
            std::size_t j = 0;
            for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i];
            for (double a : coefs) {
                if (a != 0.0)
                    for (std::size_t i = 0; i < n; ++i) tmp[i] += h * a * k[j][i];
                ++j;
            }
            sys.rhs(t + c * h, tmp, k[idx]);
        };
        stage(1, c2, {a21});
        stage(2, c3, {a31, a32});
        stage(3, c4, {a41, a42, a43});
        stage(4, c5, {a51, a52, a53, a54});
        stage(5, 1.0, {a61, a62, a63, a64, a65});
        for (std::size_t i = 0; i < n; ++i)
            y_new[i] = y[i] + h * (a71 * k[0][i] + a73 * k[2][i] + a74 * k[3][i] +
                                   a75 * k[4][i] + a76 * k[5][i]);
        sys.rhs(t + h, y_new, k[6]);
        sol.rhs_evals += 6;

        for (std::size_t i = 0; i < n; ++i)
            err[i] = h * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] +
                          e6 * k[5][i] + e7 * k[6][i]);
        error_scale(y, y_new, tol, scale);
        const double en = scaled_norm(err, scale);
        if (!std::isfinite(en)) {
            ++sol.rejected_steps;
            h *= kMinFactor;
            last_rejected = true;
            continue;
        }

        if (en <= 1.0) {
            // Dense output coefficients for this step.
            for (std::size_t i = 0; i < n; ++i) {
                const double ydiff = y_new[i] - y[i];
                const double bspl = h * k[0][i] - ydiff;
                cont[0][i] = y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                cont[4][i] = h * (d1 * k[0][i] + d3 * k[2][i] + d4 * k[3][i] + d5 * k[4][i] +
                                  d6 * k[5][i] + d7 * k[6][i]);
            }
            const double t_new = t + h;
            while (next_out < t_grid.size() &&
                   (t_grid[next_out] <= t_new || (t_new == t_end))) {
                auto row = sol.values.row(next_out);
                if (t_grid[next_out] == t_new) {
                    std::copy(y_new.begin(), y_new.end(), row.begin());
                } else {
                    const double s = (t_grid[next_out] - t) / h;
                    const double s1 = 1.0 - s;
                    for (std::size_t i = 0; i < n; ++i)
                        row[i] = cont[0][i] +
                                 s * (cont[1][i] +
                                      s1 * (cont[2][i] + s * (cont[3][i] + s1 * cont[4][i])));
                }
                ++next_out;
            }
            ++sol.accepted_steps;
            t = t_new;
            y.swap(y_new);
            k[0] = k[6];
            const double e = std::max(en, 1e-10);
            double factor = tol.control == StepControl::PI
                                ? kSafety * std::pow(e, -kPiAlpha) * std::pow(err_prev, kPiBeta)
                                : kSafety * std::pow(e, -0.2);
            factor = std::clamp(factor, kMinFactor, kMaxFactor);
            if (last_rejected) factor = std::min(factor, 1.0);
            h *= factor;
            err_prev = std::max(en, 1e-4);
            last_rejected = false;
        } else {
            ++sol.rejected_steps;
            h *= std::max(kMinFactor, kSafety * std::pow(en, -0.2));
            last_rejected = true;
        }
    }
    sol.wall_clock_s = seconds_since(start);
    return sol;
}

SolverSolution rk45_solve(const ProblemSpec& spec, const Tolerances& tol,
                          std::span<const double> t_grid) {
    const auto start = Clock::now();
    SolverSolution sol = rk45_solve(ode_system(spec), spec.y0, t_grid, tol);
    sol.wall_clock_s = seconds_since(start);
    return sol;
}

SolverSolution radau_solve(const OdeSystem& sys, std::span<const double> y0,
                           std::span<const double> t_grid, const Tolerances& tol) {
    const auto start = Clock::now();
    check_grid(t_grid);
    if (y0.size() != sys.n) throw Error(Errc::DimensionMismatch, "y0 size");
    if (!(tol.rtol > 0.0) || !(tol.atol > 0.0))
        throw Error(Errc::InvalidConfig, "tolerances must be positive");
    const RadauTableau& tab = radau_tableau();
    const std::size_t n = sys.n;
    const double t0 = t_grid.front(), t_end = t_grid.back();
    const double span_len = t_end - t0;
    constexpr int kMaxNewton = 7;
    constexpr double kNewtonTol = 0.03;  // on the scaled increment norm
    constexpr double kJacobianReuse = 1e-3;
    constexpr double kFacMin = 0.125, kFacMax = 5.0;  // 1/5 <= h_new/h <= 8

    SolverSolution sol;
    sol.times.assign(t_grid.begin(), t_grid.end());
    sol.values = DenseMatrix(t_grid.size(), n);
    std::size_t next_out = 0;
    while (next_out < t_grid.size() && t_grid[next_out] == t0) {
        std::copy(y0.begin(), y0.end(), sol.values.row(next_out).begin());
        ++next_out;
    }
    if (next_out == t_grid.size()) {
        sol.wall_clock_s = seconds_since(start);
        return sol;
    }

    const double hmax = tol.max_step > 0.0 ? tol.max_step : span_len;
    Vector y(y0.begin(), y0.end()), f0(n), scale(n), y_new(n), tmp(n);
    DenseMatrix jac(n, n);
    auto eval_jacobian = [&](double t) {
        if (sys.jacobian) sys.jacobian(t, y, jac);
        else numeric_jacobian(sys, t, y, f0, jac);
        ++sol.jacobian_evals;
    };
    sys.rhs(t0, y, f0);
    sol.rhs_evals = 1;
    double h = tol.initial_step > 0.0 ? tol.initial_step
                                      : initial_step(sys, t0, y, f0, tol, span_len, hmax, 4);
    ++sol.rhs_evals;
    double t = t0;
    eval_jacobian(t);
    bool need_jacobian = false;
    bool need_factor = true;
    bool first = true, rejected = false;
    double h_factored = 0.0, faccon = 1.0, theta = 1.0;
    Factorization newton_lu, err_lu;

    std::array<Vector, 3> z, z_prev, f_stage;
    for (auto* arr : {&z, &z_prev, &f_stage})
        for (auto& v : *arr) v.assign(n, 0.0);
    Vector y_prev(n);
    double h_prev = 0.0;
    bool have_prev = false;
    const std::size_t m = 3 * n;
    Vector rhs(m);

    while (next_out < t_grid.size()) {
        if (sol.total_steps() >= tol.max_steps)
            throw Error(Errc::MaxStepsExceeded, "Radau exceeded " + std::to_string(tol.max_steps) +
                                                    " steps");
        if (h < 1e-14 * span_len)
            throw Error(Errc::StepUnderflow, "Radau step " + std::to_string(h) + " at t = " +
                                                 std::to_string(t));
        h = std::min(h, hmax);
        if (t + 1.01 * h >= t_end) h = t_end - t;

        if (need_jacobian) {
            eval_jacobian(t);
            need_jacobian = false;
            need_factor = true;
        }
        if (need_factor || h != h_factored) {
            DenseMatrix big(m, m);
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t j = 0; j < 3; ++j)
                    for (std::size_t r = 0; r < n; ++r)
                        for (std::size_t c = 0; c < n; ++c)
                            big(i * n + r, j * n + c) =
                                (i == j && r == c ? 1.0 : 0.0) - h * tab.a[i][j] * jac(r, c);
            DenseMatrix e(n, n);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = 0; c < n; ++c)
                    e(r, c) = (r == c ? tab.u1 / h : 0.0) - jac(r, c);
            try {
                newton_lu = factorize(big);
                err_lu = factorize(e);
            } catch (const Error& err) {
                if (err.code() != Errc::SingularMatrix) throw;
                ++sol.rejected_steps;
                h *= 0.5;
                continue;
            }
            sol.factorizations += 2;
            h_factored = h;
            need_factor = false;
        }

        // Starting values from the previous collocation polynomial.
        const std::array<double, 3> cs{tab.c1, tab.c2, 1.0};
        if (first || !have_prev) {
            for (auto& v : z) std::fill(v.begin(), v.end(), 0.0);
        } else {
            for (std::size_t i = 0; i < 3; ++i) {
                radau_interpolate(tab, y_prev, z_prev, 1.0 + cs[i] * h / h_prev, tmp);
                for (std::size_t k = 0; k < n; ++k) z[i][k] = tmp[k] - y[k];
            }
        }
        for (std::size_t k = 0; k < n; ++k) scale[k] = tol.atol + tol.rtol * std::abs(y[k]);

        // Simplified Newton iterations.
        faccon = std::pow(std::max(faccon, std::numeric_limits<double>::epsilon()), 0.8);
        theta = std::abs(theta);
        double dyno_old = 0.0;
        bool converged = false, diverged = false;
        int newt = 0;
        for (; newt < kMaxNewton; ++newt) {
            for (std::size_t i = 0; i < 3; ++i) {
                for (std::size_t k = 0; k < n; ++k) tmp[k] = y[k] + z[i][k];
                sys.rhs(t + cs[i] * h, tmp, f_stage[i]);
            }
            sol.rhs_evals += 3;
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t k = 0; k < n; ++k) {
                    double g = -z[i][k];
                    for (std::size_t j = 0; j < 3; ++j) g += h * tab.a[i][j] * f_stage[j][k];
                    rhs[i * n + k] = g;
                }
            const Vector dz = solve(newton_lu, rhs);
            double dyno = 0.0;
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t k = 0; k < n; ++k) {
                    const double r = dz[i * n + k] / scale[k];
                    dyno += r * r;
                }
            dyno = std::sqrt(dyno / static_cast<double>(m));
            if (!std::isfinite(dyno)) {
                diverged = true;
                break;
            }
            if (newt >= 1) {
                const double thq = dyno / std::max(dyno_old, 1e-300);
                theta = thq;
                if (theta >= 0.99) {
                    diverged = true;
                    break;
                }
                faccon = theta / (1.0 - theta);
            }
            dyno_old = dyno;
            for (std::size_t i = 0; i < 3; ++i)
                for (std::size_t k = 0; k < n; ++k) z[i][k] += dz[i * n + k];
            if (faccon * dyno <= kNewtonTol) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            ++sol.rejected_steps;
            if (diverged && !sys.jacobian && newt == 0)
                throw Error(Errc::NewtonDivergence, "non-finite Newton increment at t = " +
                                                        std::to_string(t));
            h *= 0.5;
            need_jacobian = true;
            rejected = true;
            if (h < 1e-14 * span_len)
                throw Error(Errc::NewtonDivergence, "Newton failed to converge at t = " +
                                                        std::to_string(t));
            continue;
        }

        // Error estimate.
        for (std::size_t k = 0; k < n; ++k) {
            y_new[k] = y[k] + z[2][k];
            scale[k] = tol.atol + tol.rtol * std::max(std::abs(y[k]), std::abs(y_new[k]));
        }
        Vector f2(n), cont(n);
        for (std::size_t k = 0; k < n; ++k) {
            f2[k] = (tab.dd1 * z[0][k] + tab.dd2 * z[1][k] + tab.dd3 * z[2][k]) / h;
            cont[k] = f2[k] + f0[k];
        }
        Vector errv = solve(err_lu, cont);
        double err = std::max(scaled_norm(errv, scale), 1e-10);
        if (err >= 1.0 && (first || rejected)) {
            for (std::size_t k = 0; k < n; ++k) tmp[k] = y[k] + errv[k];
            Vector f1(n);
            sys.rhs(t, tmp, f1);
            ++sol.rhs_evals;
            for (std::size_t k = 0; k < n; ++k) cont[k] = f1[k] + f2[k];
            errv = solve(err_lu, cont);
            err = std::max(scaled_norm(errv, scale), 1e-10);
        }

        const double fac = std::min(kSafety, kSafety * (2 * kMaxNewton + 1) /
                                                 static_cast<double>(newt + 1 + 2 * kMaxNewton));
        const double quot = std::clamp(std::pow(err, 0.25) / fac, kFacMin, kFacMax);
        double h_new = h / quot;

        if (err < 1.0) {
            const double t_new = t + h;
            while (next_out < t_grid.size() && (t_grid[next_out] <= t_new || t_new == t_end)) {
                auto row = sol.values.row(next_out);
                if (t_grid[next_out] == t_new) {
                    std::copy(y_new.begin(), y_new.end(), row.begin());
                } else {
                    radau_interpolate(tab, y, z, (t_grid[next_out] - t) / h, row);
                }
                ++next_out;
            }
            ++sol.accepted_steps;
            y_prev = y;
            z_prev = z;
            h_prev = h;
            have_prev = true;
            y = y_new;
            t = t_new;
            first = false;
            sys.rhs(t, y, f0);
            ++sol.rhs_evals;
            if (rejected) h_new = std::min(h_new, h);
            rejected = false;
            need_jacobian = theta > kJacobianReuse;
            // Keep the factorization when the step barely changes.
            const double ratio = h_new / h;
            if (!need_jacobian && ratio >= 1.0 && ratio <= 1.2) h_new = h;
            h = h_new;
        } else {
            ++sol.rejected_steps;
            rejected = true;
            h = first ? h * 0.1 : h_new;
        }
    }
    sol.wall_clock_s = seconds_since(start);
    return sol;
}

SolverSolution radau_solve(const ProblemSpec& spec, const Tolerances& tol,
                           std::span<const double> t_grid) {
    const auto start = Clock::now();
    SolverSolution sol = radau_solve(ode_system(spec), spec.y0, t_grid, tol);
    sol.wall_clock_s = seconds_since(start);
    return sol;
}

double superbee(double r) noexcept {
    return std::max({0.0, std::min(2.0 * r, 1.0), std::min(r, 2.0)});
}

void lw_superbee_advect(std::span<double> cells, double mu, double dx, double dt) {
    if (!(dx > 0.0) || !(dt >= 0.0)) throw Error(Errc::InvalidConfig, "dx and dt must be positive");
    const double nu = std::abs(mu) * dt / dx;
    if (nu > 1.0 + 1e-12)
        throw Error(Errc::CFLViolation, "CFL number " + std::to_string(nu) + " exceeds 1");
    const std::size_t n = cells.size();
    if (n == 0 || mu == 0.0 || dt == 0.0) return;
    // Work in the upwind direction: reverse the array for negative speeds.
    std::vector<double> u(n + 4, 0.0);  // two zero ghost cells per side
    for (std::size_t i = 0; i < n; ++i) u[i + 2] = mu > 0.0 ? cells[i] : cells[n - 1 - i];
    const double speed = std::abs(mu);
    // flux[i] is the flux through the interface between ghost-shifted cells i+1 and i+2.
    std::vector<double> flux(n + 1);
    for (std::size_t f = 0; f <= n; ++f) {
        const std::size_t left = f + 1;  // upwind cell of this interface
        const double jump = u[left + 1] - u[left];
        const double upwind_jump = u[left] - u[left - 1];
        double correction = 0.0;
        if (jump != 0.0) correction = superbee(upwind_jump / jump) * jump;
        flux[f] = speed * u[left] + 0.5 * speed * (1.0 - nu) * correction;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double updated = u[i + 2] - dt / dx * (flux[i + 1] - flux[i]);
        if (mu > 0.0) cells[i] = updated;
        else cells[n - 1 - i] = updated;
    }
}

void ar_reaction_substep(std::span<double> y1, std::span<double> y2, double alpha, double k1,
                         double k2, double dt) {
    if (y1.size() != y2.size()) throw Error(Errc::DimensionMismatch, "component sizes differ");
    // Modes: total mass (eigenvalue 0) and the imbalance k1 y1 - k2 y2 (-alpha (k1 + k2)).
    const double ksum = k1 + k2;
    const double decay = std::exp(-alpha * ksum * dt);
    for (std::size_t i = 0; i < y1.size(); ++i) {
        const double mass = y1[i] + y2[i];
        const double imbalance = (k1 * y1[i] - k2 * y2[i]) * decay;
        y1[i] = (imbalance + k2 * mass) / ksum;
        y2[i] = mass - y1[i];
    }
}

std::vector<double> ar_cell_centres(double L, std::size_t cells) {
    std::vector<double> x(cells);
    const double dx = L / static_cast<double>(cells);
    for (std::size_t i = 0; i < cells; ++i) x[i] = (static_cast<double>(i) + 0.5) * dx;
    return x;
}

SolverSolution godunov_split_solve(const ProblemSpec& spec, const ArGrid& grid,
                                   std::span<const double> t_grid, const Tolerances& tol) {
    const auto start = Clock::now();
    if (spec.family != Family::AR || spec.d != 1)
        throw Error(Errc::Unsupported, "Godunov splitting is implemented for the AR family");
    check_grid(t_grid);
    if (grid.cells < 2) throw Error(Errc::InvalidConfig, "need at least two cells");
    if (!(grid.cfl > 0.0) || grid.cfl > 1.0)
        throw Error(Errc::CFLViolation, "CFL number must lie in (0, 1]");
    const double L = spec.L.at(0);
    const double mu = spec.C.at(0)(0, 0);
    const double alpha = spec.alpha, k1 = spec.params.k1, k2 = spec.params.k2;
    const std::size_t nx = grid.cells;
    const double dx = L / static_cast<double>(nx);
    const double dt_cfl = mu != 0.0 ? grid.cfl * dx / std::abs(mu)
                                    : std::numeric_limits<double>::infinity();

    SolverSolution sol;
    sol.times.assign(t_grid.begin(), t_grid.end());
    sol.space = ar_cell_centres(L, nx);
    sol.values = DenseMatrix(t_grid.size() * nx, 2);
    std::vector<double> y1(nx), y2(nx);
    for (std::size_t i = 0; i < nx; ++i) {
        const double x[1] = {sol.space[i]};
        const Vector v = spec.ic(x);
        y1[i] = v[0];
        y2[i] = v[1];
    }

    auto radau_reaction = [&](double dt) {
        OdeSystem sys;
        sys.n = 2;
        const DenseMatrix& a = spec.A;
        sys.rhs = [&a](double, std::span<const double> y, std::span<double> dy) {
            dy[0] = -(a(0, 0) * y[0] + a(0, 1) * y[1]);
            dy[1] = -(a(1, 0) * y[0] + a(1, 1) * y[1]);
        };
        sys.jacobian = [&a](double, std::span<const double>, DenseMatrix& j) { j = -1.0 * a; };
        const std::array<double, 2> ends{0.0, dt};
        for (std::size_t i = 0; i < nx; ++i) {
            const std::array<double, 2> y{y1[i], y2[i]};
            const SolverSolution s = radau_solve(sys, y, ends, tol);
            y1[i] = s.values(1, 0);
            y2[i] = s.values(1, 1);
        }
    };

    double t = t_grid.front();
    for (std::size_t out = 0; out < t_grid.size(); ++out) {
        while (t < t_grid[out]) {
            double dt = std::min(dt_cfl, t_grid[out] - t);
            if (t + dt >= t_grid[out] * (1.0 - 1e-15)) dt = t_grid[out] - t;
            lw_superbee_advect(y1, mu, dx, dt);
            lw_superbee_advect(y2, mu, dx, dt);
            if (grid.reaction == ReactionSubstep::Exact)
                ar_reaction_substep(y1, y2, alpha, k1, k2, dt);
            else
                radau_reaction(dt);
            t = (dt == t_grid[out] - t) ? t_grid[out] : t + dt;
            ++sol.accepted_steps;
        }
        for (std::size_t i = 0; i < nx; ++i) {
            sol.values(out * nx + i, 0) = y1[i];
            sol.values(out * nx + i, 1) = y2[i];
        }
    }
    sol.wall_clock_s = seconds_since(start);
    return sol;
}

}  // namespace stlpinn

#pragma once

#include <array>
#include <complex>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stlpinn/linalg.hpp"

namespace stlpinn {

enum class Family { OHO, NCFF, Duffing, AR };

std::string_view family_name(Family f) noexcept;
/// Accepts the canonical names case-insensitively. Throws UnknownFamily.
Family parse_family(std::string_view name);

/// Polynomial term beta * y[source]^q added to row `target` of the system.
struct Nonlinearity {
    std::size_t target = 1;
    std::size_t source = 0;
    int q = 3;
    double beta = 0.5;
};

/// Family parameters. Unused fields are ignored by families that do not need them.
struct FamilyParams {
    std::optional<Vector> y0;  // ODE initial value; family default when empty
    double omega = 1.0;        // NCFF forcing frequency
    double beta = 0.5;         // Duffing nonlinearity strength
    double duffing_a21 = 0.1;  // Duffing restoring coefficient (A[1][0])
    double mu = 1.8e-4;        // AR wind speed
    double k1 = 1e-3;
    double k2 = 2e-3;
    double y0max = 1.0;        // AR spline peak
    double T = 1.0;
    double L = 1.0;

    friend bool operator==(const FamilyParams&, const FamilyParams&) = default;
};

using PointFunction = std::function<Vector(std::span<const double>)>;

/// sum_j C_j dy/dx_j + B dy/dt + A y + beta g(y) = f(t, x), on t in [0,T], x_j in [0,L_j].
struct ProblemSpec {
    Family family = Family::OHO;
    std::size_t n = 2;
    std::size_t d = 0;
    DenseMatrix A;
    DenseMatrix B;
    std::vector<DenseMatrix> C;
    PointFunction forcing;  // x = (t, x_1..x_d) -> R^n
    std::optional<Nonlinearity> nonlinearity;
    double T = 1.0;
    std::vector<double> L;
    PointFunction ic;  // spatial coordinates -> R^n (empty span for ODEs)
    PointFunction bc;  // (t, x) on the spatial boundary -> R^n
    Vector y0;         // ODE initial value
    double alpha = 0.0;
    FamilyParams params;

    bool is_ode() const noexcept { return d == 0; }
    bool is_linear() const noexcept { return !nonlinearity.has_value(); }

    /// Right-hand side of dy/dt = B^{-1}(f - A y - beta g(y)) for ODE specs.
    Vector ode_rhs(double t, std::span<const double> y) const;
    /// Jacobian of ode_rhs with respect to y.
    DenseMatrix ode_jacobian(double t, std::span<const double> y) const;
};

/// Builds the matrix form of a family instance. Throws UnknownFamily, InvalidAlpha.
ProblemSpec instantiate(Family family, double alpha, const FamilyParams& params = {});

struct StiffnessReport {
    std::array<std::complex<double>, 2> eigenvalues;
    double ratio = 1.0;
};

/// Eigenvalues of -B^{-1}A and max|l|/min|l|. Throws Unsupported, ZeroEigenvalue.
StiffnessReport stiffness_ratio(const ProblemSpec& spec);

/// Closed-form overdamped oscillator solution (alpha > 2). Throws RepeatedRoot.
std::array<double, 2> analytic_oho(double alpha, std::span<const double> y0, double t);

/// Closed-form NCFF solution: sinusoidal particular part plus fitted homogeneous modes.
/// Throws ResonantFrequency, InvalidAlpha.
std::array<double, 2> analytic_ncff(double alpha, double omega, std::span<const double> y0,
                                    double t);

/// Clamped cubic spline bump through {0, L/4, L/2, 3L/4, L} -> {0, p/2, p, p/2, 0} with zero
/// end slopes. Throws OutOfDomain.
double spline_ic(double y0max, double L, double x);

/// Drops the polynomial term. A linear input is returned unchanged.
ProblemSpec linearize(const ProblemSpec& spec);

}  // namespace stlpinn

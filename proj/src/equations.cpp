#include "stlpinn/equations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "stlpinn/error.hpp"

namespace stlpinn {

namespace {

Vector zero_vector(std::size_t n) { return Vector(n, 0.0); }

DenseMatrix inverse2x2(const DenseMatrix& m) {
    const double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    if (det == 0.0) throw Error(Errc::SingularMatrix, "B is singular");
    return DenseMatrix{{m(1, 1) / det, -m(0, 1) / det}, {-m(1, 0) / det, m(0, 0) / det}};
}

// Solves B x = r for the small systems here.
Vector apply_b_inverse(const DenseMatrix& B, std::span<const double> r) {
    bool identity = true;
    for (std::size_t i = 0; i < B.rows(); ++i)
        for (std::size_t j = 0; j < B.cols(); ++j)
            if (B(i, j) != (i == j ? 1.0 : 0.0)) identity = false;
    if (identity) return Vector(r.begin(), r.end());
    return solve(factorize(B), r);
}

}  // namespace

std::string_view family_name(Family f) noexcept {
    switch (f) {
        case Family::OHO: return "OHO";
        case Family::NCFF: return "NCFF";
        case Family::Duffing: return "Duffing";
        case Family::AR: return "AR";
    }
    return "?";
}

Family parse_family(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "oho") return Family::OHO;
    if (lower == "ncff") return Family::NCFF;
    if (lower == "duffing") return Family::Duffing;
    if (lower == "ar") return Family::AR;
    throw Error(Errc::UnknownFamily, "unknown equation family '" + std::string(name) + "'");
}

Vector ProblemSpec::ode_rhs(double t, std::span<const double> y) const {
    if (y.size() != n) throw Error(Errc::DimensionMismatch, "state size");
    const double tt[1] = {t};
    Vector r = forcing ? forcing(tt) : zero_vector(n);
    const Vector ay = A * y;
    for (std::size_t i = 0; i < n; ++i) r[i] -= ay[i];
    if (nonlinearity)
        r[nonlinearity->target] -= nonlinearity->beta * std::pow(y[nonlinearity->source], nonlinearity->q);
    return apply_b_inverse(B, r);
}

DenseMatrix ProblemSpec::ode_jacobian(double, std::span<const double> y) const {
    DenseMatrix j = -1.0 * A;
    if (nonlinearity) {
        const auto& nl = *nonlinearity;
        j(nl.target, nl.source) -= nl.beta * nl.q * std::pow(y[nl.source], nl.q - 1);
    }
    bool identity = true;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            if (B(i, k) != (i == k ? 1.0 : 0.0)) identity = false;
    if (identity) return j;
    if (n != 2) throw Error(Errc::Unsupported, "non-identity B only supported for n = 2");
    return inverse2x2(B) * j;
}

ProblemSpec instantiate(Family family, double alpha, const FamilyParams& params) {
    if (!std::isfinite(alpha) || alpha < 0.0)
        throw Error(Errc::InvalidAlpha, "alpha must be finite and non-negative, got " +
                                            std::to_string(alpha));
    if (!(params.T > 0.0)) throw Error(Errc::InvalidConfig, "T must be positive");
    ProblemSpec s;
    s.family = family;
    s.alpha = alpha;
    s.params = params;
    s.n = 2;
    s.T = params.T;
    s.B = DenseMatrix::identity(2);
    auto ode_y0 = [&](Vector fallback) {
        Vector y0 = params.y0.value_or(std::move(fallback));
        if (y0.size() != 2) throw Error(Errc::InvalidConfig, "y0 must have two entries");
        return y0;
    };

    switch (family) {
        case Family::OHO:
            s.A = DenseMatrix{{0.0, -1.0}, {1.0, alpha}};
            s.forcing = [](std::span<const double>) { return Vector{0.0, 0.0}; };
            s.y0 = ode_y0({1.0, 0.5});
            break;
        case Family::NCFF: {
            s.A = DenseMatrix{{2.0, -1.0}, {1.0 - alpha, alpha}};
            const double w = params.omega;
            s.forcing = [w, alpha](std::span<const double> x) {
                const double t = x[0];
                return Vector{2.0 * std::sin(w * t), alpha * (std::cos(w * t) - std::sin(w * t))};
            };
            s.y0 = ode_y0({2.0, 4.0});
            break;
        }
        case Family::Duffing:
            if (params.beta < 0.0 || params.beta > 1.0)
                throw Error(Errc::InvalidConfig, "Duffing beta must lie in [0, 1]");
            s.A = DenseMatrix{{0.0, -1.0}, {params.duffing_a21, alpha}};
            s.forcing = [](std::span<const double> x) { return Vector{0.0, std::cos(x[0])}; };
            s.nonlinearity = Nonlinearity{1, 0, 3, params.beta};
            s.y0 = ode_y0({1.0, 0.5});
            break;
        case Family::AR: {
            if (!(params.L > 0.0)) throw Error(Errc::InvalidConfig, "L must be positive");
            s.d = 1;
            s.L = {params.L};
            s.C = {params.mu * DenseMatrix::identity(2)};
            s.A = DenseMatrix{{alpha * params.k1, -alpha * params.k2},
                              {-alpha * params.k1, alpha * params.k2}};
            s.forcing = [](std::span<const double>) { return Vector{0.0, 0.0}; };
            const double peak = params.y0max;
            const double len = params.L;
            s.ic = [peak, len](std::span<const double> x) {
                const double v = spline_ic(peak, len, x[0]);
                return Vector{v, v};
            };
            s.bc = [](std::span<const double>) { return Vector{0.0, 0.0}; };
            break;
        }
        default:
            throw Error(Errc::UnknownFamily, "unhandled family");
    }
    if (s.is_ode()) {
        const Vector y0 = s.y0;
        s.ic = [y0](std::span<const double>) { return y0; };
    }
    return s;
}

StiffnessReport stiffness_ratio(const ProblemSpec& spec) {
    if (spec.n != 2)
        throw Error(Errc::Unsupported, "stiffness ratio implemented for n = 2 only");
    const DenseMatrix jac = inverse2x2(spec.B) * (-1.0 * spec.A);
    StiffnessReport report;
    report.eigenvalues = eig2x2(jac);
    const double big = std::abs(report.eigenvalues[0]);
    const double small = std::abs(report.eigenvalues[1]);
    if (small < 1e-300) throw Error(Errc::ZeroEigenvalue, "Jacobian has a zero eigenvalue");
    report.ratio = big / small;
    return report;
}

std::array<double, 2> analytic_oho(double alpha, std::span<const double> y0, double t) {
    if (!(alpha > 2.0)) throw Error(Errc::RepeatedRoot, "analytic OHO needs alpha > 2");
    if (y0.size() != 2) throw Error(Errc::DimensionMismatch, "y0 must have two entries");
    // Roots of l^2 + alpha l + 1; the product is 1, so compute the large one first.
    const double disc = std::sqrt(alpha * alpha - 4.0);
    const double fast = (-alpha - disc) / 2.0;
    const double slow = 1.0 / fast;
    // y1 = c_s e^{slow t} + c_f e^{fast t}, y1' = slow c_s e^{..} + fast c_f e^{..}
    const double cf = (y0[1] - slow * y0[0]) / (fast - slow);
    const double cs = y0[0] - cf;
    const double es = std::exp(slow * t);
    const double ef = std::exp(fast * t);
    return {cs * es + cf * ef, slow * cs * es + fast * cf * ef};
}

std::array<double, 2> analytic_ncff(double alpha, double omega, std::span<const double> y0,
                                    double t) {
    if (!(alpha > 0.0)) throw Error(Errc::InvalidAlpha, "analytic NCFF needs alpha > 0");
    if (y0.size() != 2) throw Error(Errc::DimensionMismatch, "y0 must have two entries");
    const DenseMatrix a{{2.0, -1.0}, {1.0 - alpha, alpha}};
    // y_p = c cos(wt) + s sin(wt):  A c + w s = f_cos,  A s - w c = f_sin
    DenseMatrix freq(4, 4);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            freq(i, j) = a(i, j);
            freq(i + 2, j + 2) = a(i, j);
        }
    for (std::size_t i = 0; i < 2; ++i) {
        freq(i, i + 2) = omega;
        freq(i + 2, i) = -omega;
    }
    const Vector rhs{0.0, alpha, 2.0, -alpha};
    Vector coef;
    try {
        coef = solve(factorize(freq), rhs);
    } catch (const Error& e) {
        if (e.code() == Errc::SingularMatrix)
            throw Error(Errc::ResonantFrequency, "frequency-domain system is singular");
        throw;
    }
    const double c = std::cos(omega * t), s = std::sin(omega * t);
    const std::array<double, 2> particular{coef[0] * c + coef[2] * s, coef[1] * c + coef[3] * s};
    // Homogeneous modes of y' = -A y: eigenvalue 1 with (1, 1), eigenvalue alpha+1 with
    // (1, 1-alpha).
    const double r0 = y0[0] - coef[0];
    const double r1 = y0[1] - coef[1];
    const double k2 = (r0 - r1) / alpha;  // solves k1 + k2 = r0, k1 + (1-alpha) k2 = r1
    const double k1 = r0 - k2;
    const double e1 = std::exp(-t);
    const double e2 = std::exp(-(alpha + 1.0) * t);
    return {particular[0] + k1 * e1 + k2 * e2,
            particular[1] + k1 * e1 + (1.0 - alpha) * k2 * e2};
}

double spline_ic(double y0max, double L, double x) {
    if (!(L > 0.0)) throw Error(Errc::OutOfDomain, "spline length must be positive");
    if (x < 0.0 || x > L || std::isnan(x))
        throw Error(Errc::OutOfDomain, "x = " + std::to_string(x) + " outside [0, L]");
    constexpr int kKnots = 5;
    const double h = L / 4.0;
    const std::array<double, kKnots> v{0.0, 0.5 * y0max, y0max, 0.5 * y0max, 0.0};

    // Second-derivative system of the clamped spline (zero end slopes), Thomas algorithm.
    std::array<double, kKnots> sub{}, diag{}, sup{}, rhs{};
    diag[0] = 2.0 * h;
    sup[0] = h;
    rhs[0] = 6.0 * ((v[1] - v[0]) / h);
    for (int i = 1; i < kKnots - 1; ++i) {
        sub[i] = h;
        diag[i] = 4.0 * h;
        sup[i] = h;
        rhs[i] = 6.0 * ((v[i + 1] - v[i]) / h - (v[i] - v[i - 1]) / h);
    }
    sub[kKnots - 1] = h;
    diag[kKnots - 1] = 2.0 * h;
    rhs[kKnots - 1] = 6.0 * (-(v[kKnots - 1] - v[kKnots - 2]) / h);
    for (int i = 1; i < kKnots; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::array<double, kKnots> m{};
    m[kKnots - 1] = rhs[kKnots - 1] / diag[kKnots - 1];
    for (int i = kKnots - 2; i >= 0; --i) m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];

    const int seg = std::min(static_cast<int>(x / h), kKnots - 2);
    const double xl = seg * h, xr = (seg + 1) * h;
    const double a = xr - x, b = x - xl;
    return m[seg] * a * a * a / (6.0 * h) + m[seg + 1] * b * b * b / (6.0 * h) +
           (v[seg] / h - m[seg] * h / 6.0) * a + (v[seg + 1] / h - m[seg + 1] * h / 6.0) * b;
}

ProblemSpec linearize(const ProblemSpec& spec) {
    ProblemSpec out = spec;
    out.nonlinearity.reset();
    return out;
}

}  // namespace stlpinn

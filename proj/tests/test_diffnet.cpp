#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "stlpinn/diffnet.hpp"
#include "stlpinn/error.hpp"

using namespace stlpinn;

namespace {

Eigen::MatrixXd column_points(std::initializer_list<double> ts) {
    Eigen::MatrixXd p(1, static_cast<Eigen::Index>(ts.size()));
    Eigen::Index j = 0;
    for (double t : ts) p(0, j++) = t;
    return p;
}

// Loss mixing values, tangents and a linear head so every backward path is exercised.
struct MixedLoss {
    Eigen::VectorXd a, c;  // weights on h and dh/dt
    Eigen::MatrixXd head;  // 2 x m

    LossValue operator()(std::span<const FeatureBatch> fb) const {
        LossValue out;
        out.head_grads.push_back(Eigen::MatrixXd::Zero(head.rows(), head.cols()));
        for (const FeatureBatch& f : fb) {
            BatchAdjoint seed{Eigen::MatrixXd::Zero(f.h.rows(), f.h.cols()), {}};
            for (const auto& d : f.dh) seed.dh.push_back(Eigen::MatrixXd::Zero(d.rows(), d.cols()));
            for (Eigen::Index p = 0; p < f.h.cols(); ++p) {
                // r = head * (h .* a + dh_t .* c); loss += |r|^2
                Eigen::VectorXd mix = f.h.col(p).cwiseProduct(a);
                if (!f.dh.empty()) mix += f.dh[0].col(p).cwiseProduct(c);
                const Eigen::VectorXd r = head * mix;
                out.loss += r.squaredNorm();
                const Eigen::VectorXd g_mix = 2.0 * head.transpose() * r;
                out.head_grads[0] += 2.0 * r * mix.transpose();
                seed.h.col(p) += g_mix.cwiseProduct(a);
                if (!f.dh.empty()) seed.dh[0].col(p) += g_mix.cwiseProduct(c);
            }
            out.seeds.push_back(std::move(seed));
        }
        return out;
    }
};

double eval_loss(const BaseNetwork& net, std::span<const PointBatch> batches, const MixedLoss& l) {
    std::vector<FeatureBatch> fb;
    for (const auto& b : batches) fb.push_back(forward_batch(net, b));
    return l(fb).loss;
}

}  // namespace

TEST_CASE("silu values") {
    CHECK(silu(0.0).value == 0.0);
    CHECK(silu(0.0).derivative == 0.5);
    CHECK(silu(40.0).value == doctest::Approx(40.0));
    CHECK(silu(40.0).derivative == doctest::Approx(1.0));
    CHECK(silu(-800.0).value == doctest::Approx(0.0));
    CHECK(std::isfinite(silu(-800.0).derivative));
    CHECK(silu(1.0).value == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    const double h = 1e-5;
    for (double z : {-3.0, -0.4, 1.0, 2.5}) {
        const double fd = (silu(z + h).value - silu(z - h).value) / (2 * h);
        CHECK(silu(z).derivative == doctest::Approx(fd).epsilon(1e-9));
        const double fd2 = (silu(z + h).derivative - silu(z - h).derivative) / (2 * h);
        CHECK(silu_second(z) == doctest::Approx(fd2).epsilon(1e-8));
    }
}

TEST_CASE("init shapes and determinism") {
    const BaseNetwork a = BaseNetwork::init({1, 128, 128, 256}, 42);
    CHECK(a.feature_dim() == 256);
    CHECK(a.layers().size() == 3);
    CHECK(a.parameter_count() == 128 + 128 + 128 * 128 + 128 + 128 * 256 + 256);
    const BaseNetwork b = BaseNetwork::init({1, 128, 128, 256}, 42);
    CHECK(a.flatten() == b.flatten());
    const BaseNetwork c = BaseNetwork::init({1, 128, 128, 256}, 43);
    CHECK(a.flatten() != c.flatten());
    const BaseNetwork pde = BaseNetwork::init({2, 128, 128, 256, 256, 512}, 7);
    CHECK(pde.feature_dim() == 512);
    CHECK(pde.input_dim() == 2);

    for (const auto& layer : a.layers()) {
        CHECK(layer.bias.isZero());
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        CHECK(layer.weight.cwiseAbs().maxCoeff() <= bound);
    }
}

TEST_CASE("invalid widths") {
    CHECK_THROWS_AS(BaseNetwork::init({1}, 0), Error);
    CHECK_THROWS_AS(BaseNetwork::init({1, 0, 4}, 0), Error);
}

TEST_CASE("flatten and assign round trip") {
    BaseNetwork net = BaseNetwork::init({2, 5, 3}, 1);
    Vector flat = net.flatten();
    for (auto& v : flat) v *= 2.0;
    net.assign(flat);
    CHECK(net.flatten() == flat);
    flat.pop_back();
    CHECK_THROWS_AS(net.assign(flat), Error);
}

TEST_CASE("zero-weight network") {
    std::vector<DenseLayer> layers{
        {Eigen::MatrixXd::Zero(4, 1), Eigen::VectorXd::Zero(4)},
        {Eigen::MatrixXd::Zero(3, 4), Eigen::VectorXd::Zero(3)}};
    const BaseNetwork net = BaseNetwork::from_layers(std::move(layers));
    const double x[1] = {0.7};
    const FeatureEval f = forward_features(net, x);
    for (double v : f.h) CHECK(v == 0.0);
    for (double v : f.dh_dt) CHECK(v == 0.0);
    CHECK(f.dh_dx.empty());
}

TEST_CASE("single hidden layer tangents by hand") {
    Eigen::MatrixXd w(2, 1);
    w << 1.5, -0.7;
    Eigen::VectorXd b(2);
    b << 0.2, 0.4;
    const BaseNetwork net = BaseNetwork::from_layers({{w, b}});
    const double t = 0.9;
    const double x[1] = {t};
    const FeatureEval f = forward_features(net, x);
    for (int i = 0; i < 2; ++i) {
        const double z = w(i, 0) * t + b(i);
        CHECK(f.h[i] == doctest::Approx(z / (1.0 + std::exp(-z))).epsilon(1e-14));
        CHECK(f.dh_dt[i] == doctest::Approx(silu(z).derivative * w(i, 0)).epsilon(1e-14));
    }
    const double bad[2] = {0.1, 0.2};
    CHECK_THROWS_AS(forward_features(net, bad), Error);
}

TEST_CASE("tangents match central differences on random networks") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = trial % 2;
        const BaseNetwork net = BaseNetwork::init({d + 1, 12, 10, 8}, 100 + trial);
        std::vector<double> x(d + 1);
        for (auto& v : x) v = u(rng);
        const FeatureEval f = forward_features(net, x);
        for (std::size_t k = 0; k <= d; ++k) {
            const double h = 1e-4;
            auto xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const Vector hp = forward_features(net, xp).h, hm = forward_features(net, xm).h;
            const Vector& an = k == 0 ? f.dh_dt : f.dh_dx[k - 1];
            double scale = 0.0;
            for (double v : an) scale = std::max(scale, std::abs(v));
            for (std::size_t i = 0; i < an.size(); ++i) {
                const double fd = (hp[i] - hm[i]) / (2 * h);
                worst = std::max(worst, std::abs(fd - an[i]) / std::max(std::abs(an[i]), scale));
            }
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("batch forward agrees with pointwise forward") {
    const BaseNetwork net = BaseNetwork::init({2, 6, 5}, 3);
    PointBatch batch{Eigen::MatrixXd(2, 3)};
    batch.points << 0.1, 0.5, 0.9, 0.2, 0.3, 0.8;
    const FeatureBatch fb = forward_batch(net, batch);
    REQUIRE(fb.dh.size() == 2);
    for (Eigen::Index p = 0; p < 3; ++p) {
        const double x[2] = {batch.points(0, p), batch.points(1, p)};
        const FeatureEval f = forward_features(net, x);
        for (Eigen::Index i = 0; i < 5; ++i) {
            CHECK(fb.h(i, p) == f.h[i]);
            CHECK(fb.dh[0](i, p) == f.dh_dt[i]);
            CHECK(fb.dh[1](i, p) == f.dh_dx[0][i]);
        }
    }
    batch.with_tangents = false;
    CHECK(forward_batch(net, batch).dh.empty());
}

TEST_CASE("zero loss gives zero gradient") {
    const BaseNetwork net = BaseNetwork::init({1, 4, 3}, 5);
    const std::vector<PointBatch> batches{{column_points({0.1, 0.6})}};
    const LossGradient g = loss_gradient(net, batches, [](std::span<const FeatureBatch> fb) {
        LossValue v;
        for (const auto& f : fb) {
            BatchAdjoint s{Eigen::MatrixXd::Zero(f.h.rows(), f.h.cols()), {}};
            v.seeds.push_back(s);
        }
        return v;
    });
    CHECK(g.loss == 0.0);
    for (double v : g.grad.flatten_base()) CHECK(v == 0.0);
}

TEST_CASE("squared feature norm on one layer by hand") {
    Eigen::MatrixXd w(2, 1);
    w << 0.8, -1.1;
    Eigen::VectorXd b(2);
    b << 0.1, 0.3;
    const BaseNetwork net = BaseNetwork::from_layers({{w, b}});
    const double t0 = 0.45;
    const std::vector<PointBatch> batches{{column_points({t0}), false}};
    const LossGradient g = loss_gradient(net, batches, [](std::span<const FeatureBatch> fb) {
        LossValue v;
        v.loss = fb[0].h.squaredNorm();
        v.seeds.push_back({2.0 * fb[0].h, {}});
        return v;
    });
    for (int i = 0; i < 2; ++i) {
        const double z = w(i, 0) * t0 + b(i);
        const SiluEval s = silu(z);
        CHECK(g.grad.weights[0](i, 0) == doctest::Approx(2 * s.value * s.derivative * t0));
        CHECK(g.grad.biases[0](i) == doctest::Approx(2 * s.value * s.derivative));
    }
}

TEST_CASE("parameter gradient matches central differences") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    BaseNetwork net = BaseNetwork::init({1, 8, 8}, 77);
    MixedLoss loss;
    loss.a = Eigen::VectorXd::NullaryExpr(8, [&] { return g(rng); });
    loss.c = Eigen::VectorXd::NullaryExpr(8, [&] { return g(rng); });
    loss.head = Eigen::MatrixXd::NullaryExpr(2, 8, [&] { return g(rng); });
    const std::vector<PointBatch> batches{
        {column_points({0.0, 0.14, 0.29, 0.43, 0.57, 0.71, 0.86, 1.0})},
        {column_points({0.0}), false}};
    const LossGradient lg = loss_gradient(net, batches, std::cref(loss));
    const Vector analytic = lg.grad.flatten_base();
    Vector params = net.flatten();
    const double h = 1e-6;
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + h;
        net.assign(params);
        const double lp = eval_loss(net, batches, loss);
        params[i] = keep - h;
        net.assign(params);
        const double lm = eval_loss(net, batches, loss);
        params[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        worst = std::max(worst, std::abs(fd - analytic[i]) / std::max(1e-3, std::abs(analytic[i])));
    }
    net.assign(params);
    CHECK(worst < 1e-5);

    // Head gradient too.
    double worst_head = 0.0;
    for (Eigen::Index i = 0; i < loss.head.size(); ++i) {
        MixedLoss lp = loss, lm = loss;
        lp.head.data()[i] += h;
        lm.head.data()[i] -= h;
        const double fd = (eval_loss(net, batches, lp) - eval_loss(net, batches, lm)) / (2 * h);
        const double an = lg.grad.heads[0].data()[i];
        worst_head = std::max(worst_head, std::abs(fd - an) / std::max(1e-3, std::abs(an)));
    }
    CHECK(worst_head < 1e-5);
}

TEST_CASE("non-finite loss is rejected") {
    const BaseNetwork net = BaseNetwork::init({1, 3}, 1);
    const std::vector<PointBatch> batches{{column_points({0.5})}};
    try {
        loss_gradient(net, batches, [](std::span<const FeatureBatch>) {
            LossValue v;
            v.loss = NAN;
            return v;
        });
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NonFiniteLoss);
    }
}

TEST_CASE("adam") {
    SUBCASE("zero gradient leaves parameters") {
        Vector p{1.0, -2.0};
        const Vector zero{0.0, 0.0};
        AdamState st;
        adam_step(p, zero, st, 1e-2);
        CHECK(p == Vector{1.0, -2.0});
        CHECK(st.step == 1);
    }
    SUBCASE("constant gradient gives steps of size lr") {
        Vector p{0.0};
        const Vector grad{3.7};
        AdamState st;
        double prev = 0.0;
        for (int i = 0; i < 200; ++i) {
            prev = p[0];
            adam_step(p, grad, st, 1e-3);
        }
        CHECK(prev - p[0] == doctest::Approx(1e-3).epsilon(1e-6));
    }
    SUBCASE("shape mismatch") {
        Vector p{0.0, 1.0};
        const Vector grad{1.0};
        AdamState st;
        CHECK_THROWS_AS(adam_step(p, grad, st, 1e-3), Error);
    }
    SUBCASE("deterministic") {
        Vector p1{0.3, 0.1}, p2{0.3, 0.1};
        AdamState s1, s2;
        for (int i = 0; i < 10; ++i) {
            const Vector g{std::sin(i * 1.0), std::cos(i * 2.0)};
            adam_step(p1, g, s1, 1e-2);
            adam_step(p2, g, s2, 1e-2);
        }
        CHECK(p1 == p2);
    }
}

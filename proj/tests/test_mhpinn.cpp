#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <optional>
#include <vector>

#include "stlpinn/error.hpp"
#include "stlpinn/mhpinn.hpp"

using namespace stlpinn;

namespace {

LossConfig small_loss(std::size_t n1) {
    LossConfig c;
    c.n1 = n1;
    return c;
}

TrainConfig small_train(std::size_t epochs, std::uint64_t seed = 3) {
    TrainConfig c;
    c.widths = {1, 8, 8};
    c.lr = 1e-2;
    c.epochs = epochs;
    c.seed = seed;
    return c;
}

Eigen::MatrixXd random_head(std::size_t m, std::size_t n, unsigned seed) {
    std::srand(seed);
    return 0.3 * Eigen::MatrixXd::Random(static_cast<Eigen::Index>(m + 1), static_cast<Eigen::Index>(n));
}

}  // namespace

TEST_CASE("ODE collocation is an equispaced grid plus the initial point") {
    const auto spec = instantiate(Family::OHO, 5.0);
    const auto c = sample_collocation(spec, LossConfig{});
    REQUIRE(c.n1() == 512);
    CHECK(c.n2() == 1);
    CHECK(c.interior(0, 0) == 0.0);
    CHECK(c.interior(0, 511) == doctest::Approx(1.0).epsilon(1e-15));
    for (Eigen::Index i = 1; i < 512; ++i)
        CHECK(c.interior(0, i) - c.interior(0, i - 1) == doctest::Approx(1.0 / 511).epsilon(1e-9));
    CHECK(c.initial(0, 0) == 0.0);

    const auto one = sample_collocation(spec, small_loss(1));
    CHECK(one.interior(0, 0) == 0.5);

    LossConfig bad;
    bad.n2 = 2;
    CHECK_THROWS_AS(sample_collocation(spec, bad), Error);
    try {
        sample_collocation(spec, bad);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidCounts);
    }
}

TEST_CASE("AR collocation layout") {
    const auto spec = instantiate(Family::AR, 3.0);
    const auto c = sample_collocation(spec, LossConfig{});
    CHECK(c.n1() == 9375);
    CHECK(c.n2() == 483);
    // Row i*nx + j holds (t_i, x_j).
    CHECK(c.interior(0, 125) == doctest::Approx(1.0 / 74));
    CHECK(c.interior(1, 125) == 0.0);
    CHECK(c.interior(1, 124) == doctest::Approx(1.0));
    CHECK((c.initial.row(0).array() == 0.0).all());
    CHECK(c.edges(1, 0) == 0.0);
    CHECK(c.edges(1, 201) == 1.0);
    CHECK(c.edges(0, 200) == doctest::Approx(1.0));
}

TEST_CASE("random collocation is seeded and stays in the domain") {
    const auto spec = instantiate(Family::AR, 3.0);
    LossConfig cfg;
    cfg.sampling = Sampling::Random;
    cfg.sampling_seed = 11;
    const auto a = sample_collocation(spec, cfg);
    const auto b = sample_collocation(spec, cfg);
    CHECK(a.interior == b.interior);
    CHECK(a.edges == b.edges);
    CHECK(a.interior.minCoeff() >= 0.0);
    CHECK(a.interior.maxCoeff() <= 1.0);
    cfg.sampling_seed = 12;
    CHECK(sample_collocation(spec, cfg).interior != a.interior);
}

TEST_CASE("head loss hand examples") {
    const auto net = BaseNetwork::init({1, 8, 8}, 1);
    const auto spec = instantiate(Family::OHO, 4.0);
    const auto colloc = sample_collocation(spec, small_loss(16));
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(9, 2);

    // u = 0: the residual vanishes (no forcing) and only the IC mismatch 1^2 + 0.5^2 remains.
    const auto l = head_loss(net, zero, spec, colloc, LossConfig{});
    CHECK(l.residual == 0.0);
    CHECK(l.ic == doctest::Approx(1.25).epsilon(1e-15));
    CHECK(l.bc == 0.0);
    CHECK(l.total == doctest::Approx(1.25).epsilon(1e-15));

    FamilyParams p;
    p.y0 = Vector{0.0, 0.0};
    CHECK(head_loss(net, zero, instantiate(Family::OHO, 4.0, p), colloc, LossConfig{}).total == 0.0);

    // Constant u = (c1, c2) has u' = 0, so the OHO residual is A u at every point.
    Eigen::MatrixXd W = zero;
    W(8, 0) = 2.0;
    W(8, 1) = -1.0;
    const auto lc = head_loss(net, W, spec, colloc, LossConfig{});
    // A = [[0, -1], [1, 4]] -> A u = (1, -2)
    CHECK(lc.residual == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(lc.ic == doctest::Approx(1.0 + 2.25).epsilon(1e-14));

    LossConfig w;
    w.n1 = 16;
    w.omega1 = 3.0;
    w.omega2 = 0.5;
    const auto lw = head_loss(net, W, spec, colloc, w);
    CHECK(lw.residual == doctest::Approx(15.0).epsilon(1e-14));
    CHECK(lw.ic == doctest::Approx(1.625).epsilon(1e-14));

    CHECK_THROWS_AS(head_loss(net, Eigen::MatrixXd::Zero(8, 2), spec, colloc, LossConfig{}), Error);
}

TEST_CASE("AR boundary loss splits into IC and BC parts") {
    const auto net = BaseNetwork::init({2, 6, 6}, 2);
    const auto spec = instantiate(Family::AR, 3.0);
    LossConfig cfg;
    cfg.ar_nt = 4;
    cfg.ar_nx = 5;
    cfg.ar_edge = 7;
    cfg.ar_ic = 9;
    const auto colloc = sample_collocation(spec, cfg);
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(7, 2);
    W(6, 0) = 1.0;  // u = (1, 0) everywhere; the boundary data are zero
    const auto l = head_loss(net, W, spec, colloc, cfg);
    const auto tg = head_targets(spec, colloc);
    double ic = 0.0;
    for (Eigen::Index p = 0; p < 9; ++p)
        ic += std::pow(1.0 - tg.boundary(0, p), 2) + std::pow(tg.boundary(1, p), 2);
    CHECK(l.ic == doctest::Approx(ic / 23.0).epsilon(1e-13));
    CHECK(l.bc == doctest::Approx(14.0 / 23.0).epsilon(1e-13));
    CHECK(l.total == doctest::Approx(l.residual + l.ic + l.bc).epsilon(1e-15));
}

TEST_CASE("multi-head loss is the sum of head losses") {
    const auto net = BaseNetwork::init({1, 8, 8}, 5);
    const LossConfig cfg = small_loss(32);
    std::vector<ProblemSpec> specs;
    std::vector<Eigen::MatrixXd> heads;
    std::vector<HeadTargets> targets;
    FamilyParams p;
    p.omega = 1.3;
    for (int i = 0; i < 4; ++i) {
        specs.push_back(linearize(instantiate(i % 2 ? Family::OHO : Family::NCFF, 2.0 + i, p)));
        heads.push_back(random_head(8, 2, 10u + static_cast<unsigned>(i)));
    }
    const auto colloc = sample_collocation(specs[0], cfg);
    for (const auto& s : specs) targets.push_back(head_targets(s, colloc));
    const auto mg = multihead_gradient(net, heads, specs, targets, colloc, cfg);
    LossBreakdown sum;
    for (std::size_t i = 0; i < specs.size(); ++i) sum += head_loss(net, heads[i], specs[i], colloc, cfg);
    CHECK(std::abs(mg.loss.total - sum.total) <= 1e-12 * sum.total);
    CHECK(std::abs(mg.loss.residual - sum.residual) <= 1e-12 * sum.total);
    CHECK(std::abs(mg.loss.ic - sum.ic) <= 1e-12 * sum.total);
}

TEST_CASE("multi-head gradient matches central differences") {
    auto net = BaseNetwork::init({2, 5, 4}, 7);
    const auto spec = linearize(instantiate(Family::AR, 2.0));
    LossConfig cfg;
    cfg.ar_nt = 3;
    cfg.ar_nx = 4;
    cfg.ar_edge = 3;
    cfg.ar_ic = 4;
    cfg.omega1 = 2.0;
    const auto colloc = sample_collocation(spec, cfg);
    const std::vector<ProblemSpec> specs{spec, spec};
    const std::vector<HeadTargets> targets{head_targets(spec, colloc), head_targets(spec, colloc)};
    std::vector<Eigen::MatrixXd> heads{random_head(4, 2, 1), random_head(4, 2, 2)};
    const auto mg = multihead_gradient(net, heads, specs, targets, colloc, cfg);

    auto total = [&](const BaseNetwork& nn, const std::vector<Eigen::MatrixXd>& hs) {
        return multihead_gradient(nn, hs, specs, targets, colloc, cfg).loss.total;
    };
    const double h = 1e-6;
    const Vector base = net.flatten();
    const Vector gb = mg.grad.flatten_base();
    for (std::size_t k = 0; k < base.size(); ++k) {
        Vector plus = base, minus = base;
        plus[k] += h;
        minus[k] -= h;
        BaseNetwork np = net, nm = net;
        np.assign(plus);
        nm.assign(minus);
        const double fd = (total(np, heads) - total(nm, heads)) / (2 * h);
        CHECK(std::abs(fd - gb[k]) <= 1e-6 * (1.0 + std::abs(fd)));
    }
    for (std::size_t i = 0; i < heads.size(); ++i)
        for (Eigen::Index k = 0; k < heads[i].size(); ++k) {
            auto hp = heads, hm = heads;
            hp[i].data()[k] += h;
            hm[i].data()[k] -= h;
            const double fd = (total(net, hp) - total(net, hm)) / (2 * h);
            CHECK(std::abs(fd - mg.grad.heads[i].data()[k]) <= 1e-6 * (1.0 + std::abs(fd)));
        }
}

TEST_CASE("step learning-rate schedule") {
    TrainConfig c;
    c.lr = 1e-3;
    c.gamma = 0.5;
    c.step_size = 100;
    CHECK(scheduled_lr(c, 0) == 1e-3);
    CHECK(scheduled_lr(c, 99) == 1e-3);
    CHECK(scheduled_lr(c, 100) == 5e-4);
    CHECK(scheduled_lr(c, 250) == 2.5e-4);
}

TEST_CASE("zero epochs returns the initial checkpoint") {
    const std::vector<HeadConfig> heads{{Family::OHO, 2.0, {}}, {Family::OHO, 4.0, {}}};
    const auto cfg = small_train(0, 9);
    const auto ck = train(heads, small_loss(16), cfg);
    CHECK(ck.history.size() == 0);
    CHECK(ck.net.flatten() == BaseNetwork::init(cfg.widths, 9).flatten());
    REQUIRE(ck.head_weights.size() == 2);
    CHECK(ck.head_weights[0].rows() == 9);
    CHECK(ck.head_weights[0].cols() == 2);
    CHECK((ck.head_weights[0].row(8).array() == 0.0).all());
    CHECK(ck.head_weights[0].topRows(8).cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(8.0));
    CHECK(ck.head_weights[0] != ck.head_weights[1]);
    CHECK(ck.heads == heads);
}

TEST_CASE("training is deterministic for a fixed seed") {
    const std::vector<HeadConfig> heads{{Family::OHO, 2.0, {}}, {Family::OHO, 3.0, {}}};
    const auto a = train(heads, small_loss(16), small_train(15));
    const auto b = train(heads, small_loss(16), small_train(15));
    CHECK(a.history == b.history);
    CHECK(a.net.flatten() == b.net.flatten());
    CHECK(a.head_weights == b.head_weights);
    const auto c = train(heads, small_loss(16), small_train(15, 4));
    CHECK(c.history != a.history);
}

TEST_CASE("history records the loss before each update") {
    const std::vector<HeadConfig> heads{{Family::OHO, 2.0, {}}};
    const auto ck0 = train(heads, small_loss(16), small_train(0));
    const auto ck = train(heads, small_loss(16), small_train(3));
    REQUIRE(ck.history.size() == 3);
    const auto colloc = sample_collocation(heads[0].problem(), small_loss(16));
    const auto l0 = head_loss(ck0.net, ck0.head_weights[0], heads[0].problem(), colloc, small_loss(16));
    CHECK(ck.history.total[0] == doctest::Approx(l0.total).epsilon(1e-14));
    CHECK(ck.history.ic[0] == doctest::Approx(l0.ic).epsilon(1e-14));
}

TEST_CASE("reduced OHO training lowers the loss by two orders of magnitude") {
    std::vector<HeadConfig> heads;
    for (double a : {2.0, 4.0, 6.0}) heads.push_back({Family::OHO, a, {}});
    TrainConfig cfg = small_train(400);
    cfg.widths = {1, 16, 16};
    cfg.gamma = 0.9;
    const auto ck = train(heads, small_loss(64), cfg);
    CHECK(ck.history.total.back() < ck.history.total.front() / 100.0);
}

TEST_CASE("training errors") {
    const std::vector<HeadConfig> oho{{Family::OHO, 2.0, {}}};
    auto code_of = [](auto&& f) -> std::optional<Errc> {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return std::nullopt;
    };
    CHECK(code_of([&] { train({}, small_loss(8), small_train(1)); }) == Errc::InvalidConfig);
    TrainConfig wide = small_train(1);
    wide.widths = {2, 8};
    CHECK(code_of([&] { train(oho, small_loss(8), wide); }) == Errc::GeometryMismatch);
    const std::vector<HeadConfig> mixed{{Family::OHO, 2.0, {}}, {Family::AR, 2.0, {}}};
    CHECK(code_of([&] { train(mixed, small_loss(8), small_train(1)); }) == Errc::GeometryMismatch);
    TrainConfig hot = small_train(200);
    hot.lr = 1e12;
    LossConfig heavy = small_loss(8);
    heavy.omega1 = 1e300;
    CHECK(code_of([&] { train({{Family::OHO, 200.0, {}}}, heavy, hot); }) == Errc::Diverged);
}

TEST_CASE("training invocations are counted") {
    const auto before = training_invocations();
    train({{Family::OHO, 2.0, {}}}, small_loss(8), small_train(0));
    train_vanilla({Family::OHO, 2.0, {}}, small_loss(8), small_train(0));
    CHECK(training_invocations() == before + 2);
}

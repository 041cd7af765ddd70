#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stlpinn/diffnet.hpp"
#include "stlpinn/equations.hpp"

namespace stlpinn {

/// One training head: the family instance it fits. Heads are always trained on the linear
/// part of the family (problem() drops any polynomial term).
struct HeadConfig {
    Family family = Family::OHO;
    double alpha = 1.0;
    FamilyParams params;

    ProblemSpec problem() const;

    friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

enum class Sampling { Equispaced, Random };

/// Loss weights and collocation counts. ODEs use n1 interior points and the single IC point
/// (n2 must be 1). AR uses the (ar_nt x ar_nx) tensor grid, ar_edge time samples on each of
/// x = 0 and x = L, and ar_ic samples of the initial profile; n1 and n2 are then derived.
struct LossConfig {
    double omega1 = 1.0;
    double omega2 = 1.0;
    std::size_t n1 = 512;
    std::size_t n2 = 1;
    std::size_t ar_nt = 75;
    std::size_t ar_nx = 125;
    std::size_t ar_edge = 201;
    std::size_t ar_ic = 81;
    Sampling sampling = Sampling::Equispaced;
    std::uint64_t sampling_seed = 0;

    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

struct TrainConfig {
    std::vector<std::size_t> widths{1, 128, 128, 256};  // input, hidden..., m
    double lr = 1e-4;
    double gamma = 0.98;
    std::size_t step_size = 100;
    std::size_t epochs = 20000;
    std::uint64_t seed = 0;
    double init_gain = 1.0;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// lr * gamma^floor(epoch / step_size).
double scheduled_lr(const TrainConfig& cfg, std::size_t epoch);

/// Columns are points (t, x_1..x_d). The boundary set is initial followed by edges.
struct CollocationSet {
    Eigen::MatrixXd interior;
    Eigen::MatrixXd initial;
    Eigen::MatrixXd edges;

    std::size_t n1() const noexcept { return static_cast<std::size_t>(interior.cols()); }
    std::size_t n2() const noexcept {
        return static_cast<std::size_t>(initial.cols() + edges.cols());
    }
};

/// Throws InvalidCounts.
CollocationSet sample_collocation(const ProblemSpec& domain, const LossConfig& cfg);

/// Loss terms for one head or summed over heads. total = residual + ic + bc.
struct LossBreakdown {
    double total = 0.0;
    double residual = 0.0;
    double ic = 0.0;
    double bc = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o) noexcept {
        total += o.total;
        residual += o.residual;
        ic += o.ic;
        bc += o.bc;
        return *this;
    }
};

/// [h; 1]: features with the constant bias feature appended.
Eigen::MatrixXd augment(const Eigen::MatrixXd& h);

/// Head output u = W^T [h; 1] at the given points (n x N). W is (m+1) x n.
Eigen::MatrixXd head_output(const BaseNetwork& net, const Eigen::MatrixXd& W,
                            const Eigen::MatrixXd& points);

/// Forcing at interior points and IC/BC targets at boundary points, evaluated once.
struct HeadTargets {
    Eigen::MatrixXd forcing;   // n x N1
    Eigen::MatrixXd boundary;  // n x N2
};

HeadTargets head_targets(const ProblemSpec& spec, const CollocationSet& colloc);

/// Loss of a single head. Throws NonFiniteLoss.
LossBreakdown head_loss(const BaseNetwork& net, const Eigen::MatrixXd& W, const ProblemSpec& spec,
                        const CollocationSet& colloc, const LossConfig& cfg);

/// Summed multi-head loss and its gradient with respect to the base network and every head.
struct MultiHeadGradient {
    LossBreakdown loss;
    ParamGradient grad;  // grad.heads[i] has the shape of heads[i]
};

MultiHeadGradient multihead_gradient(const BaseNetwork& net, std::span<const Eigen::MatrixXd> heads,
                                     std::span<const ProblemSpec> specs,
                                     std::span<const HeadTargets> targets,
                                     const CollocationSet& colloc, const LossConfig& cfg);

struct LossHistory {
    std::vector<double> total;
    std::vector<double> residual;
    std::vector<double> ic;
    std::vector<double> bc;

    std::size_t size() const noexcept { return total.size(); }
    friend bool operator==(const LossHistory&, const LossHistory&) = default;
};

struct Checkpoint {
    BaseNetwork net;
    std::vector<HeadConfig> heads;
    std::vector<Eigen::MatrixXd> head_weights;  // (m+1) x n each
    LossConfig loss;
    TrainConfig train;
    LossHistory history;

    Family family() const { return heads.at(0).family; }
};

/// Full-batch Adam over the base network and all heads. Throws Diverged, InvalidConfig,
/// GeometryMismatch.
Checkpoint train(const std::vector<HeadConfig>& heads, const LossConfig& loss,
                 const TrainConfig& cfg);

/// Single-head PINN trained directly at the target instance.
Checkpoint train_vanilla(const HeadConfig& target, const LossConfig& loss, const TrainConfig& cfg);

/// Number of train() calls made by this process.
std::size_t training_invocations() noexcept;

}  // namespace stlpinn

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "stlpinn/linalg.hpp"

namespace stlpinn {

/// SiLU value and first derivative at one point.
struct SiluEval {
    double value;
    double derivative;
};

SiluEval silu(double z) noexcept;
/// Second derivative of SiLU; needed when back-propagating through tangents.
double silu_second(double z) noexcept;

/// Weight initialization. Weights ~ U(-gain/sqrt(fan_in), gain/sqrt(fan_in)), biases zero.
struct InitScheme {
    double gain = 1.0;
};

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Fully connected SiLU network mapping x = (t, x_1..x_d) to the hidden features h(x).
/// Every layer, including the last hidden one, applies SiLU; the linear heads live elsewhere.
class BaseNetwork {
public:
    BaseNetwork() = default;

    /// widths = {d+1, hidden..., m}. Throws InvalidWidths.
    static BaseNetwork init(std::vector<std::size_t> widths, std::uint64_t seed,
                            InitScheme scheme = {});

    /// Builds a network from explicit layers (checkpoint loading, hand-set tests).
    static BaseNetwork from_layers(std::vector<DenseLayer> layers, std::uint64_t seed = 0);

    const std::vector<std::size_t>& widths() const noexcept { return widths_; }
    std::size_t input_dim() const noexcept { return widths_.front(); }
    std::size_t feature_dim() const noexcept { return widths_.back(); }
    std::uint64_t seed() const noexcept { return seed_; }

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& layers() noexcept { return layers_; }

    std::size_t parameter_count() const noexcept;
    /// Parameters in layer order: weight (column-major as stored) then bias.
    Vector flatten() const;
    void assign(std::span<const double> flat);
    bool all_finite() const;

private:
    std::vector<std::size_t> widths_;
    std::vector<DenseLayer> layers_;
    std::uint64_t seed_ = 0;
};

/// Hidden features and their input derivatives at a single point.
struct FeatureEval {
    Vector h;
    Vector dh_dt;
    std::vector<Vector> dh_dx;
};

FeatureEval forward_features(const BaseNetwork& net, std::span<const double> x);

/// A batch of input points, one column per point ((d+1) x N).
struct PointBatch {
    Eigen::MatrixXd points;
    bool with_tangents = true;
};

/// Features for a batch: h is m x N, dh[k] = dh/dx_k (k = 0 is time) when tangents were requested.
struct FeatureBatch {
    Eigen::MatrixXd h;
    std::vector<Eigen::MatrixXd> dh;

    std::size_t size() const noexcept { return static_cast<std::size_t>(h.cols()); }
};

FeatureBatch forward_batch(const BaseNetwork& net, const PointBatch& batch);

/// Adjoint seeds dL/dh and dL/d(dh[k]) for one batch.
struct BatchAdjoint {
    Eigen::MatrixXd h;
    std::vector<Eigen::MatrixXd> dh;
};

/// What a loss builder hands back: the scalar, seeds per batch, and gradients of any
/// parameters it owns beyond the base network (the linear heads).
struct LossValue {
    double loss = 0.0;
    std::vector<BatchAdjoint> seeds;
    std::vector<Eigen::MatrixXd> head_grads;
};

using LossBuilder = std::function<LossValue(std::span<const FeatureBatch>)>;

struct ParamGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    std::vector<Eigen::MatrixXd> heads;

    /// Same ordering as BaseNetwork::flatten().
    Vector flatten_base() const;
};

struct LossGradient {
    double loss = 0.0;
    ParamGradient grad;
};

/// Records the forward pass (values and tangents) of every batch on a tape, evaluates the
/// builder, then replays the tape backwards. Throws NonFiniteLoss.
LossGradient loss_gradient(const BaseNetwork& net, std::span<const PointBatch> batches,
                           const LossBuilder& builder);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Vector m;
    Vector v;
    std::uint64_t step = 0;
};

/// One Adam update in place. Throws ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg = {});

}  // namespace stlpinn

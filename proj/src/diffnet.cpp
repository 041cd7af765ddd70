#include "stlpinn/diffnet.hpp"

#include <cmath>
#include <random>
#include <string>

#include "stlpinn/error.hpp"

namespace stlpinn {

namespace {

double sigmoid(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Everything the reverse pass needs from one layer of one batch.
struct LayerRecord {
    Eigen::MatrixXd input;                // in x N
    std::vector<Eigen::MatrixXd> d_input; // in x N per tangent direction
    Eigen::MatrixXd z;                    // out x N pre-activation
    std::vector<Eigen::MatrixXd> dz;
};

struct Tape {
    std::vector<std::vector<LayerRecord>> batches;
};

FeatureBatch run_forward(const BaseNetwork& net, const PointBatch& batch,
                         std::vector<LayerRecord>* records) {
    const auto n_in = static_cast<Eigen::Index>(net.input_dim());
    if (batch.points.rows() != n_in)
        throw Error(Errc::DimensionMismatch, "points have " + std::to_string(batch.points.rows()) +
                                                 " coordinates, network expects " +
                                                 std::to_string(n_in));
    const Eigen::Index count = batch.points.cols();
    Eigen::MatrixXd a = batch.points;
    std::vector<Eigen::MatrixXd> da;
    if (batch.with_tangents) {
        da.reserve(static_cast<std::size_t>(n_in));
        for (Eigen::Index k = 0; k < n_in; ++k) {
            Eigen::MatrixXd e = Eigen::MatrixXd::Zero(n_in, count);
            e.row(k).setOnes();
            da.push_back(std::move(e));
        }
    }
    for (const DenseLayer& layer : net.layers()) {
        Eigen::MatrixXd z = layer.weight * a;
        z.colwise() += layer.bias;
        std::vector<Eigen::MatrixXd> dz;
        dz.reserve(da.size());
        for (const auto& t : da) dz.push_back(layer.weight * t);

        Eigen::MatrixXd next(z.rows(), z.cols());
        Eigen::MatrixXd slope(z.rows(), z.cols());
        for (Eigen::Index j = 0; j < z.cols(); ++j)
            for (Eigen::Index i = 0; i < z.rows(); ++i) {
                const SiluEval s = silu(z(i, j));
                next(i, j) = s.value;
                slope(i, j) = s.derivative;
            }
        std::vector<Eigen::MatrixXd> dnext;
        dnext.reserve(dz.size());
        for (const auto& t : dz) dnext.push_back(slope.cwiseProduct(t));

        if (records)
            records->push_back({std::move(a), std::move(da), std::move(z), std::move(dz)});
        a = std::move(next);
        da = std::move(dnext);
    }
    return FeatureBatch{std::move(a), std::move(da)};
}

void run_backward(const BaseNetwork& net, const std::vector<LayerRecord>& records,
                  BatchAdjoint seed, ParamGradient& grad) {
    Eigen::MatrixXd g_a = std::move(seed.h);
    std::vector<Eigen::MatrixXd> g_da = std::move(seed.dh);
    for (std::size_t l = records.size(); l-- > 0;) {
        const LayerRecord& rec = records[l];
        const DenseLayer& layer = net.layers()[l];
        const bool tangents = !rec.dz.empty() && !g_da.empty();

        Eigen::MatrixXd s1(rec.z.rows(), rec.z.cols());
        Eigen::MatrixXd s2;
        if (tangents) s2.resize(rec.z.rows(), rec.z.cols());
        for (Eigen::Index j = 0; j < rec.z.cols(); ++j)
            for (Eigen::Index i = 0; i < rec.z.rows(); ++i) {
                s1(i, j) = silu(rec.z(i, j)).derivative;
                if (tangents) s2(i, j) = silu_second(rec.z(i, j));
            }

        Eigen::MatrixXd g_z = g_a.cwiseProduct(s1);
        std::vector<Eigen::MatrixXd> g_dz;
        if (tangents) {
            g_dz.reserve(g_da.size());
            for (std::size_t k = 0; k < g_da.size(); ++k) {
                g_z += g_da[k].cwiseProduct(s2).cwiseProduct(rec.dz[k]);
                g_dz.push_back(g_da[k].cwiseProduct(s1));
            }
        }

        grad.weights[l].noalias() += g_z * rec.input.transpose();
        for (std::size_t k = 0; k < g_dz.size(); ++k)
            grad.weights[l].noalias() += g_dz[k] * rec.d_input[k].transpose();
        grad.biases[l] += g_z.rowwise().sum();

        if (l == 0) break;
        g_a.noalias() = layer.weight.transpose() * g_z;
        g_da.resize(g_dz.size());
        for (std::size_t k = 0; k < g_dz.size(); ++k)
            g_da[k].noalias() = layer.weight.transpose() * g_dz[k];
    }
}

}  // namespace

SiluEval silu(double z) noexcept {
    const double s = sigmoid(z);
    return {z * s, s * (1.0 + z * (1.0 - s))};
}

double silu_second(double z) noexcept {
    const double s = sigmoid(z);
    return s * (1.0 - s) * (2.0 + z * (1.0 - 2.0 * s));
}

BaseNetwork BaseNetwork::init(std::vector<std::size_t> widths, std::uint64_t seed,
                              InitScheme scheme) {
    if (widths.size() < 2)
        throw Error(Errc::InvalidWidths, "need an input width and at least one hidden layer");
    for (std::size_t w : widths)
        if (w == 0) throw Error(Errc::InvalidWidths, "zero layer width");
    if (!(scheme.gain > 0.0) || !std::isfinite(scheme.gain))
        throw Error(Errc::InvalidWidths, "init gain must be positive");

    BaseNetwork net;
    net.widths_ = std::move(widths);
    net.seed_ = seed;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < net.widths_.size(); ++l) {
        const auto fan_in = static_cast<Eigen::Index>(net.widths_[l]);
        const auto fan_out = static_cast<Eigen::Index>(net.widths_[l + 1]);
        const double bound = scheme.gain / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        // Row-major draw order so the stream maps onto the checkpoint layout.
        for (Eigen::Index i = 0; i < fan_out; ++i)
            for (Eigen::Index j = 0; j < fan_in; ++j) layer.weight(i, j) = dist(rng);
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

BaseNetwork BaseNetwork::from_layers(std::vector<DenseLayer> layers, std::uint64_t seed) {
    if (layers.empty()) throw Error(Errc::InvalidWidths, "no layers");
    BaseNetwork net;
    net.seed_ = seed;
    net.widths_.push_back(static_cast<std::size_t>(layers.front().weight.cols()));
    for (const auto& layer : layers) {
        if (layer.weight.cols() != static_cast<Eigen::Index>(net.widths_.back()) ||
            layer.bias.size() != layer.weight.rows() || layer.weight.rows() == 0)
            throw Error(Errc::InvalidWidths, "layer shapes do not chain");
        net.widths_.push_back(static_cast<std::size_t>(layer.weight.rows()));
    }
    net.layers_ = std::move(layers);
    return net;
}

std::size_t BaseNetwork::parameter_count() const noexcept {
    std::size_t count = 0;
    for (const auto& layer : layers_)
        count += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return count;
}

Vector BaseNetwork::flatten() const {
    Vector flat;
    flat.reserve(parameter_count());
    for (const auto& layer : layers_) {
        flat.insert(flat.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
        flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
    }
    return flat;
}

void BaseNetwork::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count())
        throw Error(Errc::ShapeMismatch, "flat parameter vector has wrong length");
    const double* p = flat.data();
    for (auto& layer : layers_) {
        std::copy(p, p + layer.weight.size(), layer.weight.data());
        p += layer.weight.size();
        std::copy(p, p + layer.bias.size(), layer.bias.data());
        p += layer.bias.size();
    }
}

bool BaseNetwork::all_finite() const {
    for (const auto& layer : layers_)
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    return true;
}

FeatureEval forward_features(const BaseNetwork& net, std::span<const double> x) {
    if (x.size() != net.input_dim())
        throw Error(Errc::DimensionMismatch, "point has " + std::to_string(x.size()) +
                                                 " coordinates, network expects " +
                                                 std::to_string(net.input_dim()));
    PointBatch batch{Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())),
                     true};
    const FeatureBatch fb = run_forward(net, batch, nullptr);
    auto column = [](const Eigen::MatrixXd& m) { return Vector(m.data(), m.data() + m.rows()); };
    FeatureEval out;
    out.h = column(fb.h);
    out.dh_dt = column(fb.dh[0]);
    for (std::size_t k = 1; k < fb.dh.size(); ++k) out.dh_dx.push_back(column(fb.dh[k]));
    return out;
}

FeatureBatch forward_batch(const BaseNetwork& net, const PointBatch& batch) {
    return run_forward(net, batch, nullptr);
}

Vector ParamGradient::flatten_base() const {
    Vector flat;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.insert(flat.end(), weights[l].data(), weights[l].data() + weights[l].size());
        flat.insert(flat.end(), biases[l].data(), biases[l].data() + biases[l].size());
    }
    return flat;
}

LossGradient loss_gradient(const BaseNetwork& net, std::span<const PointBatch> batches,
                           const LossBuilder& builder) {
    Tape tape;
    tape.batches.resize(batches.size());
    std::vector<FeatureBatch> features;
    features.reserve(batches.size());
    for (std::size_t b = 0; b < batches.size(); ++b)
        features.push_back(run_forward(net, batches[b], &tape.batches[b]));

    LossValue value = builder(features);
    if (!std::isfinite(value.loss))
        throw Error(Errc::NonFiniteLoss, "loss evaluated to " + std::to_string(value.loss));
    if (value.seeds.size() != batches.size())
        throw Error(Errc::ShapeMismatch, "loss builder returned wrong number of seeds");

    LossGradient out;
    out.loss = value.loss;
    for (const auto& layer : net.layers()) {
        out.grad.weights.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
        out.grad.biases.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    for (std::size_t b = 0; b < batches.size(); ++b) {
        BatchAdjoint& seed = value.seeds[b];
        if (seed.h.rows() != features[b].h.rows() || seed.h.cols() != features[b].h.cols())
            throw Error(Errc::ShapeMismatch, "adjoint seed shape differs from features");
        if (!batches[b].with_tangents) seed.dh.clear();
        run_backward(net, tape.batches[b], std::move(seed), out.grad);
    }
    out.grad.heads = std::move(value.head_grads);
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const AdamConfig& cfg) {
    if (params.size() != grads.size())
        throw Error(Errc::ShapeMismatch, "params and grads differ in length");
    if (state.m.empty() && state.step == 0) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw Error(Errc::ShapeMismatch, "optimizer state does not match parameters");
    if (!(lr > 0.0)) throw Error(Errc::InvalidConfig, "learning rate must be positive");

    ++state.step;
    const double step = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, step);
    const double c2 = 1.0 - std::pow(cfg.beta2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace stlpinn

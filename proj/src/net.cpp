#include "tcnn/net.hpp"

#include <bit>
#include <cmath>
#include <random>

namespace tcnn {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void mix(std::uint64_t& h, std::uint64_t v) {
    h ^= v;
    h *= kFnvPrime;
}

void mix_values(std::uint64_t& h, const double* data, Eigen::Index n) {
    for (Eigen::Index k = 0; k < n; ++k) {
        mix(h, std::bit_cast<std::uint64_t>(data[k]));
    }
}

bool all_finite(const MLPParams& p) {
    for (const auto& l : p.layers) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) {
        throw InvalidArgument("network needs at least an input and an output layer");
    }
    for (int s : sizes) {
        if (s <= 0) {
            throw InvalidArgument("layer sizes must be positive");
        }
    }
}

}  // namespace

void MLPParams::validate() const {
    check_sizes(layer_sizes);
    if (layers.size() + 1 != layer_sizes.size()) {
        throw InvalidArgument("layer count does not match layer sizes");
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
        const auto& l = layers[k];
        if (l.weight.rows() != layer_sizes[k + 1] || l.weight.cols() != layer_sizes[k] ||
            l.bias.size() != layer_sizes[k + 1]) {
            throw InvalidArgument("layer " + std::to_string(k) + " has inconsistent shape");
        }
    }
    if (!all_finite(*this)) {
        throw InvalidArgument("network parameters contain non-finite values");
    }
}

std::size_t MLPParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

MLPParams MLPParams::zeros_like() const {
    MLPParams z;
    z.layer_sizes = layer_sizes;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
        z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                            Eigen::VectorXd::Zero(l.bias.size())});
    }
    return z;
}

std::uint64_t MLPParams::fingerprint() const {
    std::uint64_t h = kFnvOffset;
    for (int s : layer_sizes) {
        mix(h, static_cast<std::uint64_t>(s));
    }
    for (const auto& l : layers) {
        mix_values(h, l.weight.data(), l.weight.size());
        mix_values(h, l.bias.data(), l.bias.size());
    }
    return h;
}

MLPParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed) {
    check_sizes(layer_sizes);
    if (layer_sizes.front() != 2 || layer_sizes.back() != 2) {
        throw InvalidArgument("traction networks map (|delta|, phi) to (sigma_n, sigma_t)");
    }
    std::mt19937_64 rng(seed);
    MLPParams p;
    p.layer_sizes = layer_sizes;
    for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
        const int fan_in = layer_sizes[k];
        const int fan_out = layer_sizes[k + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        DenseLayer l{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        // Fill row-major so the draw order matches the model file layout.
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) {
                l.weight(r, c) = dist(rng);
            }
        }
        p.layers.push_back(std::move(l));
    }
    return p;
}

ForwardResult forward(const MLPParams& params, const Eigen::MatrixXd& inputs) {
    if (params.layers.empty() || inputs.rows() != params.layers.front().weight.cols()) {
        throw InvalidArgument("forward: input dimension does not match the network");
    }
    if (!inputs.allFinite()) {
        throw InvalidArgument("forward: inputs must be finite");
    }
    ForwardResult r;
    r.cache.activations.reserve(params.layers.size());
    r.cache.activations.push_back(inputs);
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& l = params.layers[k];
        Eigen::MatrixXd z = l.weight * r.cache.activations.back();
        z.colwise() += l.bias;
        if (k + 1 < params.layers.size()) {
            r.cache.activations.push_back(z.array().tanh().matrix());
        } else {
            r.outputs = std::move(z);
        }
    }
    r.cache.params_fingerprint = params.fingerprint();
    return r;
}

Eigen::MatrixXd predict(const MLPParams& params, const Eigen::MatrixXd& inputs) {
    if (params.layers.empty() || inputs.rows() != params.layers.front().weight.cols()) {
        throw InvalidArgument("predict: input dimension does not match the network");
    }
    Eigen::MatrixXd a = inputs;
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& l = params.layers[k];
        Eigen::MatrixXd z = l.weight * a;
        z.colwise() += l.bias;
        a = (k + 1 < params.layers.size()) ? Eigen::MatrixXd(z.array().tanh().matrix()) : std::move(z);
    }
    return a;
}

MLPParams backward(const MLPParams& params, const ForwardCache& cache, const Eigen::MatrixXd& output_gradients) {
    if (cache.activations.size() != params.layers.size() || cache.params_fingerprint != params.fingerprint()) {
        throw InvalidArgument("backward: cache does not belong to these parameters");
    }
    const Eigen::Index batch = cache.activations.front().cols();
    if (output_gradients.cols() != batch || output_gradients.rows() != params.layers.back().weight.rows()) {
        throw InvalidArgument("backward: output gradient shape mismatch");
    }
    MLPParams grads;
    grads.layer_sizes = params.layer_sizes;
    grads.layers.resize(params.layers.size());

    Eigen::MatrixXd delta = output_gradients;  // dL/dz of the current layer
    for (std::size_t k = params.layers.size(); k-- > 0;) {
        const Eigen::MatrixXd& a_in = cache.activations[k];
        grads.layers[k].weight = delta * a_in.transpose();
        grads.layers[k].bias = delta.rowwise().sum();
        if (k > 0) {
            Eigen::MatrixXd back = params.layers[k].weight.transpose() * delta;
            // tanh' = 1 - tanh^2, with a_in = tanh(z_in)
            delta = (back.array() * (1.0 - a_in.array().square())).matrix();
        }
    }
    return grads;
}

AdamState AdamState::for_params(const MLPParams& params, AdamHyper hyper) {
    AdamState s;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    s.hyper = hyper;
    return s;
}

void adam_step(MLPParams& params, const MLPParams& gradients, AdamState& state) {
    if (gradients.layers.size() != params.layers.size() || state.first_moment.layers.size() != params.layers.size()) {
        throw InvalidArgument("adam_step: parameter, gradient and state shapes differ");
    }
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        if (gradients.layers[k].weight.rows() != params.layers[k].weight.rows() ||
            gradients.layers[k].weight.cols() != params.layers[k].weight.cols() ||
            gradients.layers[k].bias.size() != params.layers[k].bias.size()) {
            throw InvalidArgument("adam_step: gradient shape mismatch");
        }
    }
    if (!all_finite(gradients)) {
        throw InvalidArgument("adam_step: non-finite gradient");
    }
    const auto& h = state.hyper;
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = h.beta1 * m + (1.0 - h.beta1) * grad;
        v = h.beta2 * v + (1.0 - h.beta2) * grad.cwiseProduct(grad);
        param.array() -= h.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + h.epsilon);
    };
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        update(params.layers[k].weight, gradients.layers[k].weight, state.first_moment.layers[k].weight,
               state.second_moment.layers[k].weight);
        update(params.layers[k].bias, gradients.layers[k].bias, state.first_moment.layers[k].bias,
               state.second_moment.layers[k].bias);
    }
}

void TrainConfig::validate() const {
    if (max_epochs < 0) {
        throw InvalidArgument("max_epochs must be non-negative");
    }
    if (!(loss_threshold > 0.0)) {
        throw InvalidArgument("loss_threshold must be positive");
    }
    if (!(adam.learning_rate > 0.0)) {
        throw InvalidArgument("learning rate must be positive");
    }
    check_sizes(layer_sizes);
}

TrainResult train(const LossAssembler& loss, const TrainConfig& config) {
    config.validate();
    TrainResult result;
    result.params = init_mlp(config.layer_sizes, config.seed);
    AdamState state = AdamState::for_params(result.params, config.adam);
    result.history.reserve(static_cast<std::size_t>(std::min<std::int64_t>(config.max_epochs, 1'000'000)));

    MLPParams last_finite = result.params;
    for (std::int64_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        auto fw = forward(result.params, loss.inputs());
        const auto ev = loss.evaluate(fw.outputs);
        if (!std::isfinite(ev.breakdown.total) || !ev.output_gradient.allFinite()) {
            throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch), std::move(last_finite),
                                   epoch);
        }
        last_finite = result.params;
        result.history.push_back(ev.breakdown);
        if (ev.breakdown.total < config.loss_threshold) {
            result.reached_threshold = true;
            break;
        }
        const auto grads = backward(result.params, fw.cache, ev.output_gradient);
        adam_step(result.params, grads, state);
        if (!all_finite(result.params)) {
            throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch),
                                   std::move(last_finite), epoch);
        }
    }
    return result;
}

TrainResult train(const Dataset& normalized, const PolarGrid& grid, const TrainConfig& config) {
    const LossAssembler loss(normalized, grid, config.weights);
    return train(loss, config);
}

LossBreakdown evaluate_loss(const MLPParams& params, const LossAssembler& loss) {
    return loss.evaluate(predict(params, loss.inputs())).breakdown;
}

Eigen::Matrix2Xd TractionModel::predict_physical(const Eigen::Matrix2Xd& delta_phi) const {
    Eigen::Matrix2Xd x(2, delta_phi.cols());
    x.row(0) = delta_phi.row(0) / norm.delta;
    x.row(1) = delta_phi.row(1) / norm.phi;
    Eigen::Matrix2Xd y = predict(params, x);
    y.row(0) *= norm.sigma_n;
    y.row(1) *= norm.sigma_t;
    return y;
}

SurfacePair TractionModel::predict_surfaces(const PolarGrid& grid) const {
    const auto rows = static_cast<Eigen::Index>(grid.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid.n_phi());
    Eigen::Matrix2Xd x(2, rows * cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            x(0, j * rows + i) = grid.delta_values()[i];
            x(1, j * rows + i) = grid.phi_values()[j];
        }
    }
    const Eigen::Matrix2Xd y = predict_physical(x);
    Eigen::MatrixXd sn(rows, cols);
    Eigen::MatrixXd st(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            sn(i, j) = y(0, j * rows + i);
            st(i, j) = y(1, j * rows + i);
        }
    }
    return {SurfaceField(grid, std::move(sn)), SurfaceField(grid, std::move(st))};
}

}  // namespace tcnn

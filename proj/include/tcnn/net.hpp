#pragma once

// Fully connected tanh network with an affine output layer, hand-written
// reverse mode, Adam, and the full-batch training loop.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tcnn/domain.hpp"
#include "tcnn/error.hpp"
#include "tcnn/thermo.hpp"

namespace tcnn {

struct DenseLayer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out
};

/// Network parameters. Gradients with respect to the parameters use the
/// same type.
struct MLPParams {
    std::vector<int> layer_sizes;
    std::vector<DenseLayer> layers;

    /// Throws unless shapes agree with layer_sizes and every entry is finite.
    void validate() const;
    std::size_t parameter_count() const;
    /// Same shapes, all zeros.
    MLPParams zeros_like() const;
    /// Hash of shapes and parameter bits, used to detect stale caches.
    std::uint64_t fingerprint() const;
};

inline const std::vector<int> kDefaultLayerSizes{2, 60, 60, 2};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MLPParams init_mlp(const std::vector<int>& layer_sizes, std::uint64_t seed);

/// Layer activations of one forward pass; activations[0] is the input batch.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;
    std::uint64_t params_fingerprint = 0;
};

struct ForwardResult {
    Eigen::MatrixXd outputs;  // out x batch
    ForwardCache cache;
};

/// Inputs are one sample per column.
ForwardResult forward(const MLPParams& params, const Eigen::MatrixXd& inputs);

/// Outputs only, without keeping a cache.
Eigen::MatrixXd predict(const MLPParams& params, const Eigen::MatrixXd& inputs);

/// Parameter gradients given dL/d(outputs). Throws if the cache was produced
/// by different parameters.
MLPParams backward(const MLPParams& params, const ForwardCache& cache, const Eigen::MatrixXd& output_gradients);

struct AdamHyper {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    MLPParams first_moment;
    MLPParams second_moment;
    std::uint64_t step_count = 0;
    AdamHyper hyper;

    static AdamState for_params(const MLPParams& params, AdamHyper hyper = {});
};

/// One bias-corrected Adam update, in place. Non-finite gradients throw and
/// leave both params and state untouched.
void adam_step(MLPParams& params, const MLPParams& gradients, AdamState& state);

struct TrainConfig {
    std::vector<int> layer_sizes = kDefaultLayerSizes;
    std::int64_t max_epochs = 50'000;
    double loss_threshold = 1e-3;
    std::uint64_t seed = 0;
    WeightFactors weights = WeightFactors::unconstrained();
    AdamHyper adam;

    void validate() const;
};

struct TrainResult {
    MLPParams params;
    std::vector<LossBreakdown> history;  // one entry per epoch, before its update
    bool reached_threshold = false;
};

/// Raised when the loss or its gradient stops being finite. Carries the last
/// parameters whose loss was finite.
class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string& what, MLPParams last_finite, std::int64_t epoch)
        : Error(what), last_finite_(std::move(last_finite)), epoch_(epoch) {}

    const MLPParams& last_finite() const noexcept { return last_finite_; }
    std::int64_t epoch() const noexcept { return epoch_; }

private:
    MLPParams last_finite_;
    std::int64_t epoch_;
};

/// Full-batch training. Each epoch evaluates the composite loss over data and
/// grid nodes and applies one Adam step; stops after max_epochs or once the
/// total loss drops below loss_threshold. The assembler's weights are used;
/// config.weights is ignored by this overload.
TrainResult train(const LossAssembler& loss, const TrainConfig& config);

/// Builds the assembler from a normalized dataset and the grid.
TrainResult train(const Dataset& normalized, const PolarGrid& grid, const TrainConfig& config);

/// Loss of a network on an assembler's batch without training.
LossBreakdown evaluate_loss(const MLPParams& params, const LossAssembler& loss);

/// Trained network plus the dataset scaling it was trained with, so that it
/// predicts physical tractions from physical separations.
struct TractionModel {
    MLPParams params;
    NormFactors norm;

    /// Physical (sigma_n, sigma_t) at each (|delta| [um], phi [deg]) column.
    Eigen::Matrix2Xd predict_physical(const Eigen::Matrix2Xd& delta_phi) const;

    /// Physical traction surfaces on a grid.
    SurfacePair predict_surfaces(const PolarGrid& grid) const;
};

}  // namespace tcnn

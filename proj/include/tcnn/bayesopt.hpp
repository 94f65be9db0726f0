#pragma once

// Gaussian-process Bayesian optimization of the loss weight factors. The
// simplex is reparameterized to a box so that every sampled point is a valid
// weight vector satisfying the search bounds.

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "tcnn/domain.hpp"
#include "tcnn/net.hpp"

namespace tcnn {

struct Reparam {
    double t0 = 0.5;
    double f1 = 0.5;
    double f2 = 0.5;

    static constexpr double kT0Lo = 0.4;
    static constexpr double kT0Hi = 0.75;
    static constexpr double kFLo = 0.1;
    static constexpr double kFHi = 0.9;

    bool in_box() const;
    /// Coordinates scaled to the unit cube.
    Eigen::Vector3d to_unit() const;
    static Reparam from_unit(const Eigen::Vector3d& u);
};

/// lambda0 = t0, lambda1 = (1 - lambda0) f1, lambda2 = (1 - lambda0 - lambda1) f2,
/// lambda3 = the remainder.
WeightFactors reparam_to_weights(const Reparam& r);

/// Inverse map. Throws if lambda0 == 1 or lambda0 + lambda1 == 1 (the
/// fractions are undefined); the result is not clamped to the box.
Reparam weights_to_reparam(const WeightFactors& w);

/// True when every search bound holds: lambda0 in [0.4, 0.75],
/// lambda1 in (1 - lambda0) x [0.1, 0.9], lambda2 in (1 - lambda0 - lambda1) x [0.1, 0.9].
bool within_search_bounds(const WeightFactors& w, double tol = 1e-12);

struct BOConfig {
    std::int64_t iterations = 300;
    std::int64_t inner_epochs = 500;
    std::int64_t init_samples = 8;
    std::uint64_t seed = 0;
    std::vector<int> layer_sizes = kDefaultLayerSizes;
    AdamHyper adam;

    void validate() const;
};

/// Zero-mean GP on standardized targets with a unit-variance squared
/// exponential kernel and per-dimension length scales.
class GPSurrogate {
public:
    struct Prediction {
        double mean = 0.0;
        double variance = 0.0;  // latent, without observation noise
    };

    const Eigen::MatrixXd& points() const noexcept { return x_; }
    const Eigen::VectorXd& values() const noexcept { return y_; }
    const Eigen::VectorXd& length_scales() const noexcept { return ell_; }
    double noise_variance() const noexcept { return noise_; }
    bool degenerate() const noexcept { return degenerate_; }
    double best_value() const { return y_.minCoeff(); }

    Prediction predict(const Eigen::VectorXd& x) const;

private:
    friend GPSurrogate gp_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values);

    Eigen::MatrixXd x_;  // dim x n
    Eigen::VectorXd y_;
    Eigen::VectorXd ell_;
    double noise_ = 0.0;
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    bool degenerate_ = false;
    Eigen::LLT<Eigen::MatrixXd> chol_;
    Eigen::VectorXd alpha_;
};

inline constexpr double kGpJitter = 1e-8;

/// Points are columns. Length scales from {0.05, 0.1, 0.2, 0.5, 1} per
/// dimension and noise from {1e-6, 1e-2} are chosen by marginal likelihood.
/// All-identical values give a flat prior centred on that value.
GPSurrogate gp_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values);

/// Expected improvement below the best observed value.
double expected_improvement(const GPSurrogate& gp, const Eigen::VectorXd& x);

inline constexpr int kAcquisitionCandidates = 2048;

/// Best of kAcquisitionCandidates uniform draws in the unit cube, mapped back
/// to the box. The surrogate must live on the unit cube of a Reparam.
Reparam acquire(const GPSurrogate& gp, std::mt19937_64& rng);

/// Returned by objective() when training diverges.
inline constexpr double kDivergedLoss = 1e6;

/// Trains a fresh network from init_mlp(seed) for inner_epochs and returns
/// the total loss at the final parameters.
double objective(const WeightFactors& weights, const Dataset& normalized, const PolarGrid& grid,
                 std::int64_t inner_epochs, std::uint64_t seed, const std::vector<int>& layer_sizes = kDefaultLayerSizes,
                 const AdamHyper& adam = {});

using WeightObjective = std::function<double(const WeightFactors&)>;

struct BOStep {
    std::int64_t iter = 0;
    WeightFactors weights = WeightFactors::unconstrained();
    double loss = 0.0;
    double incumbent = 0.0;  // best loss so far, including this step
};

struct BOResult {
    WeightFactors best_weights = WeightFactors::unconstrained();
    double best_loss = 0.0;
    std::vector<BOStep> history;
};

/// init_samples random points, then GP fit on log(loss), acquisition and
/// evaluation until config.iterations evaluations in total.
BOResult optimize_weights(const WeightObjective& f, const BOConfig& config);

/// Same, with objective() on the dataset and grid.
BOResult optimize_weights(const Dataset& normalized, const PolarGrid& grid, const BOConfig& config);

}  // namespace tcnn

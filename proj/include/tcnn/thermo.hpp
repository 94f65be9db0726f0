#pragma once

// J-integrals, damage parameters and the four loss terms of the
// thermodynamically consistent network:
//
//   MSE0  data misfit along the experimental paths
//   MSE1  TC1, damage must not grow along a constraining path
//   MSE2  TC2, damage must descend fastest along |delta| rather than phi
//   MSE3  TC3, sigma_t / sigma_n = tan(phi) on every constraining path
//
// Every term returns its value together with the gradient with respect to
// the tractions it was evaluated on, so the network can backpropagate it.
//
// J components are work-conjugate: along a proportional path at phase phi,
// d(delta_n) = cos(phi) d|delta| and d(delta_t) = sin(phi) d|delta|, so
// Jn = cos(phi) * int sigma_n d|delta| and Jt = sin(phi) * int sigma_t d|delta|.
// Path derivatives of damage are taken with respect to |delta|.

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "tcnn/domain.hpp"

namespace tcnn {

/// Floor on |sigma_n| (normalized units) used whenever sigma_t / sigma_n is formed.
inline constexpr double kSigmaDivisionFloor = 1e-6;

/// Cumulative trapezoid integral of sigma over delta, J[0] = 0.
std::vector<double> j_integral_path(std::span<const double> sigma, std::span<const double> delta);

/// Reverse-mode product of j_integral_path: maps dL/dJ to dL/dsigma.
std::vector<double> j_integral_path_vjp(std::span<const double> grad_j, std::span<const double> delta);

struct PathIntegrals {
    std::vector<double> j_n;
    std::vector<double> j_t;
    std::vector<double> j_total;
};

/// Work-conjugate J components along one data path. For a normalized
/// dataset pass its factors so the phase angle is recovered in degrees; J is
/// then in normalized traction x separation units.
PathIntegrals path_integrals(const LoadingPathData& path, double phi_scale = 1.0);

/// Gamma_I = max Jn and Gamma_II = max Jt over all data paths, in the units of
/// the dataset (normalized or raw).
Toughness toughness_from_data(const Dataset& dataset);

/// d = 1 - J / gamma, elementwise.
std::vector<double> damage_from_j(std::span<const double> j, double gamma);

/// max over consecutive pairs of max((d[i+1] - d[i]) / (delta[i+1] - delta[i]), 0).
double path_damage_ascent(std::span<const double> damage, std::span<const double> delta);

struct DamagePair {
    SurfaceField d_n;
    SurfaceField d_t;
};

struct JIntegralPair {
    SurfaceField j_n;
    SurfaceField j_t;
};

/// J components along every constraining path (one grid column each).
JIntegralPair j_integrals_on_grid(const SurfacePair& surfaces);

DamagePair damage_on_grid(const SurfacePair& surfaces, const Toughness& toughness);

struct Mse0Result {
    double value = 0.0;
    Eigen::Matrix2Xd gradient;  // d value / d predicted
};

/// Mean over samples of the squared 2-norm error; columns are samples.
Mse0Result mse0(const Eigen::Matrix2Xd& predicted, const Eigen::Matrix2Xd& target);

/// A grid loss term and its gradient with respect to the traction surfaces.
struct GridLoss {
    double value = 0.0;
    Eigen::MatrixXd grad_sigma_n;
    Eigen::MatrixXd grad_sigma_t;
};

/// A grid loss term and its gradient with respect to the damage surfaces.
struct DamageLoss {
    double value = 0.0;
    Eigen::MatrixXd grad_d_n;
    Eigen::MatrixXd grad_d_t;
};

/// TC1: 1/(2m) * sum over paths of the largest positive damage slope, normal
/// plus tangential. Needs at least 2 separation values.
GridLoss mse1(const SurfacePair& surfaces, const Toughness& toughness);
DamageLoss mse1_from_damage(const DamagePair& damage);

/// TC2: compares the damage slope along |delta| with the slopes towards both
/// phase neighbours on the axis-normalized (|delta|, phi) chart and penalizes
/// max(slope_delta - slope_phi, 0), averaged with 1/(2mn). Interior paths
/// only, so at least 3 phase values are required.
GridLoss mse2(const SurfacePair& surfaces, const Toughness& toughness);
DamageLoss mse2_from_damage(const DamagePair& damage);

/// TC3: mean over paths of the mean |sigma_t / sigma_n - tan(phi)|. Paths at
/// phi = 90 (tan undefined) are skipped.
GridLoss mse3(const SurfacePair& surfaces, double eps_div = kSigmaDivisionFloor);

/// Chains a damage-space gradient back to the traction surfaces.
GridLoss chain_damage_gradient(const DamageLoss& loss, const SurfacePair& surfaces, const Toughness& toughness);

struct LossBreakdown {
    double mse0 = 0.0;
    double mse1 = 0.0;
    double mse2 = 0.0;
    double mse3 = 0.0;
    double total = 0.0;
};

/// total = sum lambda_i * mse_i.
LossBreakdown total_loss(double mse0, double mse1, double mse2, double mse3, const WeightFactors& weights);

/// Builds the composite loss for a network that maps normalized
/// (|delta|, phi) to normalized (sigma_n, sigma_t).
///
/// The input batch holds the data samples first and then every grid node,
/// column-major over the grid (node (i, j) at data_count() + j * n_delta + i).
/// Toughness is fixed from the dataset at construction.
class LossAssembler {
public:
    LossAssembler(const Dataset& normalized, const PolarGrid& grid, const WeightFactors& weights);

    struct Evaluation {
        LossBreakdown breakdown;
        Eigen::Matrix2Xd output_gradient;
    };

    const Eigen::Matrix2Xd& inputs() const noexcept { return inputs_; }
    const Eigen::Matrix2Xd& targets() const noexcept { return targets_; }
    Eigen::Index data_count() const noexcept { return targets_.cols(); }
    const PolarGrid& grid() const noexcept { return grid_; }
    const PolarGrid& normalized_grid() const noexcept { return norm_grid_; }
    const Toughness& toughness() const noexcept { return toughness_; }
    const WeightFactors& weights() const noexcept { return weights_; }
    const NormFactors& norm_factors() const noexcept { return norm_; }

    Evaluation evaluate(const Eigen::Matrix2Xd& outputs) const;

    /// Grid-node outputs of a full batch reshaped into traction surfaces on
    /// the normalized grid.
    SurfacePair grid_surfaces(const Eigen::Matrix2Xd& outputs) const;

private:
    PolarGrid grid_;
    PolarGrid norm_grid_;
    NormFactors norm_;
    WeightFactors weights_;
    Toughness toughness_;
    Eigen::Matrix2Xd inputs_;
    Eigen::Matrix2Xd targets_;
    double ratio_scale_n_;
    double ratio_scale_t_;
};

}  // namespace tcnn

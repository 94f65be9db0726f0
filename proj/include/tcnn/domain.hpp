#pragma once

// Core data types for mixed-mode traction-separation data: polar coordinates
// of the separation vector, loading paths at fixed phase angle, normalized
// datasets and the (|delta|, phi) lattice the consistency penalties live on.
//
// Units: separations in micrometres, tractions in MPa, phase angles in
// degrees. MPa * um = J/m^2, so J-integrals come out in J/m^2 directly.

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace tcnn {

/// cos/sin/tan of an angle in degrees. Odd multiples of 90 degrees give an
/// exact zero for cos (and tan is then infinite) so that pure-mode paths have
/// exactly vanishing off-axis separation.
double cos_deg(double deg);
double sin_deg(double deg);
double tan_deg(double deg);

struct Separation {
    double delta_n = 0.0;
    double delta_t = 0.0;
};

struct PolarSeparation {
    double delta_norm = 0.0;
    double phi_deg = 0.0;
};

/// Norm and phase angle of (delta_n, delta_t). The phase angle is undefined at
/// the origin, which is reported as an empty optional. Inputs with
/// delta_n < 0 are outside the modelled half-plane and throw.
std::optional<PolarSeparation> polar_decompose(double delta_n, double delta_t);

Separation polar_compose(double delta_norm, double phi_deg);

double traction_norm(double sigma_n, double sigma_t);

/// True for phi in (-90, 90].
bool in_canonical_phase_range(double phi_deg);

struct TractionSample {
    double delta_norm = 0.0;
    double phi_deg = 0.0;
    double sigma_n = 0.0;
    double sigma_t = 0.0;
};

struct PathPoint {
    double delta_norm = 0.0;
    double sigma_n = 0.0;
    double sigma_t = 0.0;
};

/// One proportional loading path. delta_norm is strictly increasing and
/// starts at a value >= 0.
class LoadingPathData {
public:
    LoadingPathData(double phi, std::vector<PathPoint> points);

    double phi() const noexcept { return phi_; }
    std::span<const PathPoint> points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    TractionSample sample(std::size_t i) const;

    std::vector<double> delta_values() const;
    std::vector<double> sigma_n_values() const;
    std::vector<double> sigma_t_values() const;

private:
    double phi_;
    std::vector<PathPoint> points_;
};

/// Per-channel scale factors: raw = normalized * factor.
struct NormFactors {
    double delta = 1.0;
    double phi = 1.0;
    double sigma_n = 1.0;
    double sigma_t = 1.0;

    bool approx_equal(const NormFactors& other, double rel_tol = 1e-9) const;
};

class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<LoadingPathData> paths,
                     std::optional<NormFactors> norm = std::nullopt);

    const std::vector<LoadingPathData>& paths() const noexcept { return paths_; }
    const std::optional<NormFactors>& norm_factors() const noexcept { return norm_; }
    bool is_normalized() const noexcept { return norm_.has_value(); }
    bool empty() const noexcept { return paths_.empty(); }
    std::size_t total_points() const noexcept;

    /// Flattened samples in path order.
    std::vector<TractionSample> samples() const;

private:
    std::vector<LoadingPathData> paths_;
    std::optional<NormFactors> norm_;
};

/// Divides every channel by its maximum absolute value. Applying it to an
/// already normalized dataset leaves the values untouched and keeps the
/// accumulated factors.
Dataset normalize_dataset(const Dataset& raw);

/// Normalizes with externally supplied factors (e.g. those stored in a model).
Dataset normalize_with(const Dataset& raw, const NormFactors& factors);

/// Inverse of normalize_dataset. A raw dataset is returned unchanged.
Dataset denormalize_dataset(const Dataset& normalized);

struct GridSpec {
    double delta_max = 3.0;
    double delta_step = 0.1;
    double phi_min = -60.0;
    double phi_max = 90.0;
    double phi_step = 15.0;
};

/// Uniform (|delta|, phi) lattice. The delta axis is indexed by i, the phase
/// axis by j.
class PolarGrid {
public:
    PolarGrid(std::vector<double> delta_values, std::vector<double> phi_values);

    std::span<const double> delta_values() const noexcept { return delta_; }
    std::span<const double> phi_values() const noexcept { return phi_; }
    std::size_t n_delta() const noexcept { return delta_.size(); }
    std::size_t n_phi() const noexcept { return phi_.size(); }
    std::size_t size() const noexcept { return delta_.size() * phi_.size(); }

    bool operator==(const PolarGrid& other) const = default;

private:
    std::vector<double> delta_;
    std::vector<double> phi_;
};

/// Constraining-path lattice with inclusive endpoints. The delta axis always
/// starts at 0. Defaults give 31 x 11 points.
PolarGrid build_constraint_grid(const GridSpec& spec = {});

/// A scalar quantity sampled on a PolarGrid, values(i, j) at
/// (delta_values[i], phi_values[j]).
class SurfaceField {
public:
    explicit SurfaceField(PolarGrid grid);
    SurfaceField(PolarGrid grid, Eigen::MatrixXd values);

    const PolarGrid& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    Eigen::MatrixXd& values() noexcept { return values_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return values_(i, j); }
    double& operator()(Eigen::Index i, Eigen::Index j) { return values_(i, j); }

private:
    PolarGrid grid_;
    Eigen::MatrixXd values_;
};

/// Normal and tangential traction surfaces on a common grid.
struct SurfacePair {
    SurfaceField sigma_n;
    SurfaceField sigma_t;

    const PolarGrid& grid() const noexcept { return sigma_n.grid(); }
};

/// Convex weights of the four loss terms (data misfit, TC1, TC2, TC3).
class WeightFactors {
public:
    WeightFactors(double lambda0, double lambda1, double lambda2, double lambda3);

    double lambda0() const noexcept { return l_[0]; }
    double lambda1() const noexcept { return l_[1]; }
    double lambda2() const noexcept { return l_[2]; }
    double lambda3() const noexcept { return l_[3]; }
    double operator[](std::size_t i) const { return l_.at(i); }
    const std::array<double, 4>& values() const noexcept { return l_; }

    bool constraints_active() const noexcept { return l_[1] > 0 || l_[2] > 0 || l_[3] > 0; }

    /// Plain data fit, lambda = (1, 0, 0, 0).
    static WeightFactors unconstrained() { return {1.0, 0.0, 0.0, 0.0}; }

private:
    std::array<double, 4> l_;
};

/// Reference weight settings: data fit with TC1, then TC1+TC2, then all three.
namespace presets {
inline WeightFactors tcnn1() { return {0.8, 0.2, 0.0, 0.0}; }
inline WeightFactors tcnn2() { return {0.6, 0.2, 0.2, 0.0}; }
inline WeightFactors tcnn3() { return {0.57, 0.2, 0.2, 0.03}; }
/// Optimized weight set reported for silicon/epoxy data; sums to 1.
inline WeightFactors bo_optimized() { return {0.519, 0.385, 0.0622, 0.0338}; }
}  // namespace presets

/// Pure-mode toughness values, Gamma_I = max Jn and Gamma_II = max Jt.
struct Toughness {
    Toughness(double gamma_I, double gamma_II);

    double gamma_I;
    double gamma_II;
};

}  // namespace tcnn

#include "tcnn/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "tcnn/error.hpp"

namespace tcnn {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool is_odd_multiple_of_90(double deg) {
    const double q = deg / 90.0;
    return q == std::round(q) && std::fmod(std::abs(q), 2.0) == 1.0;
}

bool is_multiple_of_180(double deg) {
    const double q = deg / 180.0;
    return q == std::round(q);
}

void check_axis(std::span<const double> axis, const char* name) {
    if (axis.size() < 2) {
        throw InvalidArgument(std::string("grid axis '") + name + "' needs at least 2 values");
    }
    const double step = axis[1] - axis[0];
    if (!(step > 0.0)) {
        throw InvalidArgument(std::string("grid axis '") + name + "' must be strictly increasing");
    }
    for (std::size_t k = 1; k < axis.size(); ++k) {
        const double d = axis[k] - axis[k - 1];
        if (!(d > 0.0) || std::abs(d - step) > 1e-9 * std::max(1.0, std::abs(step))) {
            throw InvalidArgument(std::string("grid axis '") + name + "' must be uniformly spaced");
        }
    }
}

std::vector<double> uniform_axis(double lo, double hi, double step) {
    const double span = (hi - lo) / step;
    const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
    std::vector<double> axis(count);
    for (std::size_t k = 0; k < count; ++k) {
        axis[k] = lo + static_cast<double>(k) * step;
    }
    return axis;
}

}  // namespace

double cos_deg(double deg) {
    if (is_odd_multiple_of_90(deg)) {
        return 0.0;
    }
    return std::cos(deg * kDegToRad);
}

double sin_deg(double deg) {
    if (is_multiple_of_180(deg)) {
        return 0.0;
    }
    return std::sin(deg * kDegToRad);
}

double tan_deg(double deg) {
    if (is_odd_multiple_of_90(deg)) {
        return std::numeric_limits<double>::infinity();
    }
    if (is_multiple_of_180(deg)) {
        return 0.0;
    }
    return std::tan(deg * kDegToRad);
}

std::optional<PolarSeparation> polar_decompose(double delta_n, double delta_t) {
    if (delta_n < 0.0) {
        throw InvalidArgument("polar_decompose: negative normal separation is not modelled");
    }
    if (delta_n == 0.0 && delta_t == 0.0) {
        return std::nullopt;
    }
    PolarSeparation out;
    out.delta_norm = std::hypot(delta_n, delta_t);
    if (delta_n == 0.0) {
        // (-90, 90]: pure negative shear sits just outside the range; it is
        // reported as -90 and left to the caller to reject if needed.
        out.phi_deg = delta_t > 0.0 ? 90.0 : -90.0;
    } else {
        out.phi_deg = std::atan(delta_t / delta_n) / kDegToRad;
    }
    return out;
}

Separation polar_compose(double delta_norm, double phi_deg) {
    if (delta_norm < 0.0) {
        throw InvalidArgument("polar_compose: separation norm must be non-negative");
    }
    return {delta_norm * cos_deg(phi_deg), delta_norm * sin_deg(phi_deg)};
}

double traction_norm(double sigma_n, double sigma_t) { return std::hypot(sigma_n, sigma_t); }

bool in_canonical_phase_range(double phi_deg) { return phi_deg > -90.0 && phi_deg <= 90.0; }

// ---------------------------------------------------------------------------

LoadingPathData::LoadingPathData(double phi, std::vector<PathPoint> points)
    : phi_(phi), points_(std::move(points)) {
    if (!std::isfinite(phi_) || !in_canonical_phase_range(phi_)) {
        throw InvalidArgument("loading path phase angle outside (-90, 90]");
    }
    if (points_.empty()) {
        throw InvalidArgument("loading path has no samples");
    }
    for (std::size_t k = 0; k < points_.size(); ++k) {
        const auto& p = points_[k];
        if (!std::isfinite(p.delta_norm) || !std::isfinite(p.sigma_n) || !std::isfinite(p.sigma_t)) {
            throw InvalidArgument("loading path contains a non-finite value");
        }
        if (k == 0 && p.delta_norm < 0.0) {
            throw InvalidArgument("loading path separation must start at a value >= 0");
        }
        if (k > 0 && !(p.delta_norm > points_[k - 1].delta_norm)) {
            throw InvalidArgument("loading path separation must be strictly increasing");
        }
    }
}

TractionSample LoadingPathData::sample(std::size_t i) const {
    const auto& p = points_.at(i);
    return {p.delta_norm, phi_, p.sigma_n, p.sigma_t};
}

std::vector<double> LoadingPathData::delta_values() const {
    std::vector<double> out(points_.size());
    std::transform(points_.begin(), points_.end(), out.begin(), [](const PathPoint& p) { return p.delta_norm; });
    return out;
}

std::vector<double> LoadingPathData::sigma_n_values() const {
    std::vector<double> out(points_.size());
    std::transform(points_.begin(), points_.end(), out.begin(), [](const PathPoint& p) { return p.sigma_n; });
    return out;
}

std::vector<double> LoadingPathData::sigma_t_values() const {
    std::vector<double> out(points_.size());
    std::transform(points_.begin(), points_.end(), out.begin(), [](const PathPoint& p) { return p.sigma_t; });
    return out;
}

bool NormFactors::approx_equal(const NormFactors& o, double rel_tol) const {
    auto close = [rel_tol](double a, double b) {
        return std::abs(a - b) <= rel_tol * std::max(std::abs(a), std::abs(b));
    };
    return close(delta, o.delta) && close(phi, o.phi) && close(sigma_n, o.sigma_n) &&
           close(sigma_t, o.sigma_t);
}

Dataset::Dataset(std::vector<LoadingPathData> paths, std::optional<NormFactors> norm)
    : paths_(std::move(paths)), norm_(norm) {
    if (norm_) {
        const auto& f = *norm_;
        if (!(f.delta > 0.0) || !(f.phi > 0.0) || !(f.sigma_n > 0.0) || !(f.sigma_t > 0.0)) {
            throw InvalidArgument("normalization factors must be strictly positive");
        }
    }
}

std::size_t Dataset::total_points() const noexcept {
    std::size_t n = 0;
    for (const auto& p : paths_) {
        n += p.size();
    }
    return n;
}

std::vector<TractionSample> Dataset::samples() const {
    std::vector<TractionSample> out;
    out.reserve(total_points());
    for (const auto& path : paths_) {
        for (std::size_t i = 0; i < path.size(); ++i) {
            out.push_back(path.sample(i));
        }
    }
    return out;
}

namespace {

Dataset scale_dataset(const Dataset& in, const NormFactors& divide_by, std::optional<NormFactors> result_norm) {
    std::vector<LoadingPathData> paths;
    paths.reserve(in.paths().size());
    for (const auto& path : in.paths()) {
        std::vector<PathPoint> pts;
        pts.reserve(path.size());
        for (const auto& p : path.points()) {
            pts.push_back({p.delta_norm / divide_by.delta, p.sigma_n / divide_by.sigma_n,
                           p.sigma_t / divide_by.sigma_t});
        }
        paths.emplace_back(path.phi() / divide_by.phi, std::move(pts));
    }
    return Dataset(std::move(paths), result_norm);
}

}  // namespace

Dataset normalize_dataset(const Dataset& raw) {
    if (raw.empty() || raw.total_points() == 0) {
        throw InvalidArgument("normalize_dataset: dataset is empty");
    }
    NormFactors f{0.0, 0.0, 0.0, 0.0};
    for (const auto& path : raw.paths()) {
        f.phi = std::max(f.phi, std::abs(path.phi()));
        for (const auto& p : path.points()) {
            f.delta = std::max(f.delta, std::abs(p.delta_norm));
            f.sigma_n = std::max(f.sigma_n, std::abs(p.sigma_n));
            f.sigma_t = std::max(f.sigma_t, std::abs(p.sigma_t));
        }
    }
    auto require = [](double v, const char* channel) {
        if (!(v > 0.0)) {
            throw InvalidArgument(std::string("normalize_dataset: channel '") + channel + "' is all zero");
        }
    };
    require(f.delta, "delta");
    require(f.phi, "phi");
    require(f.sigma_n, "sigma_n");
    require(f.sigma_t, "sigma_t");

    NormFactors total = f;
    if (raw.norm_factors()) {
        const auto& prev = *raw.norm_factors();
        total = {prev.delta * f.delta, prev.phi * f.phi, prev.sigma_n * f.sigma_n, prev.sigma_t * f.sigma_t};
    }
    return scale_dataset(raw, f, total);
}

Dataset normalize_with(const Dataset& raw, const NormFactors& factors) {
    if (raw.is_normalized()) {
        throw InvalidArgument("normalize_with: dataset is already normalized");
    }
    return scale_dataset(raw, factors, factors);
}

Dataset denormalize_dataset(const Dataset& normalized) {
    if (!normalized.norm_factors()) {
        return normalized;
    }
    const auto& f = *normalized.norm_factors();
    std::vector<LoadingPathData> paths;
    paths.reserve(normalized.paths().size());
    for (const auto& path : normalized.paths()) {
        std::vector<PathPoint> pts;
        pts.reserve(path.size());
        for (const auto& p : path.points()) {
            pts.push_back({p.delta_norm * f.delta, p.sigma_n * f.sigma_n, p.sigma_t * f.sigma_t});
        }
        paths.emplace_back(path.phi() * f.phi, std::move(pts));
    }
    return Dataset(std::move(paths));
}

// ---------------------------------------------------------------------------

PolarGrid::PolarGrid(std::vector<double> delta_values, std::vector<double> phi_values)
    : delta_(std::move(delta_values)), phi_(std::move(phi_values)) {
    check_axis(delta_, "delta");
    check_axis(phi_, "phi");
    if (delta_.front() < 0.0) {
        throw InvalidArgument("grid separation axis must be non-negative");
    }
    if (!in_canonical_phase_range(phi_.front()) || !in_canonical_phase_range(phi_.back())) {
        throw InvalidArgument("grid phase axis must lie in (-90, 90]");
    }
}

PolarGrid build_constraint_grid(const GridSpec& spec) {
    if (!(spec.delta_step > 0.0) || !(spec.phi_step > 0.0)) {
        throw InvalidArgument("build_constraint_grid: steps must be positive");
    }
    if (!(spec.delta_max > 0.0) || !(spec.phi_max > spec.phi_min)) {
        throw InvalidArgument("build_constraint_grid: axis maximum must exceed its minimum");
    }
    return PolarGrid(uniform_axis(0.0, spec.delta_max, spec.delta_step),
                     uniform_axis(spec.phi_min, spec.phi_max, spec.phi_step));
}

SurfaceField::SurfaceField(PolarGrid grid)
    : grid_(std::move(grid)),
      values_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(grid_.n_delta()),
                                    static_cast<Eigen::Index>(grid_.n_phi()))) {}

SurfaceField::SurfaceField(PolarGrid grid, Eigen::MatrixXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.rows() != static_cast<Eigen::Index>(grid_.n_delta()) ||
        values_.cols() != static_cast<Eigen::Index>(grid_.n_phi())) {
        throw InvalidArgument("surface field dimensions do not match its grid");
    }
}

WeightFactors::WeightFactors(double lambda0, double lambda1, double lambda2, double lambda3)
    : l_{lambda0, lambda1, lambda2, lambda3} {
    double sum = 0.0;
    for (double v : l_) {
        if (!std::isfinite(v) || v < 0.0) {
            throw InvalidArgument("weight factors must be finite and non-negative");
        }
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw InvalidArgument("weight factors must sum to 1");
    }
}

Toughness::Toughness(double gI, double gII) : gamma_I(gI), gamma_II(gII) {
    if (!(gamma_I > 0.0) || !(gamma_II > 0.0)) {
        throw InvalidArgument("toughness values must be strictly positive");
    }
}

}  // namespace tcnn

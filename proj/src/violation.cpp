#include "tcnn/violation.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tcnn/error.hpp"
#include "tcnn/thermo.hpp"

namespace tcnn {

namespace {

Eigen::Index rows_of(const PolarGrid& g) { return static_cast<Eigen::Index>(g.n_delta()); }
Eigen::Index cols_of(const PolarGrid& g) { return static_cast<Eigen::Index>(g.n_phi()); }

// Bilinear interpolation of node values on the unit chart, node (i, j) at
// (i / (rows - 1), j / (cols - 1)).
double bilinear(const Eigen::MatrixXd& v, double u, double w) {
    const auto rows = v.rows();
    const auto cols = v.cols();
    const double fu = std::clamp(u, 0.0, 1.0) * static_cast<double>(rows - 1);
    const double fw = std::clamp(w, 0.0, 1.0) * static_cast<double>(cols - 1);
    const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(fu)), rows - 2);
    const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(fw)), cols - 2);
    const double a = fu - static_cast<double>(i);
    const double b = fw - static_cast<double>(j);
    const double v00 = v(i, j);
    return v00 + a * (v(i + 1, j) - v00) + b * (v(i, j + 1) - v00) +
           a * b * (v(i + 1, j + 1) - v(i + 1, j) - v(i, j + 1) + v00);
}

}  // namespace

SurfaceField vio1_map(const SurfacePair& surfaces) {
    const auto j = j_integrals_on_grid(surfaces);
    const PolarGrid& grid = surfaces.grid();
    const auto delta = grid.delta_values();
    SurfaceField out(grid);
    for (Eigen::Index c = 0; c < cols_of(grid); ++c) {
        for (Eigen::Index i = 0; i + 1 < rows_of(grid); ++i) {
            const double h = delta[i + 1] - delta[i];
            const double gn = (j.j_n(i + 1, c) - j.j_n(i, c)) / h;
            const double gt = (j.j_t(i + 1, c) - j.j_t(i, c)) / h;
            out(i, c) = std::abs(std::min(gn, 0.0)) + std::abs(std::min(gt, 0.0));
        }
    }
    return out;
}

double steepest_descent_angle(const SurfaceField& damage, Eigen::Index i, Eigen::Index j) {
    const auto& d = damage.values();
    const auto rows = d.rows();
    const auto cols = d.cols();
    if (i <= 0 || j <= 0 || i + 1 >= rows || j + 1 >= cols) {
        throw InvalidArgument("steepest_descent_angle: node has no full neighbourhood");
    }
    const double du = 1.0 / static_cast<double>(rows - 1);
    const double dv = 1.0 / static_cast<double>(cols - 1);
    const double h = 0.5 * std::min(du, dv);
    const double u0 = static_cast<double>(i) * du;
    const double v0 = static_cast<double>(j) * dv;
    const double centre = d(i, j);

    std::array<double, 181> slope{};
    double lowest = 0.0;
    for (int k = 0; k <= 180; ++k) {
        const double theta = static_cast<double>(k - 90);
        slope[k] = (bilinear(d, u0 + h * cos_deg(theta), v0 + h * sin_deg(theta)) - centre) / h;
        lowest = std::min(lowest, slope[k]);
    }
    if (!(lowest < 0.0)) {
        return 0.0;  // nothing descends
    }
    // Among (numerically) tied minima prefer the direction closest to theta = 0.
    const double tol = 1e-12 * std::abs(lowest);
    int best = 0;
    int best_abs = 91;
    for (int k = 0; k <= 180; ++k) {
        if (slope[k] <= lowest + tol && std::abs(k - 90) < best_abs) {
            best = k - 90;
            best_abs = std::abs(best);
        }
    }
    return static_cast<double>(best);
}

SurfaceField vio2_map(const SurfaceField& d_n, const SurfaceField& d_t) {
    if (!(d_n.grid() == d_t.grid())) {
        throw InvalidArgument("vio2_map: damage fields are on different grids");
    }
    const PolarGrid& grid = d_n.grid();
    if (grid.n_delta() < 3 || grid.n_phi() < 3) {
        throw InvalidArgument("vio2_map: grid must be at least 3 x 3");
    }
    SurfaceField out(grid);
    for (Eigen::Index j = 1; j + 1 < cols_of(grid); ++j) {
        for (Eigen::Index i = 1; i + 1 < rows_of(grid); ++i) {
            out(i, j) = std::abs(steepest_descent_angle(d_n, i, j)) + std::abs(steepest_descent_angle(d_t, i, j));
        }
    }
    return out;
}

SurfaceField vio3_map(const SurfacePair& surfaces, double eps_phi_deg, double eps_div) {
    if (!(eps_phi_deg > 0.0)) {
        throw InvalidArgument("vio3_map: threshold angle must be positive");
    }
    const PolarGrid& grid = surfaces.grid();
    const double tol = tan_deg(eps_phi_deg);
    SurfaceField out(grid);
    for (Eigen::Index j = 0; j < cols_of(grid); ++j) {
        const double t = tan_deg(grid.phi_values()[j]);
        if (!std::isfinite(t)) {
            continue;
        }
        for (Eigen::Index i = 0; i < rows_of(grid); ++i) {
            double sn = surfaces.sigma_n(i, j);
            if (std::abs(sn) < eps_div) {
                sn = sn < 0.0 ? -eps_div : eps_div;
            }
            const double dev = std::abs(surfaces.sigma_t(i, j) / sn - t);
            out(i, j) = std::max(dev, tol) - tol;
        }
    }
    return out;
}

SurfaceField normalize_map(const SurfaceField& raw) {
    const double peak = raw.values().maxCoeff();
    if (!(peak > 0.0)) {
        return SurfaceField(raw.grid());
    }
    return SurfaceField(raw.grid(), raw.values() / peak);
}

ViolationMaps compute_violation_maps(const SurfacePair& surfaces, const Toughness& toughness, double eps_phi_deg) {
    const auto damage = damage_on_grid(surfaces, toughness);
    SurfaceField v1 = vio1_map(surfaces);
    SurfaceField v2 = vio2_map(damage.d_n, damage.d_t);
    SurfaceField v3 = vio3_map(surfaces, eps_phi_deg);
    SurfaceField n1 = normalize_map(v1);
    SurfaceField n2 = normalize_map(v2);
    SurfaceField n3 = normalize_map(v3);
    return {std::move(v1), std::move(v2), std::move(v3), std::move(n1), std::move(n2), std::move(n3)};
}

AuditReport violation_ratio(const ViolationMaps& maps) {
    const PolarGrid& grid = maps.vio1.grid();
    if (!(maps.vio2.grid() == grid) || !(maps.vio3.grid() == grid)) {
        throw InvalidArgument("violation_ratio: maps are on different grids");
    }
    const auto& a = maps.vio1.values();
    const auto& b = maps.vio2.values();
    const auto& c = maps.vio3.values();
    std::size_t any = 0;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::size_t n3 = 0;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        const bool v1 = a.data()[k] > 0.0;
        const bool v2 = b.data()[k] > 0.0;
        const bool v3 = c.data()[k] > 0.0;
        n1 += v1;
        n2 += v2;
        n3 += v3;
        any += (v1 || v2 || v3);
    }
    const double total = static_cast<double>(a.size());
    AuditReport r;
    r.violation_ratio = static_cast<double>(any) / total;
    r.ratio_tc1 = static_cast<double>(n1) / total;
    r.ratio_tc2 = static_cast<double>(n2) / total;
    r.ratio_tc3 = static_cast<double>(n3) / total;
    return r;
}

double fitting_error(const TractionModel& model, const Dataset& dataset) {
    if (dataset.total_points() == 0) {
        throw InvalidArgument("fitting_error: dataset is empty");
    }
    Dataset normalized = dataset;
    if (!dataset.is_normalized()) {
        normalized = normalize_with(dataset, model.norm);
    } else if (!dataset.norm_factors()->approx_equal(model.norm)) {
        throw InvalidArgument("fitting_error: dataset was normalized with different factors than the model");
    }
    const auto samples = normalized.samples();
    const auto n = static_cast<Eigen::Index>(samples.size());
    Eigen::Matrix2Xd x(2, n);
    Eigen::Matrix2Xd y(2, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        x(0, k) = s.delta_norm;
        x(1, k) = s.phi_deg;
        y(0, k) = s.sigma_n;
        y(1, k) = s.sigma_t;
    }
    const Eigen::Matrix2Xd pred = predict(model.params, x);
    return (pred - y).squaredNorm() / static_cast<double>(n);
}

Audit audit_model(const TractionModel& model, const Dataset& dataset, const PolarGrid& grid, double eps_phi_deg) {
    const Dataset raw = denormalize_dataset(dataset);
    SurfacePair surfaces = model.predict_surfaces(grid);
    const Toughness toughness = toughness_from_data(raw);
    const auto damage = damage_on_grid(surfaces, toughness);
    // The division floor is defined in normalized traction units.
    const double eps_div = kSigmaDivisionFloor * std::max(model.norm.sigma_n, model.norm.sigma_t);

    SurfaceField v1 = vio1_map(surfaces);
    SurfaceField v2 = vio2_map(damage.d_n, damage.d_t);
    SurfaceField v3 = vio3_map(surfaces, eps_phi_deg, eps_div);
    SurfaceField n1 = normalize_map(v1);
    SurfaceField n2 = normalize_map(v2);
    SurfaceField n3 = normalize_map(v3);
    ViolationMaps maps{std::move(v1), std::move(v2), std::move(v3), std::move(n1), std::move(n2), std::move(n3)};

    AuditReport report = violation_ratio(maps);
    report.fitting_error = fitting_error(model, raw);
    return {std::move(surfaces), std::move(maps), report};
}

}  // namespace tcnn

#include "tcnn/thermo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tcnn/error.hpp"

namespace tcnn {

namespace {

void check_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        throw InvalidArgument(std::string(what) + ": length mismatch");
    }
}

void check_increasing(std::span<const double> delta, const char* what) {
    for (std::size_t k = 1; k < delta.size(); ++k) {
        if (!(delta[k] > delta[k - 1])) {
            throw InvalidArgument(std::string(what) + ": separation must be strictly increasing");
        }
    }
}

// Column j of a matrix as a contiguous span (Eigen storage is column-major).
std::span<const double> column(const Eigen::MatrixXd& m, Eigen::Index j) {
    return {m.data() + j * m.rows(), static_cast<std::size_t>(m.rows())};
}

void check_pair(const SurfacePair& s) {
    if (!(s.sigma_n.grid() == s.sigma_t.grid())) {
        throw InvalidArgument("normal and tangential surfaces are on different grids");
    }
}

double signed_floor(double v, double eps) {
    if (std::abs(v) >= eps) {
        return v;
    }
    return v < 0.0 ? -eps : eps;
}

}  // namespace

std::vector<double> j_integral_path(std::span<const double> sigma, std::span<const double> delta) {
    check_same_length(sigma.size(), delta.size(), "j_integral_path");
    if (delta.size() < 2) {
        throw InvalidArgument("j_integral_path: need at least 2 samples");
    }
    check_increasing(delta, "j_integral_path");
    std::vector<double> j(delta.size(), 0.0);
    for (std::size_t k = 1; k < delta.size(); ++k) {
        j[k] = j[k - 1] + 0.5 * (sigma[k - 1] + sigma[k]) * (delta[k] - delta[k - 1]);
    }
    return j;
}

std::vector<double> j_integral_path_vjp(std::span<const double> grad_j, std::span<const double> delta) {
    check_same_length(grad_j.size(), delta.size(), "j_integral_path_vjp");
    const std::size_t n = delta.size();
    std::vector<double> g(n, 0.0);
    double suffix = 0.0;  // sum of grad_j[k] for k > l
    for (std::size_t l = n - 1; l-- > 0;) {
        suffix += grad_j[l + 1];
        const double w = 0.5 * (delta[l + 1] - delta[l]) * suffix;
        g[l] += w;
        g[l + 1] += w;
    }
    return g;
}

PathIntegrals path_integrals(const LoadingPathData& path, double phi_scale) {
    PathIntegrals out;
    const std::size_t n = path.size();
    if (n < 2) {
        out.j_n.assign(n, 0.0);
        out.j_t.assign(n, 0.0);
        out.j_total.assign(n, 0.0);
        return out;
    }
    const double phi = path.phi() * phi_scale;
    const double pn = cos_deg(phi);
    const double pt = sin_deg(phi);
    const auto delta = path.delta_values();
    out.j_n = j_integral_path(path.sigma_n_values(), delta);
    out.j_t = j_integral_path(path.sigma_t_values(), delta);
    out.j_total.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.j_n[k] *= pn;
        out.j_t[k] *= pt;
        out.j_total[k] = out.j_n[k] + out.j_t[k];
    }
    return out;
}

Toughness toughness_from_data(const Dataset& dataset) {
    if (dataset.empty()) {
        throw InvalidArgument("toughness_from_data: dataset is empty");
    }
    const double phi_scale = dataset.norm_factors() ? dataset.norm_factors()->phi : 1.0;
    double gI = -std::numeric_limits<double>::infinity();
    double gII = -std::numeric_limits<double>::infinity();
    for (const auto& path : dataset.paths()) {
        const auto j = path_integrals(path, phi_scale);
        for (std::size_t k = 0; k < j.j_n.size(); ++k) {
            gI = std::max(gI, j.j_n[k]);
            gII = std::max(gII, j.j_t[k]);
        }
    }
    if (!(gI > 0.0) || !(gII > 0.0)) {
        throw InvalidArgument("toughness_from_data: data paths do not dissipate energy in both modes");
    }
    return {gI, gII};
}

std::vector<double> damage_from_j(std::span<const double> j, double gamma) {
    if (!(gamma > 0.0)) {
        throw InvalidArgument("damage_from_j: toughness must be positive");
    }
    std::vector<double> d(j.size());
    std::transform(j.begin(), j.end(), d.begin(), [gamma](double v) { return 1.0 - v / gamma; });
    return d;
}

namespace {

// Value and active segment of the largest positive damage slope on a path.
struct AscentResult {
    double value = 0.0;
    std::ptrdiff_t segment = -1;
};

AscentResult damage_ascent(std::span<const double> d, std::span<const double> delta) {
    AscentResult r;
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        const double slope = (d[i + 1] - d[i]) / (delta[i + 1] - delta[i]);
        if (slope > r.value) {
            r.value = slope;
            r.segment = static_cast<std::ptrdiff_t>(i);
        }
    }
    return r;
}

}  // namespace

double path_damage_ascent(std::span<const double> damage, std::span<const double> delta) {
    check_same_length(damage.size(), delta.size(), "path_damage_ascent");
    check_increasing(delta, "path_damage_ascent");
    return damage_ascent(damage, delta).value;
}

JIntegralPair j_integrals_on_grid(const SurfacePair& surfaces) {
    check_pair(surfaces);
    const PolarGrid& grid = surfaces.grid();
    if (grid.n_delta() < 2) {
        throw InvalidArgument("grid needs at least 2 separation values");
    }
    const auto delta = grid.delta_values();
    const auto phi = grid.phi_values();
    JIntegralPair out{SurfaceField(grid), SurfaceField(grid)};
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(grid.n_phi()); ++j) {
        const double pn = cos_deg(phi[j]);
        const double pt = sin_deg(phi[j]);
        const auto jn = j_integral_path(column(surfaces.sigma_n.values(), j), delta);
        const auto jt = j_integral_path(column(surfaces.sigma_t.values(), j), delta);
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(grid.n_delta()); ++i) {
            out.j_n(i, j) = pn * jn[i];
            out.j_t(i, j) = pt * jt[i];
        }
    }
    return out;
}

DamagePair damage_on_grid(const SurfacePair& surfaces, const Toughness& toughness) {
    auto j = j_integrals_on_grid(surfaces);
    const PolarGrid& grid = surfaces.grid();
    DamagePair d{SurfaceField(grid, Eigen::MatrixXd::Ones(j.j_n.values().rows(), j.j_n.values().cols()) -
                                        j.j_n.values() / toughness.gamma_I),
                 SurfaceField(grid, Eigen::MatrixXd::Ones(j.j_t.values().rows(), j.j_t.values().cols()) -
                                        j.j_t.values() / toughness.gamma_II)};
    return d;
}

Mse0Result mse0(const Eigen::Matrix2Xd& predicted, const Eigen::Matrix2Xd& target) {
    if (predicted.cols() != target.cols()) {
        throw InvalidArgument("mse0: prediction and target batch sizes differ");
    }
    if (predicted.cols() == 0) {
        throw InvalidArgument("mse0: empty batch");
    }
    const double n = static_cast<double>(predicted.cols());
    Mse0Result r;
    const Eigen::Matrix2Xd diff = predicted - target;
    r.value = diff.squaredNorm() / n;
    r.gradient = (2.0 / n) * diff;
    return r;
}

DamageLoss mse1_from_damage(const DamagePair& damage) {
    const PolarGrid& grid = damage.d_n.grid();
    if (grid.n_delta() < 2) {
        throw InvalidArgument("mse1: grid needs at least 2 separation values");
    }
    const auto delta = grid.delta_values();
    const auto rows = static_cast<Eigen::Index>(grid.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid.n_phi());
    const double scale = 1.0 / (2.0 * static_cast<double>(cols));

    DamageLoss out;
    out.grad_d_n = Eigen::MatrixXd::Zero(rows, cols);
    out.grad_d_t = Eigen::MatrixXd::Zero(rows, cols);
    auto accumulate = [&](const Eigen::MatrixXd& d, Eigen::MatrixXd& grad, Eigen::Index j) {
        const auto r = damage_ascent(column(d, j), delta);
        if (r.segment >= 0) {
            const auto i = static_cast<Eigen::Index>(r.segment);
            const double inv = 1.0 / (delta[i + 1] - delta[i]);
            grad(i + 1, j) += scale * inv;
            grad(i, j) -= scale * inv;
        }
        return r.value;
    };
    double sum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        sum += accumulate(damage.d_n.values(), out.grad_d_n, j);
        sum += accumulate(damage.d_t.values(), out.grad_d_t, j);
    }
    out.value = scale * sum;
    return out;
}

DamageLoss mse2_from_damage(const DamagePair& damage) {
    const PolarGrid& grid = damage.d_n.grid();
    const auto rows = static_cast<Eigen::Index>(grid.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid.n_phi());
    if (cols < 3) {
        throw InvalidArgument("mse2: need at least 3 constraining paths");
    }
    if (rows < 2) {
        throw InvalidArgument("mse2: grid needs at least 2 separation values");
    }
    // Axis-normalized chart: both axes mapped onto [0, 1].
    const double du = 1.0 / static_cast<double>(rows - 1);
    const double dv = 1.0 / static_cast<double>(cols - 1);
    const double scale = 1.0 / (2.0 * static_cast<double>(rows) * static_cast<double>(cols));

    DamageLoss out;
    out.grad_d_n = Eigen::MatrixXd::Zero(rows, cols);
    out.grad_d_t = Eigen::MatrixXd::Zero(rows, cols);
    auto channel = [&](const Eigen::MatrixXd& d, Eigen::MatrixXd& g) {
        double sum = 0.0;
        for (Eigen::Index j = 1; j + 1 < cols; ++j) {
            for (Eigen::Index i = 0; i + 1 < rows; ++i) {
                const double along = (d(i + 1, j) - d(i, j)) / du;
                for (const Eigen::Index nb : {j + 1, j - 1}) {
                    const double across = (d(i, nb) - d(i, j)) / dv;
                    const double excess = along - across;
                    if (excess > 0.0) {
                        sum += excess;
                        g(i + 1, j) += scale / du;
                        g(i, j) -= scale / du;
                        g(i, nb) -= scale / dv;
                        g(i, j) += scale / dv;
                    }
                }
            }
        }
        return sum;
    };
    const double total = channel(damage.d_n.values(), out.grad_d_n) + channel(damage.d_t.values(), out.grad_d_t);
    out.value = scale * total;
    return out;
}

GridLoss chain_damage_gradient(const DamageLoss& loss, const SurfacePair& surfaces, const Toughness& toughness) {
    const PolarGrid& grid = surfaces.grid();
    const auto rows = static_cast<Eigen::Index>(grid.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid.n_phi());
    const auto delta = grid.delta_values();
    const auto phi = grid.phi_values();

    GridLoss out;
    out.value = loss.value;
    out.grad_sigma_n = Eigen::MatrixXd::Zero(rows, cols);
    out.grad_sigma_t = Eigen::MatrixXd::Zero(rows, cols);
    // d = 1 - p * J(sigma) / gamma  =>  dL/dsigma = -(p / gamma) * J^T dL/dd
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double pn = cos_deg(phi[j]);
        const double pt = sin_deg(phi[j]);
        const auto gn = j_integral_path_vjp(column(loss.grad_d_n, j), delta);
        const auto gt = j_integral_path_vjp(column(loss.grad_d_t, j), delta);
        for (Eigen::Index i = 0; i < rows; ++i) {
            out.grad_sigma_n(i, j) = -pn / toughness.gamma_I * gn[i];
            out.grad_sigma_t(i, j) = -pt / toughness.gamma_II * gt[i];
        }
    }
    return out;
}

GridLoss mse1(const SurfacePair& surfaces, const Toughness& toughness) {
    const auto damage = damage_on_grid(surfaces, toughness);
    return chain_damage_gradient(mse1_from_damage(damage), surfaces, toughness);
}

GridLoss mse2(const SurfacePair& surfaces, const Toughness& toughness) {
    const auto damage = damage_on_grid(surfaces, toughness);
    return chain_damage_gradient(mse2_from_damage(damage), surfaces, toughness);
}

GridLoss mse3(const SurfacePair& surfaces, double eps_div) {
    check_pair(surfaces);
    const PolarGrid& grid = surfaces.grid();
    const auto rows = static_cast<Eigen::Index>(grid.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid.n_phi());
    const auto phi = grid.phi_values();
    const auto& sn = surfaces.sigma_n.values();
    const auto& st = surfaces.sigma_t.values();

    GridLoss out;
    out.grad_sigma_n = Eigen::MatrixXd::Zero(rows, cols);
    out.grad_sigma_t = Eigen::MatrixXd::Zero(rows, cols);

    Eigen::Index paths = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        if (std::isfinite(tan_deg(phi[j]))) {
            ++paths;
        }
    }
    if (paths == 0) {
        return out;
    }
    const double scale = 1.0 / (static_cast<double>(paths) * static_cast<double>(rows));
    double sum = 0.0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        const double t = tan_deg(phi[j]);
        if (!std::isfinite(t)) {
            continue;
        }
        for (Eigen::Index i = 0; i < rows; ++i) {
            const double denom = signed_floor(sn(i, j), eps_div);
            const double dev = st(i, j) / denom - t;
            sum += std::abs(dev);
            const double sgn = dev > 0.0 ? 1.0 : (dev < 0.0 ? -1.0 : 0.0);
            out.grad_sigma_t(i, j) = scale * sgn / denom;
            if (std::abs(sn(i, j)) >= eps_div) {
                out.grad_sigma_n(i, j) = -scale * sgn * st(i, j) / (denom * denom);
            }
        }
    }
    out.value = scale * sum;
    return out;
}

LossBreakdown total_loss(double m0, double m1, double m2, double m3, const WeightFactors& w) {
    LossBreakdown b{m0, m1, m2, m3, 0.0};
    b.total = w.lambda0() * m0 + w.lambda1() * m1 + w.lambda2() * m2 + w.lambda3() * m3;
    return b;
}

// ---------------------------------------------------------------------------

namespace {

PolarGrid scaled_grid(const PolarGrid& grid, double delta_scale) {
    std::vector<double> delta(grid.delta_values().begin(), grid.delta_values().end());
    for (double& d : delta) {
        d /= delta_scale;
    }
    return PolarGrid(std::move(delta), {grid.phi_values().begin(), grid.phi_values().end()});
}

const NormFactors& require_norm(const Dataset& d) {
    if (!d.norm_factors()) {
        throw InvalidArgument("LossAssembler: dataset must be normalized");
    }
    return *d.norm_factors();
}

}  // namespace

LossAssembler::LossAssembler(const Dataset& normalized, const PolarGrid& grid, const WeightFactors& weights)
    : grid_(grid),
      norm_grid_(scaled_grid(grid, require_norm(normalized).delta)),
      norm_(require_norm(normalized)),
      weights_(weights),
      toughness_(toughness_from_data(normalized)) {
    const auto samples = normalized.samples();
    const auto nd = static_cast<Eigen::Index>(samples.size());
    if (nd == 0) {
        throw InvalidArgument("LossAssembler: dataset has no samples");
    }
    const auto rows = static_cast<Eigen::Index>(grid_.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid_.n_phi());
    inputs_.resize(2, nd + rows * cols);
    targets_.resize(2, nd);
    for (Eigen::Index k = 0; k < nd; ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        inputs_(0, k) = s.delta_norm;
        inputs_(1, k) = s.phi_deg;
        targets_(0, k) = s.sigma_n;
        targets_(1, k) = s.sigma_t;
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Eigen::Index c = nd + j * rows + i;
            inputs_(0, c) = norm_grid_.delta_values()[i];
            inputs_(1, c) = grid_.phi_values()[j] / norm_.phi;
        }
    }
    // TC3 compares physical ratios, so both channels are brought onto the
    // larger traction scale before dividing.
    const double common = std::max(norm_.sigma_n, norm_.sigma_t);
    ratio_scale_n_ = norm_.sigma_n / common;
    ratio_scale_t_ = norm_.sigma_t / common;
}

SurfacePair LossAssembler::grid_surfaces(const Eigen::Matrix2Xd& outputs) const {
    const auto rows = static_cast<Eigen::Index>(grid_.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid_.n_phi());
    if (outputs.cols() != inputs_.cols()) {
        throw InvalidArgument("LossAssembler: output batch does not match the input batch");
    }
    Eigen::MatrixXd sn(rows, cols);
    Eigen::MatrixXd st(rows, cols);
    const Eigen::Index nd = data_count();
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            sn(i, j) = outputs(0, nd + j * rows + i);
            st(i, j) = outputs(1, nd + j * rows + i);
        }
    }
    return {SurfaceField(norm_grid_, std::move(sn)), SurfaceField(norm_grid_, std::move(st))};
}

LossAssembler::Evaluation LossAssembler::evaluate(const Eigen::Matrix2Xd& outputs) const {
    const Eigen::Index nd = data_count();
    const auto rows = static_cast<Eigen::Index>(grid_.n_delta());
    const auto cols = static_cast<Eigen::Index>(grid_.n_phi());

    const auto m0 = mse0(outputs.leftCols(nd), targets_);
    const SurfacePair surfaces = grid_surfaces(outputs);

    const auto damage = damage_on_grid(surfaces, toughness_);
    const auto m1 = chain_damage_gradient(mse1_from_damage(damage), surfaces, toughness_);
    const auto m2 = chain_damage_gradient(mse2_from_damage(damage), surfaces, toughness_);

    const SurfacePair ratio_surfaces{
        SurfaceField(norm_grid_, ratio_scale_n_ * surfaces.sigma_n.values()),
        SurfaceField(norm_grid_, ratio_scale_t_ * surfaces.sigma_t.values())};
    const auto m3 = mse3(ratio_surfaces);

    Evaluation ev;
    ev.breakdown = total_loss(m0.value, m1.value, m2.value, m3.value, weights_);
    ev.output_gradient.resize(2, outputs.cols());
    ev.output_gradient.leftCols(nd) = weights_.lambda0() * m0.gradient;
    const double l1 = weights_.lambda1();
    const double l2 = weights_.lambda2();
    const double l3 = weights_.lambda3();
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Eigen::Index c = nd + j * rows + i;
            ev.output_gradient(0, c) = l1 * m1.grad_sigma_n(i, j) + l2 * m2.grad_sigma_n(i, j) +
                                       l3 * ratio_scale_n_ * m3.grad_sigma_n(i, j);
            ev.output_gradient(1, c) = l1 * m1.grad_sigma_t(i, j) + l2 * m2.grad_sigma_t(i, j) +
                                       l3 * ratio_scale_t_ * m3.grad_sigma_t(i, j);
        }
    }
    return ev;
}

}  // namespace tcnn

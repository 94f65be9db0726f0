#include "tcnn/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tcnn/error.hpp"

namespace tcnn {

namespace {

constexpr std::array<double, 5> kLengthScales{0.05, 0.1, 0.2, 0.5, 1.0};
constexpr std::array<double, 2> kNoiseLevels{1e-6, 1e-2};

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& ell) {
    Eigen::MatrixXd k(a.cols(), b.cols());
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
        for (Eigen::Index j = 0; j < b.cols(); ++j) {
            const double r2 = ((a.col(i) - b.col(j)).array() / ell.array()).square().sum();
            k(i, j) = std::exp(-0.5 * r2);
        }
    }
    return k;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

bool Reparam::in_box() const {
    return t0 >= kT0Lo && t0 <= kT0Hi && f1 >= kFLo && f1 <= kFHi && f2 >= kFLo && f2 <= kFHi;
}

Eigen::Vector3d Reparam::to_unit() const {
    return {(t0 - kT0Lo) / (kT0Hi - kT0Lo), (f1 - kFLo) / (kFHi - kFLo), (f2 - kFLo) / (kFHi - kFLo)};
}

Reparam Reparam::from_unit(const Eigen::Vector3d& u) {
    return {kT0Lo + (kT0Hi - kT0Lo) * u[0], kFLo + (kFHi - kFLo) * u[1], kFLo + (kFHi - kFLo) * u[2]};
}

WeightFactors reparam_to_weights(const Reparam& r) {
    if (!r.in_box()) {
        throw InvalidArgument("reparam_to_weights: point outside the search box");
    }
    const double l0 = r.t0;
    const double l1 = (1.0 - l0) * r.f1;
    const double l2 = (1.0 - l0 - l1) * r.f2;
    const double l3 = 1.0 - l0 - l1 - l2;
    return {l0, l1, l2, l3};
}

Reparam weights_to_reparam(const WeightFactors& w) {
    const double rest0 = 1.0 - w[0];
    const double rest1 = 1.0 - w[0] - w[1];
    if (!(rest0 > 0.0) || !(rest1 > 0.0)) {
        throw InvalidArgument("weights_to_reparam: fractions undefined for these weights");
    }
    return {w[0], w[1] / rest0, w[2] / rest1};
}

bool within_search_bounds(const WeightFactors& w, double tol) {
    const double rest0 = 1.0 - w[0];
    const double rest1 = 1.0 - w[0] - w[1];
    return w[0] >= Reparam::kT0Lo - tol && w[0] <= Reparam::kT0Hi + tol && w[1] >= rest0 * Reparam::kFLo - tol &&
           w[1] <= rest0 * Reparam::kFHi + tol && w[2] >= rest1 * Reparam::kFLo - tol &&
           w[2] <= rest1 * Reparam::kFHi + tol && w[3] >= -tol;
}

void BOConfig::validate() const {
    if (iterations < 1 || inner_epochs < 1 || init_samples < 1) {
        throw InvalidArgument("BO iterations, inner_epochs and init_samples must be positive");
    }
    if (layer_sizes.size() < 2 || layer_sizes.front() != 2 || layer_sizes.back() != 2) {
        throw InvalidArgument("BO layer sizes must start and end with 2");
    }
}

GPSurrogate::Prediction GPSurrogate::predict(const Eigen::VectorXd& x) const {
    if (x.size() != x_.rows()) {
        throw InvalidArgument("GPSurrogate::predict: dimension mismatch");
    }
    if (degenerate_) {
        return {y_mean_, y_scale_ * y_scale_};
    }
    const Eigen::VectorXd ks = kernel_matrix(x_, x, ell_).col(0);
    const double mean = ks.dot(alpha_);
    const Eigen::VectorXd v = chol_.matrixL().solve(ks);
    const double var = std::max(1.0 - v.squaredNorm(), 0.0);
    return {y_mean_ + y_scale_ * mean, y_scale_ * y_scale_ * var};
}

GPSurrogate gp_fit(const Eigen::MatrixXd& points, const Eigen::VectorXd& values) {
    const Eigen::Index n = points.cols();
    if (n < 2 || values.size() != n) {
        throw InvalidArgument("gp_fit: need at least 2 observations with one value each");
    }
    if (!points.allFinite() || !values.allFinite()) {
        throw InvalidArgument("gp_fit: observations must be finite");
    }
    const Eigen::Index dim = points.rows();
    GPSurrogate gp;
    gp.x_ = points;
    gp.y_ = values;
    gp.y_mean_ = values.mean();
    const double sd = std::sqrt((values.array() - gp.y_mean_).square().sum() / static_cast<double>(n));
    gp.ell_ = Eigen::VectorXd::Constant(dim, 1.0);
    if (!(sd > 0.0)) {
        gp.degenerate_ = true;
        gp.y_scale_ = 1.0;
        return gp;
    }
    gp.y_scale_ = sd;
    const Eigen::VectorXd z = (values.array() - gp.y_mean_) / sd;

    const Eigen::Index combos = static_cast<Eigen::Index>(std::pow(kLengthScales.size(), dim));
    double best_lml = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd ell(dim);
    for (Eigen::Index c = 0; c < combos; ++c) {
        Eigen::Index code = c;
        for (Eigen::Index d = 0; d < dim; ++d) {
            ell[d] = kLengthScales[static_cast<std::size_t>(code % static_cast<Eigen::Index>(kLengthScales.size()))];
            code /= static_cast<Eigen::Index>(kLengthScales.size());
        }
        const Eigen::MatrixXd k = kernel_matrix(points, points, ell);
        for (double noise : kNoiseLevels) {
            Eigen::MatrixXd kn = k;
            kn.diagonal().array() += noise + kGpJitter;
            Eigen::LLT<Eigen::MatrixXd> llt(kn);
            if (llt.info() != Eigen::Success) {
                continue;
            }
            const Eigen::VectorXd alpha = llt.solve(z);
            const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
            const double lml = -0.5 * z.dot(alpha) - 0.5 * log_det;
            if (lml > best_lml) {
                best_lml = lml;
                gp.ell_ = ell;
                gp.noise_ = noise;
                gp.chol_ = llt;
                gp.alpha_ = alpha;
            }
        }
    }
    if (!std::isfinite(best_lml)) {
        throw Error("gp_fit: covariance matrix is not positive definite for any hyperparameters");
    }
    return gp;
}

double expected_improvement(const GPSurrogate& gp, const Eigen::VectorXd& x) {
    const auto p = gp.predict(x);
    const double improvement = gp.best_value() - p.mean;
    const double sd = std::sqrt(p.variance);
    if (!(sd > 1e-12)) {
        return std::max(improvement, 0.0);
    }
    const double z = improvement / sd;
    return std::max(improvement * normal_cdf(z) + sd * normal_pdf(z), 0.0);
}

Reparam acquire(const GPSurrogate& gp, std::mt19937_64& rng) {
    if (gp.points().rows() != 3) {
        throw InvalidArgument("acquire: surrogate must be three-dimensional");
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::Vector3d best_u = Eigen::Vector3d::Zero();
    double best_ei = -1.0;
    for (int k = 0; k < kAcquisitionCandidates; ++k) {
        Eigen::Vector3d u;
        u[0] = unit(rng);
        u[1] = unit(rng);
        u[2] = unit(rng);
        const double ei = expected_improvement(gp, u);
        if (ei > best_ei) {
            best_ei = ei;
            best_u = u;
        }
    }
    return Reparam::from_unit(best_u);
}

double objective(const WeightFactors& weights, const Dataset& normalized, const PolarGrid& grid,
                 std::int64_t inner_epochs, std::uint64_t seed, const std::vector<int>& layer_sizes,
                 const AdamHyper& adam) {
    if (inner_epochs < 0) {
        throw InvalidArgument("objective: inner_epochs must be non-negative");
    }
    const LossAssembler loss(normalized, grid, weights);
    TrainConfig cfg;
    cfg.layer_sizes = layer_sizes;
    cfg.max_epochs = inner_epochs;
    cfg.loss_threshold = std::numeric_limits<double>::min();
    cfg.seed = seed;
    cfg.weights = weights;
    cfg.adam = adam;
    try {
        const TrainResult r = train(loss, cfg);
        const double total = evaluate_loss(r.params, loss).total;
        return std::isfinite(total) ? total : kDivergedLoss;
    } catch (const TrainingDiverged&) {
        return kDivergedLoss;
    }
}

BOResult optimize_weights(const WeightObjective& f, const BOConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    BOResult result;
    result.best_loss = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd xs(3, config.iterations);
    Eigen::VectorXd ys(config.iterations);

    for (std::int64_t it = 0; it < config.iterations; ++it) {
        Reparam r;
        if (it < config.init_samples || it < 2) {
            Eigen::Vector3d u;
            u[0] = unit(rng);
            u[1] = unit(rng);
            u[2] = unit(rng);
            r = Reparam::from_unit(u);
        } else {
            const GPSurrogate gp = gp_fit(xs.leftCols(it), ys.head(it));
            r = acquire(gp, rng);
        }
        const WeightFactors w = reparam_to_weights(r);
        double loss = f(w);
        if (!std::isfinite(loss)) {
            loss = kDivergedLoss;
        }
        xs.col(it) = r.to_unit();
        ys[it] = std::log(std::max(loss, std::numeric_limits<double>::min()));
        if (loss < result.best_loss) {
            result.best_loss = loss;
            result.best_weights = w;
        }
        result.history.push_back({it, w, loss, result.best_loss});
    }
    return result;
}

BOResult optimize_weights(const Dataset& normalized, const PolarGrid& grid, const BOConfig& config) {
    if (!normalized.is_normalized()) {
        throw InvalidArgument("optimize_weights: dataset must be normalized");
    }
    return optimize_weights(
        [&](const WeightFactors& w) {
            return objective(w, normalized, grid, config.inner_epochs, config.seed, config.layer_sizes, config.adam);
        },
        config);
}

}  // namespace tcnn

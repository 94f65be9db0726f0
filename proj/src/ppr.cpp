#include "tcnn/ppr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "tcnn/error.hpp"

namespace tcnn {

namespace {

double macaulay(double x) { return x > 0.0 ? x : 0.0; }

// Shape function (1 - x)^a (k/a + x)^k and its derivative in x.
struct Shape {
    double value;
    double slope;
};

Shape shape(double x, double a, double k) {
    const double one_minus = 1.0 - x;
    const double shifted = k / a + x;
    const double value = std::pow(one_minus, a) * std::pow(shifted, k);
    // k (1-x)^a (k/a+x)^(k-1) - a (1-x)^(a-1) (k/a+x)^k, factored
    const double slope = -(a + k) * x * std::pow(one_minus, a - 1.0) * std::pow(shifted, k - 1.0);
    return {value, slope};
}

struct FlatData {
    std::vector<double> dn, dt, sn, st;
};

FlatData flatten(const Dataset& dataset) {
    const Dataset raw = denormalize_dataset(dataset);
    FlatData f;
    for (const auto& s : raw.samples()) {
        const auto sep = polar_compose(s.delta_norm, s.phi_deg);
        f.dn.push_back(sep.delta_n);
        f.dt.push_back(sep.delta_t);
        f.sn.push_back(s.sigma_n);
        f.st.push_back(s.sigma_t);
    }
    return f;
}

double residual_flat(const PPRParams& p, const PPRDerived& d, const FlatData& f) {
    double sum = 0.0;
    for (std::size_t k = 0; k < f.dn.size(); ++k) {
        const auto t = ppr_traction(p, d, f.dn[k], f.dt[k]);
        const double en = t.sigma_n - f.sn[k];
        const double et = t.sigma_t - f.st[k];
        sum += en * en + et * et;
    }
    return sum / static_cast<double>(f.dn.size());
}

}  // namespace

const std::array<const char*, PPRParams::kCount>& PPRParams::names() {
    static const std::array<const char*, kCount> n{"delta_n_final", "delta_t_final", "delta_nc", "delta_tc",
                                                   "psi_n",         "psi_t",         "alpha",    "beta"};
    return n;
}

std::array<double, PPRParams::kCount> PPRParams::to_array() const {
    return {delta_n_final, delta_t_final, delta_nc, delta_tc, psi_n, psi_t, alpha, beta};
}

PPRParams PPRParams::from_array(const std::array<double, kCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

std::string PPRParams::check() const {
    for (double v : to_array()) {
        if (!std::isfinite(v)) {
            return "PPR parameters must be finite";
        }
    }
    if (!(delta_nc > 0.0 && delta_nc < delta_n_final)) {
        return "need 0 < delta_nc < delta_n_final";
    }
    if (!(delta_tc > 0.0 && delta_tc < delta_t_final)) {
        return "need 0 < delta_tc < delta_t_final";
    }
    if (!(psi_n > 0.0 && psi_t > 0.0)) {
        return "fracture energies must be positive";
    }
    if (!(alpha > 1.0 && beta > 1.0)) {
        return "shape exponents must exceed 1";
    }
    const double ln = lambda_n();
    const double lt = lambda_t();
    if (!(alpha * ln * ln < 1.0)) {
        return "alpha * lambda_n^2 must be below 1";
    }
    if (!(beta * lt * lt < 1.0)) {
        return "beta * lambda_t^2 must be below 1";
    }
    return {};
}

void PPRParams::validate() const {
    if (auto msg = check(); !msg.empty()) {
        throw InvalidArgument("PPR: " + msg);
    }
}

PPRDerived ppr_derived(const PPRParams& p) {
    p.validate();
    const double ln2 = p.lambda_n() * p.lambda_n();
    const double lt2 = p.lambda_t() * p.lambda_t();
    PPRDerived d;
    d.m = p.alpha * (p.alpha - 1.0) * ln2 / (1.0 - p.alpha * ln2);
    d.n = p.beta * (p.beta - 1.0) * lt2 / (1.0 - p.beta * lt2);
    const bool normal_dominant = p.psi_n >= p.psi_t;
    d.energy_n = (normal_dominant ? -p.psi_n : 1.0) * std::pow(p.alpha / d.m, d.m);
    d.energy_t = (normal_dominant ? 1.0 : -p.psi_t) * std::pow(p.beta / d.n, d.n);
    return d;
}

Traction ppr_traction(const PPRParams& p, double delta_n, double delta_t) {
    return ppr_traction(p, ppr_derived(p), delta_n, delta_t);
}

Traction ppr_traction(const PPRParams& p, const PPRDerived& d, double delta_n, double delta_t) {
    if (delta_n < 0.0) {
        throw InvalidArgument("ppr_traction: negative normal separation is not modelled");
    }
    const double x = delta_n / p.delta_n_final;
    const double y = std::abs(delta_t) / p.delta_t_final;
    if (x >= 1.0 || y >= 1.0) {
        return {};
    }
    const Shape fn = shape(x, p.alpha, d.m);
    const Shape ft = shape(y, p.beta, d.n);
    const double sign_t = delta_t > 0.0 ? 1.0 : (delta_t < 0.0 ? -1.0 : 0.0);
    Traction t;
    t.sigma_n = d.energy_n / p.delta_n_final * fn.slope * (d.energy_t * ft.value + macaulay(p.psi_t - p.psi_n));
    t.sigma_t =
        d.energy_t / p.delta_t_final * ft.slope * (d.energy_n * fn.value + macaulay(p.psi_n - p.psi_t)) * sign_t;
    return t;
}

double ppr_potential(const PPRParams& p, double delta_n, double delta_t) {
    const PPRDerived d = ppr_derived(p);
    const double x = std::min(delta_n / p.delta_n_final, 1.0);
    const double y = std::min(std::abs(delta_t) / p.delta_t_final, 1.0);
    const Shape fn = shape(x, p.alpha, d.m);
    const Shape ft = shape(y, p.beta, d.n);
    return std::min(p.psi_n, p.psi_t) + (d.energy_n * fn.value + macaulay(p.psi_n - p.psi_t)) *
                                            (d.energy_t * ft.value + macaulay(p.psi_t - p.psi_n));
}

Dataset gen_synthetic_dataset(const PPRParams& params, const SyntheticSpec& spec) {
    if (spec.phases_deg.empty()) {
        throw InvalidArgument("gen_synthetic_dataset: no phase angles given");
    }
    if (!(spec.delta_step > 0.0)) {
        throw InvalidArgument("gen_synthetic_dataset: delta_step must be positive");
    }
    if (!(spec.noise_sigma >= 0.0)) {
        throw InvalidArgument("gen_synthetic_dataset: noise_sigma must be non-negative");
    }
    const PPRDerived derived = ppr_derived(params);

    std::vector<double> phases;
    std::vector<std::vector<PathPoint>> points;
    double max_n = 0.0;
    double max_t = 0.0;
    for (double phi : spec.phases_deg) {
        if (!in_canonical_phase_range(phi)) {
            throw InvalidArgument("gen_synthetic_dataset: phase angle outside (-90, 90]");
        }
        std::vector<PathPoint> path;
        for (std::int64_t k = 0;; ++k) {
            const double r = static_cast<double>(k) * spec.delta_step;
            const auto sep = polar_compose(r, phi);
            if (sep.delta_n > params.delta_n_final || std::abs(sep.delta_t) > params.delta_t_final) {
                break;
            }
            const auto t = ppr_traction(params, derived, sep.delta_n, sep.delta_t);
            path.push_back({r, t.sigma_n, t.sigma_t});
            max_n = std::max(max_n, std::abs(t.sigma_n));
            max_t = std::max(max_t, std::abs(t.sigma_t));
        }
        if (path.size() < 2) {
            throw InvalidArgument("gen_synthetic_dataset: delta_step too coarse for the failure envelope");
        }
        phases.push_back(phi);
        points.push_back(std::move(path));
    }

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sd_n = spec.noise_sigma * max_n;
    const double sd_t = spec.noise_sigma * max_t;
    std::vector<LoadingPathData> paths;
    for (std::size_t j = 0; j < phases.size(); ++j) {
        if (spec.noise_sigma > 0.0) {
            for (auto& p : points[j]) {
                p.sigma_n += sd_n * gauss(rng);
                p.sigma_t += sd_t * gauss(rng);
            }
        }
        paths.emplace_back(phases[j], std::move(points[j]));
    }
    return Dataset(std::move(paths));
}

PPRRanges ranges_around(const PPRParams& center, double fraction) {
    PPRRanges r;
    const auto v = center.to_array();
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        r[k] = {v[k] * (1.0 - fraction), v[k] * (1.0 + fraction)};
    }
    return r;
}

double ppr_residual(const PPRParams& params, const Dataset& dataset) {
    if (dataset.total_points() == 0) {
        throw InvalidArgument("ppr_residual: dataset is empty");
    }
    return residual_flat(params, ppr_derived(params), flatten(dataset));
}

MonteCarloFit monte_carlo_fit(const Dataset& dataset, const PPRRanges& ranges, std::int64_t iterations,
                              std::uint64_t seed) {
    if (iterations < 1) {
        throw InvalidArgument("monte_carlo_fit: need at least one iteration");
    }
    if (dataset.total_points() == 0) {
        throw InvalidArgument("monte_carlo_fit: dataset is empty");
    }
    for (const auto& r : ranges) {
        if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
            throw InvalidArgument("monte_carlo_fit: each range needs finite lo <= hi");
        }
    }
    const FlatData data = flatten(dataset);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MonteCarloFit fit;
    fit.residual = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::int64_t it = 0; it < iterations; ++it) {
        std::array<double, PPRParams::kCount> v{};
        for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
            v[k] = ranges[k].lo + (ranges[k].hi - ranges[k].lo) * unit(rng);
        }
        const PPRParams candidate = PPRParams::from_array(v);
        if (!candidate.check().empty()) {
            continue;
        }
        ++fit.feasible_samples;
        const double res = residual_flat(candidate, ppr_derived(candidate), data);
        if (!found || res < fit.residual) {
            fit.best = candidate;
            fit.residual = res;
            found = true;
        }
    }
    if (!found) {
        throw InvalidArgument("monte_carlo_fit: no feasible parameter set was drawn from the ranges");
    }
    const auto best = fit.best.to_array();
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        const double margin = 0.01 * (ranges[k].hi - ranges[k].lo);
        if (best[k] - ranges[k].lo <= margin || ranges[k].hi - best[k] <= margin) {
            fit.boundary_warnings.emplace_back(PPRParams::names()[k]);
        }
    }
    return fit;
}

}  // namespace tcnn

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tcnn/error.hpp"
#include "tcnn/ppr.hpp"
#include "tcnn/thermo.hpp"
#include "tcnn/violation.hpp"

using namespace tcnn;

namespace {

PPRParams symmetric() {
    PPRParams p;
    p.delta_n_final = p.delta_t_final = 2.0;
    p.delta_nc = p.delta_tc = 0.4;
    p.psi_n = p.psi_t = 5.0;
    p.alpha = p.beta = 3.0;
    return p;
}

}  // namespace

TEST(PprParams, Invariants) {
    EXPECT_TRUE(PPRParams{}.check().empty());
    PPRParams p;
    p.delta_nc = 3.0;
    EXPECT_FALSE(p.check().empty());
    p = {};
    p.alpha = 1.0;
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = {};
    p.delta_nc = 1.5;  // lambda_n = 0.6, alpha lambda_n^2 = 1.08
    EXPECT_THROW(p.validate(), InvalidArgument);
    p = {};
    p.psi_t = 0.0;
    EXPECT_THROW(ppr_derived(p), InvalidArgument);
}

TEST(PprDerived, ExponentExample) {
    PPRParams p;
    p.delta_n_final = 2.0;
    p.delta_nc = 1.0;
    p.alpha = 3.0;
    EXPECT_DOUBLE_EQ(ppr_derived(p).m, 6.0);
}

TEST(PprDerived, SymmetricParameters) {
    const PPRDerived d = ppr_derived(symmetric());
    EXPECT_EQ(d.m, d.n);
}

TEST(PprDerived, ExponentDivergesNearLimit) {
    PPRParams p;
    p.delta_n_final = 1.0;
    p.alpha = 3.0;
    double previous = 0.0;
    for (double eps : {1e-2, 1e-3, 1e-4, 1e-5}) {
        p.delta_nc = 1.0 / std::sqrt(3.0) - eps;
        const double m = ppr_derived(p).m;
        EXPECT_GT(m, previous);
        previous = m;
    }
    EXPECT_GT(previous, 1e4);
}

TEST(PprTraction, VanishesAtEnvelopeAndOrigin) {
    const PPRParams p;
    EXPECT_EQ(ppr_traction(p, p.delta_n_final, 0.3).sigma_n, 0.0);
    EXPECT_EQ(ppr_traction(p, 0.0, 0.7).sigma_n, 0.0);
    EXPECT_EQ(ppr_traction(p, 0.0, 0.0).sigma_t, 0.0);
    const Traction beyond = ppr_traction(p, 0.2, 3.5);
    EXPECT_EQ(beyond.sigma_n, 0.0);
    EXPECT_EQ(beyond.sigma_t, 0.0);
    EXPECT_THROW(ppr_traction(p, -0.1, 0.0), InvalidArgument);
}

TEST(PprTraction, PositiveInsideEnvelope) {
    const PPRParams p;
    const Traction t = ppr_traction(p, 0.5, 0.6);
    EXPECT_GT(t.sigma_n, 0.0);
    EXPECT_GT(t.sigma_t, 0.0);
    EXPECT_LT(ppr_traction(p, 0.5, -0.6).sigma_t, 0.0);
    EXPECT_EQ(ppr_traction(p, 0.5, -0.6).sigma_t, -t.sigma_t);
}

TEST(PprTraction, SwapSymmetry) {
    const PPRParams p = symmetric();
    for (double x : {0.1, 0.4, 0.9, 1.5}) {
        const Traction t = ppr_traction(p, x, x);
        EXPECT_NEAR(t.sigma_n, t.sigma_t, 1e-12 * std::abs(t.sigma_n));
    }
    const Traction a = ppr_traction(p, 0.3, 0.8);
    const Traction b = ppr_traction(p, 0.8, 0.3);
    EXPECT_NEAR(a.sigma_n, b.sigma_t, 1e-12);
    EXPECT_NEAR(a.sigma_t, b.sigma_n, 1e-12);
}

TEST(PprTraction, PureModePeakAtCriticalOpening) {
    const PPRParams p;
    const double h = 1e-5;
    const double at = ppr_traction(p, p.delta_nc, 0.0).sigma_n;
    EXPECT_GT(at, ppr_traction(p, p.delta_nc - h, 0.0).sigma_n);
    EXPECT_GT(at, ppr_traction(p, p.delta_nc + h, 0.0).sigma_n);
}

TEST(PprTraction, PureModeWorkEqualsFractureEnergy) {
    for (const PPRParams& p : {PPRParams{}, symmetric()}) {
        const int n = 20000;
        std::vector<double> d(n + 1);
        std::vector<double> sn(n + 1);
        std::vector<double> st(n + 1);
        for (int k = 0; k <= n; ++k) {
            d[k] = p.delta_n_final * k / n;
            sn[k] = ppr_traction(p, d[k], 0.0).sigma_n;
        }
        EXPECT_NEAR(j_integral_path(sn, d).back(), p.psi_n, 1e-4 * p.psi_n);
        for (int k = 0; k <= n; ++k) {
            d[k] = p.delta_t_final * k / n;
            st[k] = ppr_traction(p, 0.0, d[k]).sigma_t;
        }
        EXPECT_NEAR(j_integral_path(st, d).back(), p.psi_t, 1e-4 * p.psi_t);
    }
}

TEST(PprPotential, GradientMatchesTractions) {
    const PPRParams p;
    const double h = 1e-6;
    for (double dn : {0.2, 0.7, 1.3, 2.1}) {
        for (double dt : {-1.2, 0.1, 0.9, 2.4}) {
            const Traction t = ppr_traction(p, dn, dt);
            const double fn = (ppr_potential(p, dn + h, dt) - ppr_potential(p, dn - h, dt)) / (2 * h);
            const double ft = (ppr_potential(p, dn, dt + h) - ppr_potential(p, dn, dt - h)) / (2 * h);
            EXPECT_NEAR(t.sigma_n, fn, 1e-6 * std::max(1.0, std::abs(fn)));
            EXPECT_NEAR(t.sigma_t, ft, 1e-6 * std::max(1.0, std::abs(ft)));
        }
    }
}

TEST(PprPotential, RestsAtZeroAndReachesSmallerEnergy) {
    const PPRParams p;
    EXPECT_NEAR(ppr_potential(p, 0.0, 0.0), 0.0, 1e-12);
    EXPECT_NEAR(ppr_potential(p, p.delta_n_final, 0.0), p.psi_n, 1e-12);
    EXPECT_NEAR(ppr_potential(p, 0.0, p.delta_t_final), p.psi_t, 1e-12);
}

TEST(Synthetic, NoiseFreeMatchesModel) {
    const PPRParams p;
    const Dataset d = gen_synthetic_dataset(p, {});
    ASSERT_EQ(d.paths().size(), kDefaultPhases.size());
    for (const auto& path : d.paths()) {
        for (const auto& pt : path.points()) {
            const auto sep = polar_compose(pt.delta_norm, path.phi());
            const Traction t = ppr_traction(p, sep.delta_n, sep.delta_t);
            EXPECT_EQ(pt.sigma_n, t.sigma_n);
            EXPECT_EQ(pt.sigma_t, t.sigma_t);
            EXPECT_LE(sep.delta_n, p.delta_n_final);
            EXPECT_LE(std::abs(sep.delta_t), p.delta_t_final);
        }
    }
}

TEST(Synthetic, DefaultPhasesInclude27) {
    EXPECT_NE(std::find(kDefaultPhases.begin(), kDefaultPhases.end(), 27.0), kDefaultPhases.end());
    EXPECT_EQ(kDefaultPhases.size(), 8u);
}

TEST(Synthetic, SeededNoise) {
    SyntheticSpec s;
    s.noise_sigma = 0.05;
    s.seed = 9;
    const auto a = gen_synthetic_dataset(PPRParams{}, s).samples();
    const auto b = gen_synthetic_dataset(PPRParams{}, s).samples();
    const auto clean = gen_synthetic_dataset(PPRParams{}, {}).samples();
    ASSERT_EQ(a.size(), b.size());
    bool differs = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        EXPECT_EQ(a[k].sigma_n, b[k].sigma_n);
        EXPECT_EQ(a[k].sigma_t, b[k].sigma_t);
        differs = differs || a[k].sigma_n != clean[k].sigma_n;
    }
    EXPECT_TRUE(differs);
}

TEST(Synthetic, Errors) {
    SyntheticSpec s;
    s.phases_deg.clear();
    EXPECT_THROW(gen_synthetic_dataset(PPRParams{}, s), InvalidArgument);
    s.phases_deg = {100.0};
    EXPECT_THROW(gen_synthetic_dataset(PPRParams{}, s), InvalidArgument);
    s = {};
    s.noise_sigma = -1.0;
    EXPECT_THROW(gen_synthetic_dataset(PPRParams{}, s), InvalidArgument);
}

TEST(Synthetic, PureModeSurfacesAreMonotoneInJ) {
    const PPRParams p;
    const PolarGrid g = build_constraint_grid();
    Eigen::MatrixXd sn(g.n_delta(), g.n_phi());
    Eigen::MatrixXd st(g.n_delta(), g.n_phi());
    for (Eigen::Index j = 0; j < sn.cols(); ++j) {
        for (Eigen::Index i = 0; i < sn.rows(); ++i) {
            const auto sep = polar_compose(g.delta_values()[i], g.phi_values()[j]);
            const Traction t = ppr_traction(p, sep.delta_n, sep.delta_t);
            sn(i, j) = t.sigma_n;
            st(i, j) = t.sigma_t;
        }
    }
    const SurfaceField v = vio1_map({SurfaceField(g, sn), SurfaceField(g, st)});
    EXPECT_EQ(v.values().col(4).maxCoeff(), 0.0);   // phi = 0
    EXPECT_EQ(v.values().col(10).maxCoeff(), 0.0);  // phi = 90
}

TEST(MonteCarlo, SingleIterationReturnsTheDraw) {
    const PPRParams p;
    const Dataset d = gen_synthetic_dataset(p, {});
    const PPRRanges r = ranges_around(p, 0.05);
    const MonteCarloFit fit = monte_carlo_fit(d, r, 1, 42);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto best = fit.best.to_array();
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        EXPECT_EQ(best[k], r[k].lo + (r[k].hi - r[k].lo) * u(rng));
    }
    EXPECT_EQ(fit.residual, ppr_residual(fit.best, d));
}

TEST(MonteCarlo, ArgminAndReproducible) {
    const PPRParams p;
    const Dataset d = gen_synthetic_dataset(p, {});
    const PPRRanges r = ranges_around(p, 0.1);
    const MonteCarloFit a = monte_carlo_fit(d, r, 300, 3);
    const MonteCarloFit b = monte_carlo_fit(d, r, 300, 3);
    EXPECT_EQ(a.residual, b.residual);
    EXPECT_EQ(a.best.to_array(), b.best.to_array());
    EXPECT_EQ(ppr_residual(p, d), 0.0);
    EXPECT_GE(a.residual, 0.0);
    // The best of 300 draws is no worse than the first 10 draws.
    EXPECT_LE(a.residual, monte_carlo_fit(d, r, 10, 3).residual);
}

TEST(MonteCarlo, PinnedRangeWarns) {
    const PPRParams p;
    const Dataset d = gen_synthetic_dataset(p, {});
    PPRRanges r = ranges_around(p, 0.1);
    r[6] = {3.0, 3.0};
    const MonteCarloFit fit = monte_carlo_fit(d, r, 20, 1);
    EXPECT_NE(std::find(fit.boundary_warnings.begin(), fit.boundary_warnings.end(), "alpha"),
              fit.boundary_warnings.end());
}

TEST(MonteCarlo, InfeasibleRangesFail) {
    const PPRParams p;
    const Dataset d = gen_synthetic_dataset(p, {});
    PPRRanges r = ranges_around(p, 0.1);
    r[2] = {5.0, 6.0};  // delta_nc beyond delta_n_final
    EXPECT_THROW(monte_carlo_fit(d, r, 50, 1), InvalidArgument);
    EXPECT_THROW(monte_carlo_fit(d, ranges_around(p, 0.1), 0, 1), InvalidArgument);
}

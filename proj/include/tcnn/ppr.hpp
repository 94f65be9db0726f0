#pragma once

// Park-Paulino-Roesler potential-based cohesive law: analytic tractions,
// synthetic dataset generation along proportional paths, and a Monte-Carlo
// random-search fit of its eight independent parameters.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tcnn/domain.hpp"

namespace tcnn {

/// The eight independent PPR parameters. Lengths in um, energies in J/m^2.
struct PPRParams {
    double delta_n_final = 2.5;  // normal final opening
    double delta_t_final = 3.0;  // tangential final opening
    double delta_nc = 0.5;       // normal opening at peak traction
    double delta_tc = 0.6;       // tangential opening at peak traction
    double psi_n = 10.0;         // mode I fracture energy
    double psi_t = 12.0;         // mode II fracture energy
    double alpha = 3.0;          // normal softening shape
    double beta = 3.0;           // tangential softening shape

    static constexpr std::size_t kCount = 8;
    static const std::array<const char*, kCount>& names();

    double lambda_n() const { return delta_nc / delta_n_final; }
    double lambda_t() const { return delta_tc / delta_t_final; }

    std::array<double, kCount> to_array() const;
    static PPRParams from_array(const std::array<double, kCount>& v);

    /// Empty string when every invariant holds, otherwise the first violation.
    std::string check() const;
    void validate() const;
};

struct PPRDerived {
    double m = 0.0;
    double n = 0.0;
    double energy_n = 0.0;  // Psi_n
    double energy_t = 0.0;  // Psi_t
};

/// Exponents m, n and the energy constants. When psi_n == psi_t the normal
/// exponent of the energy constant is taken as 1 and the tangential one as 0,
/// the limit approached from psi_n > psi_t.
PPRDerived ppr_derived(const PPRParams& params);

struct Traction {
    double sigma_n = 0.0;
    double sigma_t = 0.0;
};

/// Tractions for 0 <= delta_n and any delta_t. Beyond either final opening the
/// interface is fully failed and both tractions are 0.
Traction ppr_traction(const PPRParams& params, double delta_n, double delta_t);
Traction ppr_traction(const PPRParams& params, const PPRDerived& derived, double delta_n, double delta_t);

/// Closed-form potential; sigma_n and sigma_t are its partial derivatives
/// inside the failure envelope.
double ppr_potential(const PPRParams& params, double delta_n, double delta_t);

/// 8 paths including the nominal 27 degree experiment.
inline const std::vector<double> kDefaultPhases{-45.0, -15.0, 0.0, 27.0, 45.0, 60.0, 75.0, 90.0};

struct SyntheticSpec {
    std::vector<double> phases_deg = kDefaultPhases;
    double delta_step = 0.1;
    double noise_sigma = 0.0;  // fraction of each channel's max |traction|
    std::uint64_t seed = 0;
};

/// Samples PPR tractions along proportional paths from |delta| = 0 until the
/// path leaves the failure envelope, then adds independent Gaussian noise.
Dataset gen_synthetic_dataset(const PPRParams& params, const SyntheticSpec& spec);

struct ParamRange {
    double lo = 0.0;
    double hi = 0.0;
};

using PPRRanges = std::array<ParamRange, PPRParams::kCount>;

/// Ranges of +-fraction around a parameter set.
PPRRanges ranges_around(const PPRParams& center, double fraction);

/// Mean over samples of the squared 2-norm traction error. Uses physical units
/// (a normalized dataset is denormalized first).
double ppr_residual(const PPRParams& params, const Dataset& dataset);

struct MonteCarloFit {
    PPRParams best;
    double residual = 0.0;
    std::int64_t feasible_samples = 0;
    /// Names of parameters within 1% of a range boundary.
    std::vector<std::string> boundary_warnings;
};

/// Uniform random search over the ranges; infeasible draws are skipped. Ties
/// keep the earliest candidate.
MonteCarloFit monte_carlo_fit(const Dataset& dataset, const PPRRanges& ranges, std::int64_t iterations,
                              std::uint64_t seed);

}  // namespace tcnn

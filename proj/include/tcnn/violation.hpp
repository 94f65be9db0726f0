#pragma once

// Post-hoc audit of a traction surface against the three consistency
// conditions, plus the fitting error on the experimental paths.

#include "tcnn/domain.hpp"
#include "tcnn/net.hpp"

namespace tcnn {

inline constexpr double kDefaultEpsPhiDeg = 5.0;

/// |min(dJn/d|delta|, 0)| + |min(dJt/d|delta|, 0)| per node, forward
/// differences along each constraining path. The last separation row has no
/// forward neighbour and is 0.
SurfaceField vio1_map(const SurfacePair& surfaces);

/// |theta_dd,n| + |theta_dd,t| in degrees, where theta_dd is the loading
/// angle of steepest damage descent found by a 1 degree scan over
/// [-90, 90] on the axis-normalized (|delta|, phi) chart with bilinear
/// interpolation. Boundary nodes are 0; so are nodes where no direction
/// descends.
SurfaceField vio2_map(const SurfaceField& d_n, const SurfaceField& d_t);

/// Steepest-descent loading angle at interior node (i, j), in degrees.
double steepest_descent_angle(const SurfaceField& damage, Eigen::Index i, Eigen::Index j);

/// max(|sigma_t / sigma_n - tan(phi)|, tan(eps)) - tan(eps). Columns at
/// phi = 90 are 0.
SurfaceField vio3_map(const SurfacePair& surfaces, double eps_phi_deg = kDefaultEpsPhiDeg,
                      double eps_div = kSigmaDivisionFloor);

/// Scales a non-negative map so its maximum is 1; an all-zero map stays zero.
SurfaceField normalize_map(const SurfaceField& raw);

struct ViolationMaps {
    SurfaceField vio1;
    SurfaceField vio2;
    SurfaceField vio3;
    SurfaceField vio1_norm;
    SurfaceField vio2_norm;
    SurfaceField vio3_norm;
};

ViolationMaps compute_violation_maps(const SurfacePair& surfaces, const Toughness& toughness,
                                     double eps_phi_deg = kDefaultEpsPhiDeg);

struct AuditReport {
    double fitting_error = 0.0;
    double violation_ratio = 0.0;
    double ratio_tc1 = 0.0;
    double ratio_tc2 = 0.0;
    double ratio_tc3 = 0.0;
};

/// Fraction of grid nodes with any raw violation, plus per-condition
/// fractions. fitting_error is left at 0.
AuditReport violation_ratio(const ViolationMaps& maps);

/// Mean over all data samples of the squared 2-norm error in normalized
/// units. A raw dataset is normalized with the model's factors; a normalized
/// one must carry the same factors.
double fitting_error(const TractionModel& model, const Dataset& dataset);

/// Surfaces, maps and report for a model over a grid. Toughness comes from
/// the (raw) dataset.
struct Audit {
    SurfacePair surfaces;
    ViolationMaps maps;
    AuditReport report;
};

Audit audit_model(const TractionModel& model, const Dataset& dataset, const PolarGrid& grid,
                  double eps_phi_deg = kDefaultEpsPhiDeg);

}  // namespace tcnn

#pragma once

// Text formats for datasets, models, histories, grid matrices and flat
// key=value files. Doubles are written in shortest round-trip form so that
// rereading reproduces every bit.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tcnn/bayesopt.hpp"
#include "tcnn/domain.hpp"
#include "tcnn/net.hpp"
#include "tcnn/ppr.hpp"
#include "tcnn/thermo.hpp"
#include "tcnn/violation.hpp"

namespace tcnn {

/// Shortest decimal text that parses back to exactly x.
std::string format_double(double x);

/// Strict parse of a whole string as a finite double.
double parse_double(const std::string& text);

// Dataset CSV: path_id,phi_deg,delta_norm_um,sigma_n_MPa,sigma_t_MPa.
// Normalized datasets are written in physical units.
inline constexpr const char* kDatasetHeader = "path_id,phi_deg,delta_norm_um,sigma_n_MPa,sigma_t_MPa";

void write_dataset_csv(std::ostream& os, const Dataset& dataset);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset);
/// Errors name the offending line number.
Dataset read_dataset_csv(std::istream& is);
Dataset read_dataset_csv(const std::filesystem::path& path);

// Model file, "TCNN-MLP v1".
inline constexpr const char* kModelMagic = "TCNN-MLP v1";

void write_model(std::ostream& os, const TractionModel& model);
void write_model(const std::filesystem::path& path, const TractionModel& model);
TractionModel read_model(std::istream& is);
TractionModel read_model(const std::filesystem::path& path);

void write_loss_history_csv(const std::filesystem::path& path, const std::vector<LossBreakdown>& history);
std::vector<LossBreakdown> read_loss_history_csv(const std::filesystem::path& path);

void write_bo_history_csv(const std::filesystem::path& path, const std::vector<BOStep>& history);
std::vector<BOStep> read_bo_history_csv(const std::filesystem::path& path);

/// Matrix over a grid: the header row holds the phase angles, the first
/// column the separations.
void write_grid_csv(std::ostream& os, const SurfaceField& field);
void write_grid_csv(const std::filesystem::path& path, const SurfaceField& field);
SurfaceField read_grid_csv(const std::filesystem::path& path);

// Flat key=value text. Blank lines and lines starting with '#' are ignored;
// duplicate keys are errors.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::map<std::string, std::string> parse_key_values(std::istream& is, const std::string& source);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValues& entries);

KeyValues to_key_values(const PPRParams& params);
PPRParams ppr_params_from_key_values(const std::map<std::string, std::string>& kv);

KeyValues to_key_values(const WeightFactors& weights);
WeightFactors weights_from_key_values(const std::map<std::string, std::string>& kv);

/// JSON object with exactly the five report keys.
std::string audit_report_json(const AuditReport& report);
AuditReport audit_report_from_json(const std::string& text);

/// JSON with the fitted parameters, the residual, the feasible sample count
/// and the boundary warnings.
std::string ppr_fit_json(const MonteCarloFit& fit, std::int64_t iterations);

/// Whole file as a string.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace tcnn

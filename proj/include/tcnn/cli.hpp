#pragma once

// Run configuration and the command implementations behind the tcnn tool.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcnn/bayesopt.hpp"
#include "tcnn/domain.hpp"
#include "tcnn/io.hpp"
#include "tcnn/net.hpp"
#include "tcnn/ppr.hpp"

namespace tcnn {

/// Flat key=value configuration. Unknown keys are rejected and missing keys
/// keep the defaults below (see config_keys() for the full list).
struct RunConfig {
    std::uint64_t seed = 0;

    // training
    std::vector<int> layer_sizes = kDefaultLayerSizes;
    std::int64_t max_epochs = 50'000;
    double loss_threshold = 1e-3;
    double learning_rate = 1e-3;
    WeightFactors weights = WeightFactors::unconstrained();

    // weight optimization
    std::int64_t bo_iterations = 300;
    std::int64_t bo_inner_epochs = 500;
    std::int64_t bo_init_samples = 8;
    bool bo_retrain = false;

    // constraining grid and audit
    GridSpec grid;
    double eps_phi_deg = kDefaultEpsPhiDeg;

    // synthetic data
    PPRParams ppr;
    std::vector<double> phases_deg = kDefaultPhases;
    double data_delta_step = 0.1;
    double noise_sigma = 0.0;

    // PPR fitting
    PPRRanges ranges = ranges_around(PPRParams{}, 0.2);
    std::int64_t fit_iterations = 100'000;

    // inputs
    std::string data_path;
    std::string model_path;

    static RunConfig from_key_values(const std::map<std::string, std::string>& kv);
    static RunConfig load(const std::filesystem::path& path);
    KeyValues to_key_values() const;

    TrainConfig train_config() const;
    BOConfig bo_config() const;
    SyntheticSpec synthetic_spec() const;
};

/// Every accepted key with a one-line description.
const std::vector<std::pair<std::string, std::string>>& config_keys();

// Each command writes its artifacts, reports progress to `log` and returns 0.
// Failures throw tcnn::Error.

/// Writes the dataset CSV to `out`.
int cmd_gen_data(const RunConfig& config, const std::filesystem::path& out, std::ostream& log);

/// Writes fit.json and ppr_params.txt into the directory `out`.
int cmd_fit_ppr(const RunConfig& config, const std::filesystem::path& data_path, const std::filesystem::path& out,
                std::ostream& log, std::ostream& warn);

/// Writes model.txt and loss_history.csv into the directory `out`.
int cmd_train(const RunConfig& config, const std::filesystem::path& data_path, const std::filesystem::path& out,
              std::ostream& log);

/// Writes bo_history.csv and best_weights.txt into the directory `out`, plus
/// model.txt and loss_history.csv when bo_retrain is set.
int cmd_optimize(const RunConfig& config, const std::filesystem::path& data_path, const std::filesystem::path& out,
                 std::ostream& log);

/// Writes sigma_n.csv, sigma_t.csv, vio1.csv, vio2.csv, vio3.csv and
/// audit.json into the directory `out`.
int cmd_analyze(const RunConfig& config, const std::filesystem::path& model_path,
                const std::filesystem::path& data_path, const std::filesystem::path& out, std::ostream& log);

/// Writes sigma_n.csv and sigma_t.csv into the directory `out`.
int cmd_export_surface(const RunConfig& config, const std::filesystem::path& model_path,
                       const std::filesystem::path& out, std::ostream& log);

}  // namespace tcnn

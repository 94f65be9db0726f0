#include "tcnn/cli.hpp"

#include <charconv>
#include <functional>
#include <ostream>
#include <sstream>

#include "tcnn/error.hpp"
#include "tcnn/thermo.hpp"
#include "tcnn/violation.hpp"

namespace tcnn {

namespace fs = std::filesystem;

namespace {

std::int64_t parse_int(const std::string& key, const std::string& text) {
    std::int64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw InvalidArgument("config key '" + key + "': not an integer: '" + text + "'");
    }
    return v;
}

double parse_num(const std::string& key, const std::string& text) {
    try {
        return parse_double(text);
    } catch (const Error&) {
        throw InvalidArgument("config key '" + key + "': not a number: '" + text + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true") {
        return true;
    }
    if (text == "0" || text == "false") {
        return false;
    }
    throw InvalidArgument("config key '" + key + "': expected true/false/1/0");
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
    std::vector<double> out;
    std::string cell;
    std::istringstream ss(text);
    while (std::getline(ss, cell, ',')) {
        out.push_back(parse_num(key, cell));
    }
    if (out.empty()) {
        throw InvalidArgument("config key '" + key + "': empty list");
    }
    return out;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k) {
            s += ',';
        }
        if constexpr (std::is_floating_point_v<T>) {
            s += format_double(v[k]);
        } else {
            s += std::to_string(v[k]);
        }
    }
    return s;
}

// Staging area for keys that only form a valid value together.
struct Staged {
    std::array<double, 4> lambda{1.0, 0.0, 0.0, 0.0};
    std::array<double, PPRParams::kCount> ppr{};
    PPRRanges ranges{};
};

struct KeySpec {
    std::string key;
    std::string help;
    std::function<void(RunConfig&, Staged&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

std::vector<KeySpec> build_specs() {
    std::vector<KeySpec> s;
    auto num = [&](std::string key, std::string help, double RunConfig::*field) {
        s.push_back({key, help, [key, field](RunConfig& c, Staged&, const std::string& v) { c.*field = parse_num(key, v); },
                     [field](const RunConfig& c) { return format_double(c.*field); }});
    };
    auto integer = [&](std::string key, std::string help, std::int64_t RunConfig::*field) {
        s.push_back({key, help,
                     [key, field](RunConfig& c, Staged&, const std::string& v) { c.*field = parse_int(key, v); },
                     [field](const RunConfig& c) { return std::to_string(c.*field); }});
    };
    auto grid = [&](std::string key, std::string help, double GridSpec::*field) {
        s.push_back({key, help,
                     [key, field](RunConfig& c, Staged&, const std::string& v) { c.grid.*field = parse_num(key, v); },
                     [field](const RunConfig& c) { return format_double(c.grid.*field); }});
    };

    s.push_back({"seed", "random seed for initialization, noise, sampling (default 0)",
                 [](RunConfig& c, Staged&, const std::string& v) {
                     const auto n = parse_int("seed", v);
                     if (n < 0) {
                         throw InvalidArgument("config key 'seed': must be non-negative");
                     }
                     c.seed = static_cast<std::uint64_t>(n);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    s.push_back({"layer_sizes", "comma-separated layer widths (default 2,60,60,2)",
                 [](RunConfig& c, Staged&, const std::string& v) {
                     c.layer_sizes.clear();
                     for (double x : parse_list("layer_sizes", v)) {
                         if (x != static_cast<int>(x) || x < 1) {
                             throw InvalidArgument("config key 'layer_sizes': widths must be positive integers");
                         }
                         c.layer_sizes.push_back(static_cast<int>(x));
                     }
                 },
                 [](const RunConfig& c) { return join(c.layer_sizes); }});
    integer("max_epochs", "training epochs (default 50000)", &RunConfig::max_epochs);
    num("loss_threshold", "stop training once the total loss is below this (default 1e-3)",
        &RunConfig::loss_threshold);
    num("learning_rate", "Adam step size (default 1e-3)", &RunConfig::learning_rate);
    for (int k = 0; k < 4; ++k) {
        const std::string key = "lambda" + std::to_string(k);
        s.push_back({key, "loss weight " + std::to_string(k) + (k == 0 ? " (default 1)" : " (default 0)"),
                     [key, k](RunConfig&, Staged& st, const std::string& v) { st.lambda[k] = parse_num(key, v); },
                     [k](const RunConfig& c) { return format_double(c.weights[static_cast<std::size_t>(k)]); }});
    }
    integer("bo_iterations", "weight-optimization evaluations (default 300)", &RunConfig::bo_iterations);
    integer("bo_inner_epochs", "training epochs per evaluation (default 500)", &RunConfig::bo_inner_epochs);
    integer("bo_init_samples", "random evaluations before the surrogate is used (default 8)",
            &RunConfig::bo_init_samples);
    s.push_back({"bo_retrain", "retrain a full model with the best weights (default false)",
                 [](RunConfig& c, Staged&, const std::string& v) { c.bo_retrain = parse_bool("bo_retrain", v); },
                 [](const RunConfig& c) { return std::string(c.bo_retrain ? "true" : "false"); }});
    grid("grid_delta_max", "largest grid separation in um (default 3)", &GridSpec::delta_max);
    grid("grid_delta_step", "grid separation step in um (default 0.1)", &GridSpec::delta_step);
    grid("grid_phi_min", "smallest grid phase angle in degrees (default -60)", &GridSpec::phi_min);
    grid("grid_phi_max", "largest grid phase angle in degrees (default 90)", &GridSpec::phi_max);
    grid("grid_phi_step", "grid phase step in degrees (default 15)", &GridSpec::phi_step);
    num("eps_phi_deg", "tolerance angle of the proportionality audit (default 5)", &RunConfig::eps_phi_deg);

    const auto defaults = PPRParams{}.to_array();
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        const std::string name = PPRParams::names()[k];
        const std::string key = "ppr_" + name;
        s.push_back({key, "generating PPR " + name + " (default " + format_double(defaults[k]) + ")",
                     [key, k](RunConfig&, Staged& st, const std::string& v) { st.ppr[k] = parse_num(key, v); },
                     [k](const RunConfig& c) { return format_double(c.ppr.to_array()[k]); }});
    }
    s.push_back({"phases_deg", "comma-separated data path phase angles (default -45,-15,0,27,45,60,75,90)",
                 [](RunConfig& c, Staged&, const std::string& v) { c.phases_deg = parse_list("phases_deg", v); },
                 [](const RunConfig& c) { return join(c.phases_deg); }});
    num("data_delta_step", "separation step of generated data in um (default 0.1)", &RunConfig::data_delta_step);
    num("noise_sigma", "noise as a fraction of each channel's peak traction (default 0)", &RunConfig::noise_sigma);
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        const std::string name = PPRParams::names()[k];
        for (int side = 0; side < 2; ++side) {
            const std::string key = "range_" + name + (side ? "_hi" : "_lo");
            s.push_back({key, std::string(side ? "upper" : "lower") + " fit bound for " + name + " (default " +
                                  (side ? "1.2" : "0.8") + " x generating default)",
                         [key, k, side](RunConfig&, Staged& st, const std::string& v) {
                             (side ? st.ranges[k].hi : st.ranges[k].lo) = parse_num(key, v);
                         },
                         [k, side](const RunConfig& c) {
                             return format_double(side ? c.ranges[k].hi : c.ranges[k].lo);
                         }});
        }
    }
    integer("fit_iterations", "Monte-Carlo draws for fit-ppr (default 100000)", &RunConfig::fit_iterations);
    s.push_back({"data_path", "dataset CSV used when --data is not given",
                 [](RunConfig& c, Staged&, const std::string& v) { c.data_path = v; },
                 [](const RunConfig& c) { return c.data_path; }});
    s.push_back({"model_path", "model file used when --model is not given",
                 [](RunConfig& c, Staged&, const std::string& v) { c.model_path = v; },
                 [](const RunConfig& c) { return c.model_path; }});
    return s;
}

const std::vector<KeySpec>& specs() {
    static const std::vector<KeySpec> s = build_specs();
    return s;
}

void require_dir(const fs::path& out) {
    if (out.empty()) {
        throw InvalidArgument("--out is required");
    }
    if (!fs::is_directory(out)) {
        throw IoError("output directory does not exist: " + out.string());
    }
}

void require_parent(const fs::path& out) {
    if (out.empty()) {
        throw InvalidArgument("--out is required");
    }
    const fs::path parent = out.parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw IoError("output directory does not exist: " + parent.string());
    }
}

fs::path pick(const fs::path& given, const std::string& fallback, const char* what) {
    if (!given.empty()) {
        return given;
    }
    if (!fallback.empty()) {
        return fallback;
    }
    throw InvalidArgument(std::string("no ") + what + " given");
}

void echo_breakdown(std::ostream& log, const LossBreakdown& b) {
    log << "mse0=" << format_double(b.mse0) << " mse1=" << format_double(b.mse1) << " mse2=" << format_double(b.mse2)
        << " mse3=" << format_double(b.mse3) << " total=" << format_double(b.total) << '\n';
}

void echo_weights(std::ostream& log, const WeightFactors& w) {
    log << "weights: " << format_double(w[0]) << ',' << format_double(w[1]) << ',' << format_double(w[2]) << ','
        << format_double(w[3]) << '\n';
}

TractionModel train_and_save(const RunConfig& config, const WeightFactors& weights, const Dataset& normalized,
                             const fs::path& out, std::ostream& log) {
    TrainConfig tc = config.train_config();
    tc.weights = weights;
    const PolarGrid grid = build_constraint_grid(config.grid);
    const LossAssembler loss(normalized, grid, weights);
    TrainResult r;
    try {
        r = train(loss, tc);
    } catch (const TrainingDiverged& e) {
        throw Error(std::string("training diverged at epoch ") + std::to_string(e.epoch()) + ": " + e.what());
    }
    TractionModel model{r.params, *normalized.norm_factors()};
    write_model(out / "model.txt", model);
    write_loss_history_csv(out / "loss_history.csv", r.history);
    echo_weights(log, weights);
    log << "epochs: " << r.history.size() << (r.reached_threshold ? " (threshold reached)" : "") << '\n';
    const LossBreakdown final_loss = evaluate_loss(r.params, loss);
    log << "final: ";
    echo_breakdown(log, final_loss);
    return model;
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_keys() {
    static const auto keys = [] {
        std::vector<std::pair<std::string, std::string>> k;
        for (const auto& s : specs()) {
            k.emplace_back(s.key, s.help);
        }
        return k;
    }();
    return keys;
}

RunConfig RunConfig::from_key_values(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    Staged st;
    st.ppr = c.ppr.to_array();
    st.ranges = c.ranges;
    for (const auto& [key, value] : kv) {
        const auto& all = specs();
        const auto it = std::find_if(all.begin(), all.end(), [&](const KeySpec& s) { return s.key == key; });
        if (it == all.end()) {
            throw InvalidArgument("unknown config key '" + key + "'");
        }
        it->set(c, st, value);
    }
    c.weights = WeightFactors(st.lambda[0], st.lambda[1], st.lambda[2], st.lambda[3]);
    c.ppr = PPRParams::from_array(st.ppr);
    c.ppr.validate();
    c.ranges = st.ranges;
    c.train_config().validate();
    if (c.bo_iterations < 1 || c.bo_inner_epochs < 1 || c.bo_init_samples < 1) {
        throw InvalidArgument("bo_iterations, bo_inner_epochs and bo_init_samples must be positive");
    }
    if (c.fit_iterations < 1) {
        throw InvalidArgument("fit_iterations must be positive");
    }
    if (!(c.eps_phi_deg > 0.0 && c.eps_phi_deg < 90.0)) {
        throw InvalidArgument("eps_phi_deg must lie in (0, 90)");
    }
    build_constraint_grid(c.grid);
    return c;
}

RunConfig RunConfig::load(const fs::path& path) { return from_key_values(read_key_values(path)); }

KeyValues RunConfig::to_key_values() const {
    KeyValues kv;
    for (const auto& s : specs()) {
        kv.emplace_back(s.key, s.get(*this));
    }
    return kv;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.layer_sizes = layer_sizes;
    t.max_epochs = max_epochs;
    t.loss_threshold = loss_threshold;
    t.seed = seed;
    t.weights = weights;
    t.adam.learning_rate = learning_rate;
    return t;
}

BOConfig RunConfig::bo_config() const {
    BOConfig b;
    b.iterations = bo_iterations;
    b.inner_epochs = bo_inner_epochs;
    b.init_samples = bo_init_samples;
    b.seed = seed;
    b.layer_sizes = layer_sizes;
    b.adam.learning_rate = learning_rate;
    return b;
}

SyntheticSpec RunConfig::synthetic_spec() const {
    SyntheticSpec s;
    s.phases_deg = phases_deg;
    s.delta_step = data_delta_step;
    s.noise_sigma = noise_sigma;
    s.seed = seed;
    return s;
}

int cmd_gen_data(const RunConfig& config, const fs::path& out, std::ostream& log) {
    require_parent(out);
    const Dataset data = gen_synthetic_dataset(config.ppr, config.synthetic_spec());
    write_dataset_csv(out, data);
    for (std::size_t p = 0; p < data.paths().size(); ++p) {
        log << "path " << p << " phi=" << format_double(data.paths()[p].phi()) << " samples=" << data.paths()[p].size()
            << '\n';
    }
    log << "wrote " << data.total_points() << " samples to " << out.string() << '\n';
    return 0;
}

int cmd_fit_ppr(const RunConfig& config, const fs::path& data_path, const fs::path& out, std::ostream& log,
                std::ostream& warn) {
    require_dir(out);
    const Dataset data = read_dataset_csv(pick(data_path, config.data_path, "dataset"));
    const MonteCarloFit fit = monte_carlo_fit(data, config.ranges, config.fit_iterations, config.seed);
    write_text(out / "fit.json", ppr_fit_json(fit, config.fit_iterations));
    write_key_values(out / "ppr_params.txt", to_key_values(fit.best));
    for (const auto& name : fit.boundary_warnings) {
        warn << "warning: " << name << " lies within 1% of its range boundary\n";
    }
    log << "residual: " << format_double(fit.residual) << " (" << fit.feasible_samples << " feasible draws)\n";
    return 0;
}

int cmd_train(const RunConfig& config, const fs::path& data_path, const fs::path& out, std::ostream& log) {
    require_dir(out);
    const Dataset data = read_dataset_csv(pick(data_path, config.data_path, "dataset"));
    train_and_save(config, config.weights, normalize_dataset(data), out, log);
    return 0;
}

int cmd_optimize(const RunConfig& config, const fs::path& data_path, const fs::path& out, std::ostream& log) {
    require_dir(out);
    const Dataset normalized = normalize_dataset(read_dataset_csv(pick(data_path, config.data_path, "dataset")));
    const PolarGrid grid = build_constraint_grid(config.grid);
    const BOResult r = optimize_weights(normalized, grid, config.bo_config());
    write_bo_history_csv(out / "bo_history.csv", r.history);
    write_key_values(out / "best_weights.txt", to_key_values(r.best_weights));
    log << "evaluations: " << r.history.size() << '\n';
    log << "best loss: " << format_double(r.best_loss) << '\n';
    echo_weights(log, r.best_weights);
    if (config.bo_retrain) {
        train_and_save(config, r.best_weights, normalized, out, log);
    }
    return 0;
}

int cmd_analyze(const RunConfig& config, const fs::path& model_path, const fs::path& data_path, const fs::path& out,
                std::ostream& log) {
    require_dir(out);
    const TractionModel model = read_model(pick(model_path, config.model_path, "model"));
    const Dataset data = read_dataset_csv(pick(data_path, config.data_path, "dataset"));
    const NormFactors data_norm = *normalize_dataset(data).norm_factors();
    if (!data_norm.approx_equal(model.norm)) {
        throw InvalidArgument("dataset normalization factors do not match the model's");
    }
    const PolarGrid grid = build_constraint_grid(config.grid);
    const Audit audit = audit_model(model, data, grid, config.eps_phi_deg);
    write_grid_csv(out / "sigma_n.csv", audit.surfaces.sigma_n);
    write_grid_csv(out / "sigma_t.csv", audit.surfaces.sigma_t);
    write_grid_csv(out / "vio1.csv", audit.maps.vio1);
    write_grid_csv(out / "vio2.csv", audit.maps.vio2);
    write_grid_csv(out / "vio3.csv", audit.maps.vio3);
    const std::string json = audit_report_json(audit.report);
    write_text(out / "audit.json", json);
    log << json;
    return 0;
}

int cmd_export_surface(const RunConfig& config, const fs::path& model_path, const fs::path& out, std::ostream& log) {
    require_dir(out);
    const TractionModel model = read_model(pick(model_path, config.model_path, "model"));
    const PolarGrid grid = build_constraint_grid(config.grid);
    const SurfacePair s = model.predict_surfaces(grid);
    write_grid_csv(out / "sigma_n.csv", s.sigma_n);
    write_grid_csv(out / "sigma_t.csv", s.sigma_t);
    log << "wrote " << grid.n_delta() << " x " << grid.n_phi() << " surfaces to " << out.string() << '\n';
    return 0;
}

}  // namespace tcnn

#include "tcnn/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <system_error>

#include <nlohmann/json.hpp>

#include "tcnn/error.hpp"

namespace tcnn {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) {
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == sep) {
        out.emplace_back();
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return is;
}

void finish(std::ofstream& os, const std::filesystem::path& path) {
    os.flush();
    if (!os) {
        throw IoError("failed writing " + path.string());
    }
}

std::string line_error(std::size_t line, const std::string& what) {
    return "line " + std::to_string(line) + ": " + what;
}

// Reads a CSV with an exact header and numeric cells.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, const std::string& header) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line) || trim(line) != header) {
        throw IoError(path.string() + ": " + line_error(1, "expected header '" + header + "'"));
    }
    const std::size_t width = split(header, ',').size();
    std::vector<std::vector<double>> rows;
    std::size_t n = 1;
    while (std::getline(is, line)) {
        ++n;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(trim(line), ',');
        if (cells.size() != width) {
            throw IoError(path.string() + ": " + line_error(n, "expected " + std::to_string(width) + " fields"));
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            try {
                row.push_back(parse_double(trim(c)));
            } catch (const Error& e) {
                throw IoError(path.string() + ": " + line_error(n, e.what()));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::int64_t as_index(double v, const std::filesystem::path& path, std::size_t line) {
    if (v != std::floor(v) || v < 0.0) {
        throw IoError(path.string() + ": " + line_error(line, "expected a non-negative integer"));
    }
    return static_cast<std::int64_t>(v);
}

double kv_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) {
        throw InvalidArgument("missing key '" + key + "'");
    }
    try {
        return parse_double(it->second);
    } catch (const Error&) {
        throw InvalidArgument("key '" + key + "' is not a number: " + it->second);
    }
}

}  // namespace

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    if (res.ec != std::errc()) {
        throw Error("format_double: conversion failed");
    }
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    const std::string t = trim(text);
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (first != last && *first == '+') {
        ++first;
    }
    double v = 0.0;
    const auto res = std::from_chars(first, last, v);
    if (t.empty() || res.ec != std::errc() || res.ptr != last) {
        throw InvalidArgument("not a number: '" + t + "'");
    }
    if (!std::isfinite(v)) {
        throw InvalidArgument("not a finite number: '" + t + "'");
    }
    return v;
}

void write_dataset_csv(std::ostream& os, const Dataset& dataset) {
    const Dataset raw = denormalize_dataset(dataset);
    os << kDatasetHeader << '\n';
    for (std::size_t p = 0; p < raw.paths().size(); ++p) {
        const auto& path = raw.paths()[p];
        for (const auto& pt : path.points()) {
            os << p << ',' << format_double(path.phi()) << ',' << format_double(pt.delta_norm) << ','
               << format_double(pt.sigma_n) << ',' << format_double(pt.sigma_t) << '\n';
        }
    }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset) {
    auto os = open_out(path);
    write_dataset_csv(os, dataset);
    finish(os, path);
}

Dataset read_dataset_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != kDatasetHeader) {
        throw IoError(line_error(1, std::string("expected header '") + kDatasetHeader + "'"));
    }
    std::vector<LoadingPathData> paths;
    std::vector<PathPoint> current;
    std::int64_t current_id = -1;
    double current_phi = 0.0;
    std::size_t start_line = 0;
    std::vector<std::int64_t> seen;

    auto flush = [&]() {
        if (current_id < 0) {
            return;
        }
        try {
            paths.emplace_back(current_phi, std::move(current));
        } catch (const Error& e) {
            throw IoError(line_error(start_line, "path " + std::to_string(current_id) + ": " + e.what()));
        }
        current.clear();
    };

    std::size_t n = 1;
    while (std::getline(is, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty()) {
            continue;
        }
        const auto cells = split(t, ',');
        if (cells.size() != 5) {
            throw IoError(line_error(n, "expected 5 fields, found " + std::to_string(cells.size())));
        }
        double v[5];
        for (std::size_t k = 0; k < 5; ++k) {
            try {
                v[k] = parse_double(cells[k]);
            } catch (const Error& e) {
                throw IoError(line_error(n, e.what()));
            }
        }
        if (v[0] != std::floor(v[0]) || v[0] < 0.0) {
            throw IoError(line_error(n, "path_id must be a non-negative integer"));
        }
        const auto id = static_cast<std::int64_t>(v[0]);
        if (id != current_id) {
            if (std::find(seen.begin(), seen.end(), id) != seen.end()) {
                throw IoError(line_error(n, "rows of path " + std::to_string(id) + " are not contiguous"));
            }
            flush();
            seen.push_back(id);
            current_id = id;
            current_phi = v[1];
            start_line = n;
        } else if (v[1] != current_phi) {
            throw IoError(line_error(n, "phase angle changes within path " + std::to_string(id)));
        }
        if (!current.empty() && !(v[2] > current.back().delta_norm)) {
            throw IoError(line_error(n, "separation must increase along a path"));
        }
        current.push_back({v[2], v[3], v[4]});
    }
    flush();
    if (paths.empty()) {
        throw IoError("dataset has no rows");
    }
    try {
        return Dataset(std::move(paths));
    } catch (const Error& e) {
        throw IoError(e.what());
    }
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return read_dataset_csv(is);
    } catch (const Error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_model(std::ostream& os, const TractionModel& model) {
    model.params.validate();
    os << kModelMagic << '\n';
    for (std::size_t k = 0; k < model.params.layer_sizes.size(); ++k) {
        os << (k ? " " : "") << model.params.layer_sizes[k];
    }
    os << '\n';
    os << "norm " << format_double(model.norm.delta) << ' ' << format_double(model.norm.phi) << ' '
       << format_double(model.norm.sigma_n) << ' ' << format_double(model.norm.sigma_t) << '\n';
    for (const auto& layer : model.params.layers) {
        os << '\n';
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                os << (c ? " " : "") << format_double(layer.weight(r, c));
            }
            os << '\n';
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            os << (r ? " " : "") << format_double(layer.bias[r]);
        }
        os << '\n';
    }
}

void write_model(const std::filesystem::path& path, const TractionModel& model) {
    auto os = open_out(path);
    write_model(os, model);
    finish(os, path);
}

TractionModel read_model(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || trim(line) != kModelMagic) {
        throw IoError(std::string("model file must start with '") + kModelMagic + "'");
    }
    TractionModel model;
    if (!std::getline(is, line)) {
        throw IoError("model file: missing layer sizes");
    }
    {
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) {
            int v = 0;
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < 1) {
                throw IoError("model file: bad layer size '" + tok + "'");
            }
            model.params.layer_sizes.push_back(v);
        }
    }
    if (model.params.layer_sizes.size() < 2) {
        throw IoError("model file: need at least two layer sizes");
    }
    std::vector<double> values;
    std::string tok;
    if (!(is >> tok) || tok != "norm") {
        throw IoError("model file: missing norm factors");
    }
    auto next = [&]() {
        if (!(is >> tok)) {
            throw IoError("model file: truncated");
        }
        try {
            return parse_double(tok);
        } catch (const Error& e) {
            throw IoError(std::string("model file: ") + e.what());
        }
    };
    model.norm.delta = next();
    model.norm.phi = next();
    model.norm.sigma_n = next();
    model.norm.sigma_t = next();
    for (std::size_t k = 0; k + 1 < model.params.layer_sizes.size(); ++k) {
        const int in = model.params.layer_sizes[k];
        const int out = model.params.layer_sizes[k + 1];
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (int r = 0; r < out; ++r) {
            for (int c = 0; c < in; ++c) {
                layer.weight(r, c) = next();
            }
        }
        for (int r = 0; r < out; ++r) {
            layer.bias[r] = next();
        }
        model.params.layers.push_back(std::move(layer));
    }
    if (is >> tok) {
        throw IoError("model file: unexpected trailing data");
    }
    try {
        model.params.validate();
    } catch (const Error& e) {
        throw IoError(std::string("model file: ") + e.what());
    }
    return model;
}

TractionModel read_model(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return read_model(is);
    } catch (const Error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

void write_loss_history_csv(const std::filesystem::path& path, const std::vector<LossBreakdown>& history) {
    auto os = open_out(path);
    os << "epoch,mse0,mse1,mse2,mse3,total\n";
    for (std::size_t e = 0; e < history.size(); ++e) {
        const auto& h = history[e];
        os << e << ',' << format_double(h.mse0) << ',' << format_double(h.mse1) << ',' << format_double(h.mse2) << ','
           << format_double(h.mse3) << ',' << format_double(h.total) << '\n';
    }
    finish(os, path);
}

std::vector<LossBreakdown> read_loss_history_csv(const std::filesystem::path& path) {
    const auto rows = read_numeric_csv(path, "epoch,mse0,mse1,mse2,mse3,total");
    std::vector<LossBreakdown> out;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (as_index(rows[k][0], path, k + 2) != static_cast<std::int64_t>(k)) {
            throw IoError(path.string() + ": " + line_error(k + 2, "epochs must count up from 0"));
        }
        out.push_back({rows[k][1], rows[k][2], rows[k][3], rows[k][4], rows[k][5]});
    }
    return out;
}

void write_bo_history_csv(const std::filesystem::path& path, const std::vector<BOStep>& history) {
    auto os = open_out(path);
    os << "iter,lambda0,lambda1,lambda2,lambda3,total_loss\n";
    for (const auto& h : history) {
        os << h.iter;
        for (double l : h.weights.values()) {
            os << ',' << format_double(l);
        }
        os << ',' << format_double(h.loss) << '\n';
    }
    finish(os, path);
}

std::vector<BOStep> read_bo_history_csv(const std::filesystem::path& path) {
    const auto rows = read_numeric_csv(path, "iter,lambda0,lambda1,lambda2,lambda3,total_loss");
    std::vector<BOStep> out;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& r = rows[k];
        BOStep s;
        s.iter = as_index(r[0], path, k + 2);
        try {
            s.weights = WeightFactors(r[1], r[2], r[3], r[4]);
        } catch (const Error& e) {
            throw IoError(path.string() + ": " + line_error(k + 2, e.what()));
        }
        s.loss = r[5];
        best = std::min(best, s.loss);
        s.incumbent = best;
        out.push_back(s);
    }
    return out;
}

void write_grid_csv(std::ostream& os, const SurfaceField& field) {
    const auto& g = field.grid();
    os << "delta_um\\phi_deg";
    for (double phi : g.phi_values()) {
        os << ',' << format_double(phi);
    }
    os << '\n';
    for (std::size_t i = 0; i < g.n_delta(); ++i) {
        os << format_double(g.delta_values()[i]);
        for (std::size_t j = 0; j < g.n_phi(); ++j) {
            os << ',' << format_double(field(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
        }
        os << '\n';
    }
}

void write_grid_csv(const std::filesystem::path& path, const SurfaceField& field) {
    auto os = open_out(path);
    write_grid_csv(os, field);
    finish(os, path);
}

SurfaceField read_grid_csv(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line)) {
        throw IoError(path.string() + ": empty file");
    }
    const auto head = split(trim(line), ',');
    if (head.size() < 2) {
        throw IoError(path.string() + ": " + line_error(1, "header needs at least one phase angle"));
    }
    std::vector<double> phi;
    for (std::size_t k = 1; k < head.size(); ++k) {
        try {
            phi.push_back(parse_double(head[k]));
        } catch (const Error& e) {
            throw IoError(path.string() + ": " + line_error(1, e.what()));
        }
    }
    std::vector<double> delta;
    std::vector<std::vector<double>> rows;
    std::size_t n = 1;
    while (std::getline(is, line)) {
        ++n;
        if (trim(line).empty()) {
            continue;
        }
        const auto cells = split(trim(line), ',');
        if (cells.size() != head.size()) {
            throw IoError(path.string() + ": " + line_error(n, "row width differs from header"));
        }
        std::vector<double> row;
        try {
            delta.push_back(parse_double(cells[0]));
            for (std::size_t k = 1; k < cells.size(); ++k) {
                row.push_back(parse_double(cells[k]));
            }
        } catch (const Error& e) {
            throw IoError(path.string() + ": " + line_error(n, e.what()));
        }
        rows.push_back(std::move(row));
    }
    PolarGrid grid(std::move(delta), std::move(phi));
    Eigen::MatrixXd values(static_cast<Eigen::Index>(grid.n_delta()), static_cast<Eigen::Index>(grid.n_phi()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
    }
    return SurfaceField(std::move(grid), std::move(values));
}

std::map<std::string, std::string> parse_key_values(std::istream& is, const std::string& source) {
    std::map<std::string, std::string> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw InvalidArgument(source + ": " + line_error(n, "expected key=value"));
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw InvalidArgument(source + ": " + line_error(n, "empty key"));
        }
        if (!out.emplace(key, value).second) {
            throw InvalidArgument(source + ": " + line_error(n, "duplicate key '" + key + "'"));
        }
    }
    return out;
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    auto is = open_in(path);
    return parse_key_values(is, path.string());
}

void write_key_values(const std::filesystem::path& path, const KeyValues& entries) {
    auto os = open_out(path);
    for (const auto& [k, v] : entries) {
        os << k << '=' << v << '\n';
    }
    finish(os, path);
}

KeyValues to_key_values(const PPRParams& params) {
    KeyValues kv;
    const auto v = params.to_array();
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        kv.emplace_back(PPRParams::names()[k], format_double(v[k]));
    }
    return kv;
}

PPRParams ppr_params_from_key_values(const std::map<std::string, std::string>& kv) {
    std::array<double, PPRParams::kCount> v{};
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        v[k] = kv_double(kv, PPRParams::names()[k]);
    }
    for (const auto& [key, value] : kv) {
        const auto& names = PPRParams::names();
        if (std::find_if(names.begin(), names.end(), [&](const char* n) { return key == n; }) == names.end()) {
            throw InvalidArgument("unknown PPR key '" + key + "'");
        }
    }
    PPRParams p = PPRParams::from_array(v);
    p.validate();
    return p;
}

KeyValues to_key_values(const WeightFactors& weights) {
    KeyValues kv;
    for (std::size_t k = 0; k < 4; ++k) {
        kv.emplace_back("lambda" + std::to_string(k), format_double(weights[k]));
    }
    return kv;
}

WeightFactors weights_from_key_values(const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        if (key != "lambda0" && key != "lambda1" && key != "lambda2" && key != "lambda3") {
            throw InvalidArgument("unknown weight key '" + key + "'");
        }
    }
    return {kv_double(kv, "lambda0"), kv_double(kv, "lambda1"), kv_double(kv, "lambda2"), kv_double(kv, "lambda3")};
}

std::string audit_report_json(const AuditReport& report) {
    nlohmann::ordered_json j;
    j["fitting_error"] = report.fitting_error;
    j["violation_ratio"] = report.violation_ratio;
    j["ratio_tc1"] = report.ratio_tc1;
    j["ratio_tc2"] = report.ratio_tc2;
    j["ratio_tc3"] = report.ratio_tc3;
    return j.dump(2) + "\n";
}

AuditReport audit_report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("audit report: ") + e.what());
    }
    AuditReport r;
    try {
        r.fitting_error = j.at("fitting_error").get<double>();
        r.violation_ratio = j.at("violation_ratio").get<double>();
        r.ratio_tc1 = j.at("ratio_tc1").get<double>();
        r.ratio_tc2 = j.at("ratio_tc2").get<double>();
        r.ratio_tc3 = j.at("ratio_tc3").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("audit report: ") + e.what());
    }
    if (j.size() != 5) {
        throw IoError("audit report: unexpected keys");
    }
    return r;
}

std::string ppr_fit_json(const MonteCarloFit& fit, std::int64_t iterations) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json params;
    const auto v = fit.best.to_array();
    for (std::size_t k = 0; k < PPRParams::kCount; ++k) {
        params[PPRParams::names()[k]] = v[k];
    }
    j["params"] = params;
    j["residual"] = fit.residual;
    j["iterations"] = iterations;
    j["feasible_samples"] = fit.feasible_samples;
    j["boundary_warnings"] = fit.boundary_warnings;
    return j.dump(2) + "\n";
}

std::string read_text(const std::filesystem::path& path) {
    auto is = open_in(path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto os = open_out(path);
    os << text;
    finish(os, path);
}

}  // namespace tcnn

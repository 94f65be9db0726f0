#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <limits>

#include "tcnn/bayesopt.hpp"
#include "tcnn/error.hpp"
#include "tcnn/io.hpp"
#include "tcnn/net.hpp"
#include "tcnn/ppr.hpp"
#include "tcnn/violation.hpp"

namespace py = pybind11;
using namespace tcnn;

namespace {

// Rows of (phi, |delta|, sigma_n, sigma_t), one per sample.
Eigen::MatrixXd dataset_array(const Dataset& d) {
    const auto samples = d.samples();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), 4);
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        const auto& s = samples[static_cast<std::size_t>(k)];
        out.row(k) << s.phi_deg, s.delta_norm, s.sigma_n, s.sigma_t;
    }
    return out;
}

py::dict report_dict(const AuditReport& r) {
    py::dict d;
    d["fitting_error"] = r.fitting_error;
    d["violation_ratio"] = r.violation_ratio;
    d["ratio_tc1"] = r.ratio_tc1;
    d["ratio_tc2"] = r.ratio_tc2;
    d["ratio_tc3"] = r.ratio_tc3;
    return d;
}

GridSpec grid_spec(double delta_max, double delta_step, double phi_min, double phi_max, double phi_step) {
    return {delta_max, delta_step, phi_min, phi_max, phi_step};
}

}  // namespace

PYBIND11_MODULE(_tcnn, m) {
    m.doc() = "Thermodynamically consistent traction-separation networks";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<PPRParams>(m, "PPRParams")
        .def(py::init<>())
        .def_readwrite("delta_n_final", &PPRParams::delta_n_final)
        .def_readwrite("delta_t_final", &PPRParams::delta_t_final)
        .def_readwrite("delta_nc", &PPRParams::delta_nc)
        .def_readwrite("delta_tc", &PPRParams::delta_tc)
        .def_readwrite("psi_n", &PPRParams::psi_n)
        .def_readwrite("psi_t", &PPRParams::psi_t)
        .def_readwrite("alpha", &PPRParams::alpha)
        .def_readwrite("beta", &PPRParams::beta)
        .def("validate", &PPRParams::validate)
        .def("exponents", [](const PPRParams& p) {
            const PPRDerived d = ppr_derived(p);
            return py::make_tuple(d.m, d.n);
        });

    m.def(
        "ppr_traction",
        [](const PPRParams& p, double dn, double dt) {
            const Traction t = ppr_traction(p, dn, dt);
            return py::make_tuple(t.sigma_n, t.sigma_t);
        },
        py::arg("params"), py::arg("delta_n"), py::arg("delta_t"));
    m.def("ppr_potential", &ppr_potential, py::arg("params"), py::arg("delta_n"), py::arg("delta_t"));

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("is_normalized", &Dataset::is_normalized)
        .def_property_readonly("total_points", &Dataset::total_points)
        .def_property_readonly("phases",
                               [](const Dataset& d) {
                                   std::vector<double> out;
                                   for (const auto& p : d.paths()) {
                                       out.push_back(p.phi());
                                   }
                                   return out;
                               })
        .def("to_array", &dataset_array)
        .def("save", [](const Dataset& d, const std::filesystem::path& p) { write_dataset_csv(p, d); })
        .def_static("load", [](const std::filesystem::path& p) { return read_dataset_csv(p); });

    m.def(
        "gen_synthetic_dataset",
        [](const PPRParams& p, std::vector<double> phases, double delta_step, double noise_sigma,
           std::uint64_t seed) {
            return gen_synthetic_dataset(p, SyntheticSpec{std::move(phases), delta_step, noise_sigma, seed});
        },
        py::arg("params") = PPRParams{}, py::arg("phases_deg") = kDefaultPhases, py::arg("delta_step") = 0.1,
        py::arg("noise_sigma") = 0.0, py::arg("seed") = 0);

    py::class_<WeightFactors>(m, "WeightFactors")
        .def(py::init<double, double, double, double>())
        .def_property_readonly("values", &WeightFactors::values)
        .def_static("unconstrained", &WeightFactors::unconstrained)
        .def_static("tcnn1", &presets::tcnn1)
        .def_static("tcnn2", &presets::tcnn2)
        .def_static("tcnn3", &presets::tcnn3)
        .def_static("bo_optimized", &presets::bo_optimized)
        .def("within_search_bounds", [](const WeightFactors& w) { return within_search_bounds(w); });

    m.def(
        "reparam_to_weights", [](double t0, double f1, double f2) { return reparam_to_weights({t0, f1, f2}); },
        py::arg("t0"), py::arg("f1"), py::arg("f2"));
    m.def("weights_to_reparam", [](const WeightFactors& w) {
        const Reparam r = weights_to_reparam(w);
        return py::make_tuple(r.t0, r.f1, r.f2);
    });

    py::class_<TractionModel>(m, "TractionModel")
        .def_property_readonly("layer_sizes", [](const TractionModel& tm) { return tm.params.layer_sizes; })
        .def(
            "predict",
            [](const TractionModel& tm, const Eigen::VectorXd& delta, const Eigen::VectorXd& phi) {
                if (delta.size() != phi.size()) {
                    throw InvalidArgument("predict: delta and phi lengths differ");
                }
                Eigen::Matrix2Xd x(2, delta.size());
                x.row(0) = delta.transpose();
                x.row(1) = phi.transpose();
                return Eigen::MatrixXd(tm.predict_physical(x).transpose());
            },
            py::arg("delta"), py::arg("phi"))
        .def("save", [](const TractionModel& tm, const std::filesystem::path& p) { write_model(p, tm); })
        .def_static("load", [](const std::filesystem::path& p) { return read_model(p); });

    m.def(
        "train",
        [](const Dataset& raw, const WeightFactors& w, std::int64_t epochs, std::vector<int> layer_sizes,
           std::uint64_t seed, double learning_rate, double loss_threshold) {
            const Dataset data = normalize_dataset(raw);
            TrainConfig cfg;
            cfg.layer_sizes = std::move(layer_sizes);
            cfg.max_epochs = epochs;
            cfg.loss_threshold = loss_threshold;
            cfg.seed = seed;
            cfg.weights = w;
            cfg.adam.learning_rate = learning_rate;
            TrainResult r;
            {
                py::gil_scoped_release release;
                r = train(data, build_constraint_grid(), cfg);
            }
            Eigen::MatrixXd hist(static_cast<Eigen::Index>(r.history.size()), 5);
            for (Eigen::Index k = 0; k < hist.rows(); ++k) {
                const auto& h = r.history[static_cast<std::size_t>(k)];
                hist.row(k) << h.mse0, h.mse1, h.mse2, h.mse3, h.total;
            }
            return py::make_tuple(TractionModel{std::move(r.params), *data.norm_factors()}, hist);
        },
        py::arg("dataset"), py::arg("weights") = WeightFactors::unconstrained(), py::arg("epochs") = 1000,
        py::arg("layer_sizes") = kDefaultLayerSizes, py::arg("seed") = 0, py::arg("learning_rate") = 1e-3,
        py::arg("loss_threshold") = std::numeric_limits<double>::min(),
        "Normalizes a raw dataset, trains on the default grid, returns (model, history) with history columns "
        "mse0, mse1, mse2, mse3, total.");

    m.def(
        "audit",
        [](const TractionModel& tm, const Dataset& raw, double delta_max, double delta_step, double phi_min,
           double phi_max, double phi_step, double eps_phi_deg) {
            const PolarGrid g = build_constraint_grid(grid_spec(delta_max, delta_step, phi_min, phi_max, phi_step));
            return report_dict(audit_model(tm, raw, g, eps_phi_deg).report);
        },
        py::arg("model"), py::arg("dataset"), py::arg("delta_max") = 3.0, py::arg("delta_step") = 0.1,
        py::arg("phi_min") = -60.0, py::arg("phi_max") = 90.0, py::arg("phi_step") = 15.0,
        py::arg("eps_phi_deg") = kDefaultEpsPhiDeg);

    m.def(
        "optimize_weights",
        [](const Dataset& raw, std::int64_t iterations, std::int64_t inner_epochs, std::int64_t init_samples,
           std::vector<int> layer_sizes, std::uint64_t seed) {
            BOConfig cfg;
            cfg.iterations = iterations;
            cfg.inner_epochs = inner_epochs;
            cfg.init_samples = init_samples;
            cfg.layer_sizes = std::move(layer_sizes);
            cfg.seed = seed;
            BOResult r;
            {
                py::gil_scoped_release release;
                r = optimize_weights(normalize_dataset(raw), build_constraint_grid(), cfg);
            }
            std::vector<double> losses;
            std::vector<double> incumbents;
            for (const auto& s : r.history) {
                losses.push_back(s.loss);
                incumbents.push_back(s.incumbent);
            }
            py::dict d;
            d["best_weights"] = r.best_weights;
            d["best_loss"] = r.best_loss;
            d["losses"] = losses;
            d["incumbents"] = incumbents;
            return d;
        },
        py::arg("dataset"), py::arg("iterations") = 300, py::arg("inner_epochs") = 500, py::arg("init_samples") = 8,
        py::arg("layer_sizes") = kDefaultLayerSizes, py::arg("seed") = 0);
}

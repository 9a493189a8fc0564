// Python module fqr._core.

#include "fqr/artifact.hpp"
#include "fqr/errors.hpp"
#include "fqr/fitter.hpp"
#include "fqr/fpca.hpp"
#include "fqr/infer.hpp"
#include "fqr/io.hpp"
#include "fqr/qloss.hpp"
#include "fqr/simgen.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <map>

namespace py = pybind11;
using namespace fqr;

namespace {

LongitudinalDataset dataset_from_arrays(const std::vector<std::string>& cluster_ids,
                                        const std::vector<std::string>& obs_ids, const Eigen::VectorXd& t,
                                        const Eigen::VectorXd& y, const Eigen::VectorXd& grid,
                                        const Eigen::MatrixXd& curves) {
    const auto n = static_cast<Eigen::Index>(cluster_ids.size());
    if (static_cast<Eigen::Index>(obs_ids.size()) != n || t.size() != n || y.size() != n || curves.rows() != n) {
        throw ValidationError("cluster_ids, obs_ids, t, y and curve rows must have the same length");
    }
    LongitudinalDataset data;
    data.grid = grid;
    data.curves = curves;
    std::map<std::string, std::size_t> index;
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::string& id = cluster_ids[static_cast<std::size_t>(r)];
        auto [it, fresh] = index.try_emplace(id, data.clusters.size());
        if (fresh) data.clusters.push_back({id, {}});
        data.clusters[it->second].observations.push_back({obs_ids[static_cast<std::size_t>(r)], y[r], t[r], r});
    }
    data.validate();
    return data;
}

std::optional<LambdaGrid> lambda_grid(const std::optional<std::tuple<double, double, int>>& g) {
    if (!g) return std::nullopt;
    return LambdaGrid::log_spaced(std::get<0>(*g), std::get<1>(*g), std::get<2>(*g));
}

TargetSpec make_target(const Eigen::VectorXd& t_points, const Eigen::VectorXd& curve_a,
                       const std::optional<Eigen::VectorXd>& curve_b) {
    TargetSpec target;
    target.t_points = t_points;
    target.curve_a = curve_a;
    if (curve_b) {
        target.kind = TargetKind::difference;
        target.curve_b = *curve_b;
    }
    return target;
}

py::dict summary_dict(const BootstrapSummary& s) {
    py::dict d;
    d["t"] = s.t_points;
    d["estimate"] = s.estimate;
    d["bias"] = s.bias;
    d["sd"] = s.sd;
    d["model_se"] = s.model_se;
    d["ci_lo"] = s.ci_lo;
    d["ci_hi"] = s.ci_hi;
    d["bias_replicates"] = s.bias_replicates.targets;
    d["sd_replicates"] = s.sd_replicates.targets;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Penalized quantile regression with functional covariates and random intercepts";
    m.attr("__version__") = fqr_version;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("check_loss", py::vectorize(check_loss), py::arg("v"), py::arg("tau"));
    m.def(
        "smooth_loss",
        [](const Eigen::VectorXd& v, double tau, double h) {
            const SmoothLossParams p{tau, h};
            validate(p);
            Eigen::VectorXd value(v.size()), grad(v.size()), curv(v.size());
            for (Eigen::Index k = 0; k < v.size(); ++k) {
                const LossDerivatives d = smooth_loss_all(v[k], p);
                value[k] = d.value;
                grad[k] = d.gradient;
                curv[k] = d.curvature;
            }
            return py::make_tuple(value, grad, curv);
        },
        py::arg("v"), py::arg("tau"), py::arg("h"), "Smoothed loss, first and second derivative.");
    m.def(
        "default_bandwidth",
        [](const Eigen::VectorXd& y) { return default_bandwidth({y.data(), static_cast<std::size_t>(y.size())}); },
        py::arg("y"));

    m.def(
        "fpca_smooth",
        [](const Eigen::VectorXd& grid, const Eigen::MatrixXd& values, double pve) {
            FunctionalSample sample{grid, values, {}};
            for (Eigen::Index r = 0; r < values.rows(); ++r) sample.obs_ids.push_back(std::to_string(r));
            const FpcaResult f = fpca_smooth(sample, pve);
            py::dict d;
            d["mean"] = f.mean;
            d["eigenfunctions"] = f.eigenfunctions;
            d["eigenvalues"] = f.eigenvalues;
            d["noise_variance"] = f.noise_variance;
            d["scores"] = f.scores;
            d["smoothed"] = f.smoothed;
            d["pve_achieved"] = f.pve_achieved;
            d["warnings"] = f.warnings;
            return d;
        },
        py::arg("grid"), py::arg("values"), py::arg("pve") = 0.99);

    py::class_<LongitudinalDataset>(m, "Dataset")
        .def(py::init(&dataset_from_arrays), py::arg("cluster_ids"), py::arg("obs_ids"), py::arg("t"), py::arg("y"),
             py::arg("grid"), py::arg("curves"))
        .def_readwrite("grid", &LongitudinalDataset::grid)
        .def_readwrite("curves", &LongitudinalDataset::curves)
        .def_property_readonly("num_clusters", [](const LongitudinalDataset& d) { return d.clusters.size(); })
        .def_property_readonly("num_observations", &LongitudinalDataset::total_observations)
        .def("responses", &LongitudinalDataset::responses)
        .def("times",
             [](const LongitudinalDataset& d) {
                 Eigen::VectorXd t(d.total_observations());
                 Eigen::Index r = 0;
                 for (const auto& c : d.clusters) {
                     for (const auto& o : c.observations) t[r++] = o.t;
                 }
                 return t;
             })
        .def("cluster_ids", [](const LongitudinalDataset& d) {
            std::vector<std::string> ids;
            for (const auto& c : d.clusters) ids.push_back(c.cluster_id);
            return ids;
        });

    m.def(
        "ingest",
        [](const std::filesystem::path& responses, const std::filesystem::path& curves) {
            return ingest(responses, curves).dataset;
        },
        py::arg("responses"), py::arg("curves"), "Reads the response and curve CSV files (raw, unsmoothed curves).");

    py::class_<ModelSpec>(m, "ModelSpec")
        .def(py::init([](double tau, const std::string& variant, int num_t, int num_s, int penalty_order,
                         const std::string& basis_t, const std::string& basis_s,
                         std::optional<std::pair<double, double>> t_domain) {
                 ModelSpec s;
                 s.tau = tau;
                 s.variant = variant_from_string(variant);
                 s.num_t = num_t;
                 s.num_s = num_s;
                 s.penalty_order = penalty_order;
                 s.basis_t_kind = basis_kind_from_string(basis_t);
                 s.basis_s_kind = basis_kind_from_string(basis_s);
                 if (t_domain) s.t_domain = Interval{t_domain->first, t_domain->second};
                 s.validate();
                 return s;
             }),
             py::arg("tau") = 0.5, py::arg("variant") = "surface", py::arg("num_t") = 10, py::arg("num_s") = 10,
             py::arg("penalty_order") = 2, py::arg("basis_t") = "cubic_bspline", py::arg("basis_s") = "cyclic_cubic",
             py::arg("t_domain") = py::none())
        .def_readwrite("tau", &ModelSpec::tau)
        .def_property_readonly("variant", [](const ModelSpec& s) { return to_string(s.variant); })
        .def_readwrite("num_t", &ModelSpec::num_t)
        .def_readwrite("num_s", &ModelSpec::num_s)
        .def_readwrite("penalty_order", &ModelSpec::penalty_order);

    py::class_<SmoothingParams>(m, "SmoothingParams")
        .def(py::init<double, double, double, double>(), py::arg("lambda_alpha") = 1.0,
             py::arg("lambda_beta_s") = 1.0, py::arg("lambda_beta_t") = 1.0, py::arg("lambda_u") = 1.0)
        .def_readwrite("lambda_alpha", &SmoothingParams::lambda_alpha)
        .def_readwrite("lambda_beta_s", &SmoothingParams::lambda_beta_s)
        .def_readwrite("lambda_beta_t", &SmoothingParams::lambda_beta_t)
        .def_readwrite("lambda_u", &SmoothingParams::lambda_u)
        .def("__repr__", [](const SmoothingParams& s) {
            return "SmoothingParams(" + std::to_string(s.lambda_alpha) + ", " + std::to_string(s.lambda_beta_s) +
                   ", " + std::to_string(s.lambda_beta_t) + ", " + std::to_string(s.lambda_u) + ")";
        });

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("spec", &FitResult::spec)
        .def_readonly("a", &FitResult::a)
        .def_readonly("delta", &FitResult::delta)
        .def_readonly("u", &FitResult::u)
        .def_readonly("smoothing", &FitResult::smoothing)
        .def_readonly("bandwidth", &FitResult::bandwidth)
        .def_readonly("Vp", &FitResult::Vp)
        .def_readonly("edf_ab", &FitResult::edf_ab)
        .def_readonly("edf_u", &FitResult::edf_u)
        .def_readonly("loglik", &FitResult::loglik)
        .def_readonly("aic", &FitResult::aic)
        .def_readonly("objective", &FitResult::objective)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations)
        .def_property_readonly("grid", [](const FitResult& f) { return f.bases->grid; })
        .def_property_readonly("t_domain", [](const FitResult& f) {
            return std::make_pair(f.bases->t.domain().lo, f.bases->t.domain().hi);
        });

    m.def(
        "fit",
        [](const LongitudinalDataset& data, const ModelSpec& spec, std::optional<SmoothingParams> smoothing,
           std::optional<double> bandwidth, std::optional<std::tuple<double, double, int>> grid, int folds,
           int threads) {
            const DesignMatrices x = assemble_design(data, spec);
            const Eigen::VectorXd y = data.responses();
            const double h = bandwidth ? *bandwidth : default_bandwidth({y.data(), static_cast<std::size_t>(y.size())});
            py::gil_scoped_release release;
            SmoothingParams sp;
            if (smoothing) {
                sp = *smoothing;
            } else {
                SelectionOptions opts;
                opts.grid = lambda_grid(grid);
                opts.folds = folds;
                opts.bandwidth = h;
                opts.threads = threads;
                sp = select_smoothing(x, y, spec, opts);
            }
            return penalized_fit(x, y, spec, sp, h);
        },
        py::arg("data"), py::arg("spec"), py::arg("smoothing") = py::none(), py::arg("bandwidth") = py::none(),
        py::arg("lambda_grid") = py::none(), py::arg("folds") = 5, py::arg("threads") = 1,
        "Fits the model; smoothing is chosen by cluster-blocked cross-validation unless given.\n"
        "lambda_grid is (log10_lo, log10_hi, points).");

    m.def("predict_quantile", &predict_quantile, py::arg("fit"), py::arg("curve"), py::arg("t"));
    m.def("quantile_difference", &quantile_difference, py::arg("fit"), py::arg("curve_a"), py::arg("curve_b"),
          py::arg("t"));
    m.def(
        "model_based_se",
        [](const FitResult& fit, const Eigen::VectorXd& t, const Eigen::VectorXd& a,
           std::optional<Eigen::VectorXd> b) { return model_based_se(fit, make_target(t, a, b)); },
        py::arg("fit"), py::arg("t"), py::arg("curve_a"), py::arg("curve_b") = py::none());
    m.def(
        "bootstrap",
        [](const LongitudinalDataset& data, const FitResult& fit, const Eigen::VectorXd& t, const Eigen::VectorXd& a,
           std::optional<Eigen::VectorXd> b, int b_bias, int b_sd, double alpha, std::uint64_t seed, int threads) {
            SummaryOptions opts;
            opts.b_bias = b_bias;
            opts.b_sd = b_sd;
            opts.alpha = alpha;
            opts.seed = seed;
            opts.threads = threads;
            const TargetSpec target = make_target(t, a, b);
            BootstrapSummary s;
            {
                py::gil_scoped_release release;
                s = bootstrap_summary(data, fit, target, opts);
            }
            return summary_dict(s);
        },
        py::arg("data"), py::arg("fit"), py::arg("t"), py::arg("curve_a"), py::arg("curve_b") = py::none(),
        py::arg("b_bias") = 100, py::arg("b_sd") = 100, py::arg("alpha") = 0.05, py::arg("seed") = 1,
        py::arg("threads") = 1, "Bias-adjusted bootstrap band for a prediction or a difference.");

    m.def(
        "compare_models",
        [](const LongitudinalDataset& data, const ModelSpec& base, const std::vector<std::string>& variants,
           std::optional<std::tuple<double, double, int>> grid, int folds, int threads) {
            std::vector<ModelSpec> specs;
            for (const auto& v : variants) {
                ModelSpec s = base;
                s.variant = variant_from_string(v);
                specs.push_back(s);
            }
            SelectionOptions opts;
            opts.grid = lambda_grid(grid);
            opts.folds = folds;
            opts.threads = threads;
            std::vector<ComparisonRow> rows;
            {
                py::gil_scoped_release release;
                rows = compare_models(data, specs, base.tau, opts);
            }
            py::list out;
            for (const auto& r : rows) {
                py::dict d;
                d["variant"] = to_string(r.variant);
                d["ok"] = r.ok;
                d["error"] = r.error;
                d["aic"] = r.aic;
                d["edf_ab"] = r.edf_ab;
                d["edf_u"] = r.edf_u;
                d["smoothing"] = r.smoothing;
                d["min_aic"] = r.min_aic;
                out.append(d);
            }
            return out;
        },
        py::arg("data"), py::arg("spec"),
        py::arg("variants") = std::vector<std::string>{"surface", "s_only", "t_only", "constant"},
        py::arg("lambda_grid") = py::none(), py::arg("folds") = 5, py::arg("threads") = 1);

    m.def(
        "save_fit",
        [](const std::filesystem::path& path, const FitResult& fit, std::optional<std::vector<std::string>> ids) {
            FitArtifact art;
            art.fit = fit;
            if (ids) {
                if (static_cast<Eigen::Index>(ids->size()) != fit.u.size()) {
                    throw ValidationError("cluster_ids must have one entry per random intercept");
                }
                art.cluster_ids = *ids;
            } else {
                for (Eigen::Index i = 0; i < fit.u.size(); ++i) art.cluster_ids.push_back(std::to_string(i + 1));
            }
            art.created_at = utc_timestamp();
            save_fit(path, art);
        },
        py::arg("path"), py::arg("fit"), py::arg("cluster_ids") = py::none());
    m.def(
        "load_fit", [](const std::filesystem::path& path) { return load_fit(path).fit; }, py::arg("path"));

    py::class_<SimTruth>(m, "SimTruth")
        .def_readonly("u", &SimTruth::u)
        .def_readonly("clean_curves", &SimTruth::clean_curves)
        .def_readonly("quantile", &SimTruth::quantile)
        .def("difference", &SimTruth::difference, py::arg("curve_a"), py::arg("curve_b"), py::arg("t"))
        .def("linear_predictor", &SimTruth::linear_predictor, py::arg("curve"), py::arg("t"));

    m.def(
        "simulate",
        [](int clusters, int n_min, int n_max, double tau, const std::string& error, double sigma_u, double noise_sd,
           const std::string& alpha, const std::string& beta, int grid_points, std::uint64_t seed) {
            SimScenario sc;
            sc.num_clusters = clusters;
            sc.n_min = n_min;
            sc.n_max = n_max;
            sc.tau = tau;
            sc.error = error_law_from_string(error);
            sc.sigma_u = sigma_u;
            sc.noise_sd = noise_sd;
            const Interval s_range{0.0, 24.0};
            sc.grid = Eigen::VectorXd::LinSpaced(grid_points, s_range.lo, s_range.hi);
            sc.alpha_true = alpha_preset(alpha, sc.t_range);
            sc.beta_true = beta_preset(beta, s_range, sc.t_range);
            sc.seed = seed;
            SimulatedData sim = generate(sc);
            return std::make_pair(std::move(sim.dataset), std::move(sim.truth));
        },
        py::arg("clusters") = 50, py::arg("n_min") = 8, py::arg("n_max") = 8, py::arg("tau") = 0.5,
        py::arg("error") = "normal", py::arg("sigma_u") = 0.5, py::arg("noise_sd") = 0.0,
        py::arg("alpha") = "default", py::arg("beta") = "surface", py::arg("grid_points") = 49,
        py::arg("seed") = 1, "Synthetic dataset on S = [0, 24], T = [0, 20]; returns (Dataset, SimTruth).");
    m.def(
        "curve_from_coefficients",
        [](const std::array<double, 5>& c, const Eigen::VectorXd& grid) {
            return curve_from_coefficients(c, grid, {0.0, 24.0});
        },
        py::arg("coefficients"), py::arg("grid"));
    m.def(
        "oracle_qreg",
        [](const Eigen::VectorXd& y, const Eigen::VectorXd& x, double tau) {
            const LineFit f = oracle_qreg(y, x, tau);
            return py::make_tuple(f.intercept, f.slope, f.loss);
        },
        py::arg("y"), py::arg("x"), py::arg("tau"), "Exact check-loss line fit: (intercept, slope, loss).");
}

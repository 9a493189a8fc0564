#include "fqr/commands.hpp"

#include "fqr/errors.hpp"
#include "fqr/plot.hpp"
#include "fqr/simgen.hpp"

#include <json.hpp>

#include <fstream>
#include <iostream>

namespace fqr {

namespace fs = std::filesystem;

namespace {

const fs::path& require(const std::optional<fs::path>& p, const char* key) {
    if (!p) throw ValidationError(std::string("config key '") + key + "' is required for this command");
    if (!fs::exists(*p)) throw ValidationError("file '" + p->string() + "' does not exist");
    return *p;
}

std::ofstream open_output(const fs::path& dir, const std::string& name) {
    fs::create_directories(dir);
    std::ofstream out(dir / name);
    if (!out) throw ValidationError("cannot write '" + (dir / name).string() + "'");
    return out;
}

Eigen::VectorXd t_points_for(const RunConfig& config, const FitResult& fit) {
    if (config.t_points) return *config.t_points;
    const Interval d = fit.bases->t.domain();
    return Eigen::VectorXd::LinSpaced(21, d.lo, d.hi);
}

std::vector<std::string> cluster_ids(const LongitudinalDataset& data) {
    std::vector<std::string> ids;
    for (const auto& c : data.clusters) ids.push_back(c.cluster_id);
    return ids;
}

void write_replicates(const fs::path& dir, const std::string& name, const Eigen::VectorXd& t, const ReplicateSet& set) {
    auto out = open_output(dir, name);
    out << "replicate";
    for (Eigen::Index j = 0; j < t.size(); ++j) out << ",t=" << format_number(t[j]);
    out << '\n';
    for (Eigen::Index b = 0; b < set.targets.rows(); ++b) {
        out << set.replicate_ids[static_cast<std::size_t>(b)];
        for (Eigen::Index j = 0; j < set.targets.cols(); ++j) out << ',' << format_number(set.targets(b, j));
        out << '\n';
    }
}

SelectionOptions selection_options(const RunConfig& config) {
    SelectionOptions opts;
    opts.grid = config.lambda_grid;
    opts.folds = config.cv_folds;
    opts.bandwidth = config.bandwidth;
    opts.threads = config.threads;
    return opts;
}

}  // namespace

PreparedData prepare_data(const RunConfig& config) {
    PreparedData out;
    out.raw = ingest(require(config.responses, "responses"), require(config.curves, "curves"));
    out.dataset = out.raw.dataset;
    if (config.smooth_curves) {
        const FpcaResult fpca = fpca_smooth(out.raw.sample, config.pve);
        for (const auto& w : fpca.warnings) std::cerr << "warning: " << w << '\n';
        out.dataset.curves = fpca.smoothed;
        out.smoother = {true, config.pve, fpca.pve_achieved, static_cast<int>(fpca.components()), fpca.noise_variance};
    } else {
        out.raw.sample.validate();
        if (!out.dataset.curves.allFinite()) {
            throw ValidationError("curves contain missing values; enable smooth_curves to impute them");
        }
    }
    return out;
}

FitArtifact fit_model(const RunConfig& config, const PreparedData& data) {
    const Eigen::VectorXd y = data.dataset.responses();
    const double h = config.bandwidth.value_or(default_bandwidth(std::span<const double>(y.data(), y.size())));
    const DesignMatrices design = assemble_design(data.dataset, config.spec);
    SmoothingParams smoothing;
    if (config.smoothing) {
        smoothing = *config.smoothing;
    } else {
        SelectionOptions opts = selection_options(config);
        opts.bandwidth = h;
        smoothing = select_smoothing(design, y, config.spec, opts);
    }
    FitArtifact art;
    art.fit = penalized_fit(design, y, config.spec, smoothing, h);
    if (!art.fit.converged) std::cerr << "warning: fit did not converge in " << art.fit.iterations << " iterations\n";
    art.cluster_ids = cluster_ids(data.dataset);
    art.config = config.echo;
    art.smoother = data.smoother;
    art.created_at = utc_timestamp();
    return art;
}

TargetSpec load_target(const RunConfig& config, const FitResult& fit) {
    const CurveTable table = read_curves(require(config.target_curves, "target_curves"));
    if (table.grid.size() != fit.bases->grid.size() || table.grid != fit.bases->grid) {
        throw ValidationError("target curves are not on the fitted grid");
    }
    if (!table.values.allFinite()) throw ValidationError("target curves must be complete");
    TargetSpec target;
    const Eigen::Index rows = table.values.rows();
    const std::string kind = config.target.value_or(rows == 2 ? "difference" : "linear_predictor");
    if (kind == "difference") {
        if (rows != 2) throw ValidationError("a difference target needs exactly 2 curves (A then B)");
        target.kind = TargetKind::difference;
        target.curve_a = table.values.row(0).transpose();
        target.curve_b = table.values.row(1).transpose();
    } else {
        if (rows != 1) throw ValidationError("a linear_predictor target needs exactly 1 curve");
        target.kind = TargetKind::linear_predictor;
        target.curve_a = table.values.row(0).transpose();
    }
    target.t_points = t_points_for(config, fit);
    return target;
}

void cmd_fit(const RunConfig& config, const fs::path& out_dir) {
    const PreparedData data = prepare_data(config);
    const FitArtifact art = fit_model(config, data);
    fs::create_directories(out_dir);
    save_fit(out_dir / "fit.json", art);
}

void cmd_predict(const RunConfig& config, const fs::path& out_dir) {
    const FitArtifact art = load_fit(require(config.fit, "fit"));
    const TargetSpec target = load_target(config, art.fit);
    const Eigen::VectorXd est = evaluate_target(art.fit, target);
    const Eigen::VectorXd se = model_based_se(art.fit, target);
    auto out = open_output(out_dir, "predictions.csv");
    out << "t,estimate,model_se\n";
    for (Eigen::Index j = 0; j < est.size(); ++j) {
        out << format_number(target.t_points[j]) << ',' << format_number(est[j]) << ',' << format_number(se[j]) << '\n';
    }
}

void cmd_bootstrap(const RunConfig& config, const fs::path& out_dir) {
    const PreparedData data = prepare_data(config);
    FitArtifact art;
    if (config.fit) {
        art = load_fit(require(config.fit, "fit"));
        if (art.cluster_ids != cluster_ids(data.dataset) || art.fit.bases->grid != data.dataset.grid) {
            throw ValidationError("fit file was not produced from this dataset");
        }
    } else {
        art = fit_model(config, data);
    }
    const TargetSpec target = load_target(config, art.fit);
    SummaryOptions opts;
    opts.b_bias = config.b_bias;
    opts.b_sd = config.b_sd;
    opts.alpha = config.alpha;
    opts.seed = config.seed;
    opts.threads = config.threads;
    const BootstrapSummary s = bootstrap_summary(data.dataset, art.fit, target, opts);
    for (const auto* set : {&s.bias_replicates, &s.sd_replicates}) {
        for (const auto& w : set->warnings) std::cerr << "warning: " << w << '\n';
    }

    auto out = open_output(out_dir, "bootstrap.csv");
    out << "t,estimate,bias,sd,ci_lo,ci_hi\n";
    for (Eigen::Index j = 0; j < s.estimate.size(); ++j) {
        out << format_number(s.t_points[j]) << ',' << format_number(s.estimate[j]) << ',' << format_number(s.bias[j])
            << ',' << format_number(s.sd[j]) << ',' << format_number(s.ci_lo[j]) << ',' << format_number(s.ci_hi[j])
            << '\n';
    }
    if (config.write_replicates) {
        write_replicates(out_dir, "bootstrap_bias_replicates.csv", s.t_points, s.bias_replicates);
        write_replicates(out_dir, "bootstrap_sd_replicates.csv", s.t_points, s.sd_replicates);
    }
    if (config.plot) {
        BandPlot plot;
        plot.t = s.t_points;
        plot.estimate = s.estimate;
        plot.adjusted = s.estimate - s.bias;
        plot.lo = s.ci_lo;
        plot.hi = s.ci_hi;
        const int level = static_cast<int>(std::lround(100.0 * (1.0 - s.alpha)));
        plot.title = (target.kind == TargetKind::difference ? "Quantile difference" : "Linear predictor") +
                     std::string(" at tau = ") + format_number(art.fit.spec.tau) + ", " + std::to_string(level) +
                     "% pointwise band";
        plot.y_label = target.kind == TargetKind::difference ? "D(t)" : "Q(t)";
        auto svg = open_output(out_dir, "bootstrap.svg");
        svg << band_svg(plot);
    }
}

void cmd_compare(const RunConfig& config, const fs::path& out_dir) {
    const PreparedData data = prepare_data(config);
    std::vector<ModelSpec> specs;
    for (Variant v : config.compare_variants) {
        ModelSpec spec = config.spec;
        spec.variant = v;
        specs.push_back(spec);
    }
    SelectionOptions opts = selection_options(config);
    const auto rows = compare_models(data.dataset, specs, config.spec.tau, opts);
    auto out = open_output(out_dir, "compare.csv");
    out << "variant,status,aic,edf_ab,edf_u,lambda_alpha,lambda_beta_s,lambda_beta_t,lambda_u,min_aic,error\n";
    for (const auto& r : rows) {
        out << to_string(r.variant) << ',' << (r.ok ? "ok" : "failed") << ',';
        if (r.ok) {
            out << format_number(r.aic) << ',' << format_number(r.edf_ab) << ',' << format_number(r.edf_u) << ','
                << format_number(r.smoothing.lambda_alpha) << ',' << format_number(r.smoothing.lambda_beta_s) << ','
                << format_number(r.smoothing.lambda_beta_t) << ',' << format_number(r.smoothing.lambda_u);
        } else {
            out << ",,,,,,";
        }
        std::string err = r.error;
        for (char& c : err) {
            if (c == ',' || c == '\n') c = ';';
        }
        out << ',' << (r.min_aic ? "true" : "false") << ',' << err << '\n';
    }
}

void cmd_simulate(const RunConfig& config, const fs::path& out_dir) {
    const SimulationConfig& sc = config.simulation;
    const SimScenario scenario = sc.scenario(config.spec.tau, config.seed);
    const SimulatedData sim = generate(scenario);

    std::vector<std::string> ids(static_cast<std::size_t>(sim.dataset.curves.rows()));
    for (const auto& c : sim.dataset.clusters) {
        for (const auto& o : c.observations) ids[static_cast<std::size_t>(o.curve_row)] = o.obs_id;
    }
    {
        auto out = open_output(out_dir, "responses.csv");
        write_responses(out, sim.dataset);
    }
    {
        auto out = open_output(out_dir, "curves.csv");
        write_curves(out, {sim.dataset.grid, sim.dataset.curves, ids});
    }
    const Interval s_range{sc.s_range.lo, sc.s_range.hi};
    const Eigen::VectorXd xa = curve_from_coefficients(sc.pair_a, sim.dataset.grid, s_range);
    const Eigen::VectorXd xb = curve_from_coefficients(sc.pair_b, sim.dataset.grid, s_range);
    {
        CurveTable pair{sim.dataset.grid, Eigen::MatrixXd(2, sim.dataset.grid.size()), {"A", "B"}};
        pair.values.row(0) = xa.transpose();
        pair.values.row(1) = xb.transpose();
        auto out = open_output(out_dir, "targets.csv");
        write_curves(out, pair);
    }

    const Eigen::VectorXd t = config.t_points.value_or(Eigen::VectorXd::LinSpaced(21, sc.t_range.lo, sc.t_range.hi));
    const Eigen::VectorXd d = sim.truth.difference(sc.pair_a, sc.pair_b, t);
    nlohmann::ordered_json j;
    j["format"] = "fqr-truth";
    j["seed"] = config.seed;
    j["tau"] = config.spec.tau;
    j["scenario"] = {{"clusters", sc.clusters},
                     {"n_min", sc.n_min},
                     {"n_max", sc.n_max},
                     {"alpha", sc.alpha},
                     {"beta", sc.beta},
                     {"beta_amplitude", sc.beta_amplitude},
                     {"sigma_u", sc.sigma_u},
                     {"error", to_string(sc.error)},
                     {"error_scale", sc.error_scale},
                     {"noise_sd", sc.noise_sd}};
    j["pair_a"] = sc.pair_a;
    j["pair_b"] = sc.pair_b;
    j["t"] = std::vector<double>(t.data(), t.data() + t.size());
    std::vector<double> alpha(static_cast<std::size_t>(t.size()));
    for (Eigen::Index k = 0; k < t.size(); ++k) alpha[static_cast<std::size_t>(k)] = sim.truth.alpha(t[k]);
    j["alpha"] = alpha;
    j["difference"] = std::vector<double>(d.data(), d.data() + d.size());
    j["u"] = std::vector<double>(sim.truth.u.data(), sim.truth.u.data() + sim.truth.u.size());
    nlohmann::ordered_json q = nlohmann::ordered_json::object();
    for (const auto& c : sim.dataset.clusters) {
        for (const auto& o : c.observations) q[o.obs_id] = sim.truth.quantile[o.curve_row];
    }
    j["quantile"] = q;
    auto out = open_output(out_dir, "truth.json");
    out << j.dump(2) << '\n';
}

}  // namespace fqr

#include "fqr/infer.hpp"

#include "fqr/errors.hpp"
#include "fqr/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <sstream>

namespace fqr {

namespace {

Eigen::MatrixXd predictor_weights(const FitResult& fit, const Eigen::VectorXd& curve, const Eigen::VectorXd& t_points) {
    if (!fit.bases) throw ValidationError("fit carries no bases");
    const ModelBases& bases = *fit.bases;
    if (curve.size() != bases.grid.size()) throw ValidationError("target curve is not on the model grid");
    const Eigen::RowVectorXd xi = curve.transpose() * score_operator(bases.grid, bases.s);
    const Eigen::MatrixXd psi = bases.t.evaluate(t_points);
    const Eigen::Index l = fit.a.size();
    Eigen::MatrixXd w(t_points.size(), l + fit.delta.size());
    for (Eigen::Index k = 0; k < t_points.size(); ++k) {
        w.row(k).head(l) = psi.row(k);
        w.row(k).tail(fit.delta.size()) = beta_row(fit.spec.variant, psi.row(k), xi);
    }
    return w;
}

Eigen::VectorXd shifted_mean(const Eigen::MatrixXd& rows, const Eigen::VectorXd& reference) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(rows.cols());
    for (Eigen::Index b = 0; b < rows.rows(); ++b) m += rows.row(b).transpose() - reference;
    return m / static_cast<double>(rows.rows());
}

// Collects per-replicate targets in replicate order and enforces the failure cap.
ReplicateSet gather(std::vector<std::optional<Eigen::VectorXd>>& slots, std::vector<std::string>& errors,
                    Eigen::Index width, double max_failure_fraction, const char* what) {
    ReplicateSet out;
    std::vector<int> ok;
    for (std::size_t b = 0; b < slots.size(); ++b) {
        if (slots[b]) {
            ok.push_back(static_cast<int>(b));
        } else {
            ++out.failed;
            out.warnings.push_back(std::string(what) + " replicate " + std::to_string(b) + " dropped: " + errors[b]);
        }
    }
    const double frac = slots.empty() ? 0.0 : static_cast<double>(out.failed) / static_cast<double>(slots.size());
    if (frac > max_failure_fraction || ok.size() < 2) {
        std::ostringstream msg;
        msg << what << " bootstrap: " << out.failed << " of " << slots.size() << " replicate fits failed";
        throw NumericalError(msg.str());
    }
    out.targets.resize(static_cast<Eigen::Index>(ok.size()), width);
    for (std::size_t k = 0; k < ok.size(); ++k) {
        out.targets.row(static_cast<Eigen::Index>(k)) = slots[static_cast<std::size_t>(ok[k])]->transpose();
    }
    out.replicate_ids = std::move(ok);
    return out;
}

Eigen::VectorXd wild_responses(const DesignMatrices& design, const FitResult& fit, const Eigen::VectorXd& y,
                               Rng& rng) {
    const Eigen::Index n = design.rows();
    const Eigen::Index num_u = fit.u.size();
    const Eigen::VectorXd eta_fixed = design.A * fit.a + design.B * fit.delta;
    std::uniform_int_distribution<Eigen::Index> pick(0, num_u - 1);
    Eigen::VectorXd u_star(num_u);
    for (Eigen::Index i = 0; i < num_u; ++i) u_star[i] = fit.u[pick(rng)];
    Eigen::VectorXd y_star(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const int c = design.cluster_of_row[static_cast<std::size_t>(r)];
        const double resid = y[r] - eta_fixed[r] - fit.u[c];
        y_star[r] = eta_fixed[r] + draw_wild_weight(rng, fit.spec.tau) * std::abs(resid) + u_star[c];
    }
    return y_star;
}

}  // namespace

Eigen::MatrixXd target_weights(const FitResult& fit, const TargetSpec& target) {
    if (target.kind == TargetKind::linear_predictor) return predictor_weights(fit, target.curve_a, target.t_points);
    return predictor_weights(fit, target.curve_a, target.t_points) -
           predictor_weights(fit, target.curve_b, target.t_points);
}

Eigen::VectorXd predict_quantile(const FitResult& fit, const Eigen::VectorXd& curve, const Eigen::VectorXd& t_points) {
    return predictor_weights(fit, curve, t_points) * fit.fixed();
}

Eigen::VectorXd quantile_difference(const FitResult& fit, const Eigen::VectorXd& curve_a,
                                    const Eigen::VectorXd& curve_b, const Eigen::VectorXd& t_points) {
    return predict_quantile(fit, curve_a, t_points) - predict_quantile(fit, curve_b, t_points);
}

Eigen::VectorXd evaluate_target(const FitResult& fit, const TargetSpec& target) {
    if (target.kind == TargetKind::linear_predictor) return predict_quantile(fit, target.curve_a, target.t_points);
    return quantile_difference(fit, target.curve_a, target.curve_b, target.t_points);
}

Eigen::VectorXd model_based_se(const FitResult& fit, const TargetSpec& target) {
    const Eigen::MatrixXd w = target_weights(fit, target);
    Eigen::VectorXd se(w.rows());
    for (Eigen::Index k = 0; k < w.rows(); ++k) {
        se[k] = std::sqrt(std::max(0.0, w.row(k).dot(fit.Vp * w.row(k).transpose())));
    }
    return se;
}

Eigen::VectorXd column_sd(const Eigen::MatrixXd& replicates) {
    const Eigen::Index b = replicates.rows();
    Eigen::VectorXd sd = Eigen::VectorXd::Zero(replicates.cols());
    if (b < 2) return sd;
    // Deviations from the first replicate keep identical replicates at exactly 0.
    const Eigen::VectorXd ref = replicates.row(0).transpose();
    const Eigen::VectorXd m = shifted_mean(replicates, ref);
    for (Eigen::Index k = 0; k < b; ++k) {
        const Eigen::VectorXd dev = replicates.row(k).transpose() - ref - m;
        sd += dev.cwiseAbs2();
    }
    return (sd / static_cast<double>(b - 1)).cwiseSqrt();
}

LongitudinalDataset block_resample(const LongitudinalDataset& data, std::uint64_t seed, int replicate) {
    Rng rng = derive_stream(seed, stream::block_bootstrap, static_cast<std::uint64_t>(replicate));
    const auto num = static_cast<int>(data.clusters.size());
    std::uniform_int_distribution<int> pick(0, num - 1);
    std::vector<int> drawn(static_cast<std::size_t>(num));
    for (int& c : drawn) c = pick(rng);

    Eigen::Index rows = 0;
    for (int c : drawn) rows += static_cast<Eigen::Index>(data.clusters[static_cast<std::size_t>(c)].observations.size());

    LongitudinalDataset out;
    out.grid = data.grid;
    out.curves.resize(rows, data.grid.size());
    Eigen::Index row = 0;
    for (int k = 0; k < num; ++k) {
        const ClusterRecord& src = data.clusters[static_cast<std::size_t>(drawn[static_cast<std::size_t>(k)])];
        ClusterRecord copy;
        copy.cluster_id = "b" + std::to_string(k) + ":" + src.cluster_id;
        for (const Observation& o : src.observations) {
            out.curves.row(row) = data.curves.row(o.curve_row);
            copy.observations.push_back({o.obs_id, o.y, o.t, row});
            ++row;
        }
        out.clusters.push_back(std::move(copy));
    }
    return out;
}

BlockBootstrap block_bootstrap_sd(const LongitudinalDataset& data, const FitResult& fit, const TargetSpec& target,
                                  const BootstrapOptions& options) {
    if (options.replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
    const auto b_total = static_cast<std::size_t>(options.replicates);
    std::vector<std::optional<Eigen::VectorXd>> slots(b_total);
    std::vector<std::string> errors(b_total);
    Eigen::VectorXd start = fit.all();
    start.tail(fit.u.size()).setZero();

    parallel_for(b_total, options.threads, [&](std::size_t b) {
        try {
            const LongitudinalDataset boot = block_resample(data, options.seed, static_cast<int>(b));
            const DesignMatrices design = assemble_design(boot, fit.spec, *fit.bases);
            FitOptions fopts = options.fit;
            fopts.initial = start;
            const FitResult refit = penalized_fit(design, boot.responses(), fit.spec, fit.smoothing, fit.bandwidth, fopts);
            if (!refit.converged) {
                errors[b] = "fit did not converge";
                return;
            }
            slots[b] = evaluate_target(refit, target);
        } catch (const std::exception& e) {
            errors[b] = e.what();
        }
    });

    BlockBootstrap out;
    out.replicates = gather(slots, errors, target.t_points.size(), options.max_failure_fraction, "block");
    out.sd = column_sd(out.replicates.targets);
    return out;
}

double draw_wild_weight(Rng& rng, double tau) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return unit(rng) < tau ? -2.0 * tau : 2.0 * (1.0 - tau);
}

LongitudinalDataset wild_resample(const LongitudinalDataset& data, const FitResult& fit, std::uint64_t seed,
                                  int replicate) {
    const DesignMatrices design = assemble_design(data, fit.spec, *fit.bases);
    Rng rng = derive_stream(seed, stream::wild_bootstrap, static_cast<std::uint64_t>(replicate));
    const Eigen::VectorXd y_star = wild_responses(design, fit, data.responses(), rng);
    LongitudinalDataset out = data;
    Eigen::Index r = 0;
    for (auto& c : out.clusters) {
        for (auto& o : c.observations) o.y = y_star[r++];
    }
    return out;
}

WildBootstrap wild_bootstrap_bias(const LongitudinalDataset& data, const FitResult& fit, const TargetSpec& target,
                                  const BootstrapOptions& options) {
    if (options.replicates < 2) throw ValidationError("bootstrap needs at least 2 replicates");
    const DesignMatrices design = assemble_design(data, fit.spec, *fit.bases);
    const Eigen::VectorXd y = data.responses();
    const Eigen::VectorXd estimate = evaluate_target(fit, target);
    const auto b_total = static_cast<std::size_t>(options.replicates);
    std::vector<std::optional<Eigen::VectorXd>> slots(b_total);
    std::vector<std::string> errors(b_total);
    const Eigen::VectorXd start = fit.all();

    parallel_for(b_total, options.threads, [&](std::size_t b) {
        try {
            Rng rng = derive_stream(options.seed, stream::wild_bootstrap, b);
            const Eigen::VectorXd y_star = wild_responses(design, fit, y, rng);
            FitOptions fopts = options.fit;
            fopts.initial = start;
            const FitResult refit = penalized_fit(design, y_star, fit.spec, fit.smoothing, fit.bandwidth, fopts);
            if (!refit.converged) {
                errors[b] = "fit did not converge";
                return;
            }
            slots[b] = evaluate_target(refit, target);
        } catch (const std::exception& e) {
            errors[b] = e.what();
        }
    });

    WildBootstrap out;
    out.replicates = gather(slots, errors, target.t_points.size(), options.max_failure_fraction, "wild");
    out.bias = shifted_mean(out.replicates.targets, estimate);
    return out;
}

ConfidenceBand bootstrap_ci(const Eigen::VectorXd& estimate, const Eigen::VectorXd& bias, const Eigen::VectorXd& sd,
                            double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (bias.size() != estimate.size() || sd.size() != estimate.size()) {
        throw ValidationError("estimate, bias and sd must have the same length");
    }
    const double q = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha / 2.0);
    const Eigen::VectorXd centre = estimate - bias;
    return {centre - q * sd, centre + q * sd};
}

BootstrapSummary bootstrap_summary(const LongitudinalDataset& data, const FitResult& fit, const TargetSpec& target,
                                   const SummaryOptions& options) {
    BootstrapSummary s;
    s.t_points = target.t_points;
    s.estimate = evaluate_target(fit, target);
    s.model_se = model_based_se(fit, target);
    s.alpha = options.alpha;
    s.b_bias = options.b_bias;
    s.b_sd = options.b_sd;
    s.seed = options.seed;

    BootstrapOptions wild{options.b_bias, options.seed, options.threads, 0.2, options.fit};
    WildBootstrap w = wild_bootstrap_bias(data, fit, target, wild);
    BootstrapOptions block{options.b_sd, options.seed, options.threads, 0.2, options.fit};
    BlockBootstrap k = block_bootstrap_sd(data, fit, target, block);

    s.bias = w.bias;
    s.sd = k.sd;
    const ConfidenceBand band = bootstrap_ci(s.estimate, s.bias, s.sd, options.alpha);
    s.ci_lo = band.lo;
    s.ci_hi = band.hi;
    s.bias_replicates = std::move(w.replicates);
    s.sd_replicates = std::move(k.replicates);
    return s;
}

}  // namespace fqr

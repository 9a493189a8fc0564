#include "fqr/errors.hpp"
#include "fqr/fitter.hpp"
#include "fqr/parallel.hpp"

#include <cmath>
#include <limits>
#include <tuple>

namespace fqr {

LambdaGrid LambdaGrid::log_spaced(double log10_lo, double log10_hi, int points) {
    if (points < 1) throw ValidationError("lambda grid needs at least one point");
    std::vector<double> values;
    for (int k = 0; k < points; ++k) {
        const double e = points == 1 ? log10_lo : log10_lo + (log10_hi - log10_lo) * k / (points - 1);
        values.push_back(std::pow(10.0, e));
    }
    return {values, values, values, values};
}

void LambdaGrid::validate() const {
    if (alpha.empty() || beta_s.empty() || beta_t.empty() || u.empty()) {
        throw ValidationError("every lambda grid needs at least one value");
    }
    if (alpha.size() != beta_t.size()) {
        throw ValidationError("lambda_alpha and lambda_beta_t grids share an index and must have equal length");
    }
    for (const auto* g : {&alpha, &beta_s, &beta_t, &u}) {
        for (double v : *g) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("lambda grid values must be finite and >= 0");
        }
    }
}

DesignMatrices subset_design(const DesignMatrices& design, const std::vector<int>& clusters) {
    std::vector<int> remap(static_cast<std::size_t>(design.num_clusters()), -1);
    for (std::size_t k = 0; k < clusters.size(); ++k) remap[static_cast<std::size_t>(clusters[k])] = static_cast<int>(k);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
        if (remap[static_cast<std::size_t>(design.cluster_of_row[static_cast<std::size_t>(r)])] >= 0) rows.push_back(r);
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    DesignMatrices out;
    out.variant = design.variant;
    out.bases = design.bases;
    out.A.resize(n, design.A.cols());
    out.Xi.resize(n, design.Xi.cols());
    out.B.resize(n, design.B.cols());
    out.Z = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(clusters.size()));
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index r = rows[static_cast<std::size_t>(k)];
        out.A.row(k) = design.A.row(r);
        out.Xi.row(k) = design.Xi.row(r);
        out.B.row(k) = design.B.row(r);
        const int c = remap[static_cast<std::size_t>(design.cluster_of_row[static_cast<std::size_t>(r)])];
        out.Z(k, c) = 1.0;
        out.cluster_of_row.push_back(c);
        out.row_index.emplace_back(c, design.row_index[static_cast<std::size_t>(r)].second);
    }
    return out;
}

namespace {

std::vector<SmoothingParams> candidates_for(const LambdaGrid& grid, Variant variant) {
    const bool uses_s = variant == Variant::surface || variant == Variant::s_only;
    // A penalty the variant does not use stays at its first grid value.
    const std::vector<double> first{grid.beta_s.front()};
    const auto& bs = uses_s ? grid.beta_s : first;
    std::vector<SmoothingParams> out;
    for (double lu : grid.u) {
        for (double ls : bs) {
            for (std::size_t k = 0; k < grid.alpha.size(); ++k) {
                out.push_back({grid.alpha[k], ls, grid.beta_t[k], lu});
            }
        }
    }
    return out;
}

auto tie_key(const SmoothingParams& s) {
    return std::make_tuple(s.lambda_u, s.lambda_beta_s, s.lambda_beta_t, s.lambda_alpha);
}

}  // namespace

SelectionResult select_smoothing_cv(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                                    const SelectionOptions& options) {
    const LambdaGrid grid = options.grid.value_or(LambdaGrid::log_spaced());
    grid.validate();
    const int folds = options.folds;
    const auto num_clusters = static_cast<int>(design.num_clusters());
    if (folds < 2) throw ValidationError("cross-validation needs at least 2 folds");
    if (num_clusters < folds) throw ValidationError("fewer clusters than cross-validation folds");
    const double h = options.bandwidth.value_or(default_bandwidth(std::span<const double>(y.data(), y.size())));

    SelectionResult result;
    result.candidates = candidates_for(grid, spec.variant);
    const std::size_t m = result.candidates.size();
    if (m == 1) {
        result.best = result.candidates.front();
        result.scores = {0.0};
        return result;
    }

    // losses[f][c]: summed held-out check loss of candidate c in fold f.
    std::vector<std::vector<double>> losses(static_cast<std::size_t>(folds), std::vector<double>(m, 0.0));
    parallel_for(static_cast<std::size_t>(folds), options.threads, [&](std::size_t f) {
        std::vector<int> train;
        std::vector<Eigen::Index> held_rows;
        for (int i = 0; i < num_clusters; ++i) {
            if (i % folds != static_cast<int>(f)) train.push_back(i);
        }
        for (Eigen::Index r = 0; r < design.rows(); ++r) {
            if (design.cluster_of_row[static_cast<std::size_t>(r)] % folds == static_cast<int>(f)) held_rows.push_back(r);
        }
        const DesignMatrices sub = subset_design(design, train);
        Eigen::VectorXd y_train(sub.rows());
        {
            Eigen::Index k = 0;
            for (Eigen::Index r = 0; r < design.rows(); ++r) {
                if (design.cluster_of_row[static_cast<std::size_t>(r)] % folds != static_cast<int>(f)) y_train[k++] = y[r];
            }
        }
        const Eigen::MatrixXd x_all = design.fixed_design();
        FitOptions fopts = options.fit;
        for (std::size_t c = 0; c < m; ++c) {
            double loss = 0.0;
            try {
                const FitResult fit = penalized_fit(sub, y_train, spec, result.candidates[c], h, fopts);
                fopts.initial = fit.all();
                const Eigen::VectorXd theta = fit.fixed();
                for (Eigen::Index r : held_rows) loss += check_loss(y[r] - x_all.row(r).dot(theta), spec.tau);
            } catch (const NumericalError&) {
                loss = std::numeric_limits<double>::infinity();
                fopts.initial.reset();
            }
            losses[f][c] = loss;
        }
    });

    const double n = static_cast<double>(design.rows());
    result.scores.assign(m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        for (const auto& fold : losses) result.scores[c] += fold[c];
        result.scores[c] /= n;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < m; ++c) {
        const double a = result.scores[c];
        const double b = result.scores[best];
        const double tol = 1e-12 * std::max(std::abs(a), std::abs(b));
        if (a < b - tol || (std::abs(a - b) <= tol && tie_key(result.candidates[c]) > tie_key(result.candidates[best]))) {
            best = c;
        }
    }
    if (!std::isfinite(result.scores[best])) throw NumericalError("every smoothing candidate failed to fit");
    result.best = result.candidates[best];
    result.best_score = result.scores[best];
    return result;
}

SmoothingParams select_smoothing(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                                 const SelectionOptions& options) {
    return select_smoothing_cv(design, y, spec, options).best;
}

std::vector<ComparisonRow> compare_models(const LongitudinalDataset& data, const std::vector<ModelSpec>& specs,
                                          double tau, const SelectionOptions& options) {
    data.validate();
    const Eigen::VectorXd y = data.responses();
    SelectionOptions opts = options;
    if (!opts.bandwidth) opts.bandwidth = default_bandwidth(std::span<const double>(y.data(), y.size()));

    std::vector<ComparisonRow> rows;
    for (ModelSpec spec : specs) {
        ComparisonRow row;
        row.variant = spec.variant;
        try {
            if (spec.tau != tau) throw ValidationError("model specs in a comparison must share tau");
            const DesignMatrices design = assemble_design(data, spec);
            row.smoothing = select_smoothing(design, y, spec, opts);
            const FitResult fit = penalized_fit(design, y, spec, row.smoothing, *opts.bandwidth, opts.fit);
            row.aic = fit.aic;
            row.edf_ab = fit.edf_ab;
            row.edf_u = fit.edf_u;
            row.ok = true;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(row);
    }
    int best = -1;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k].ok && (best < 0 || rows[k].aic < rows[static_cast<std::size_t>(best)].aic)) best = static_cast<int>(k);
    }
    if (best >= 0) rows[static_cast<std::size_t>(best)].min_aic = true;
    return rows;
}

}  // namespace fqr

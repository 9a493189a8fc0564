#pragma once

// Penalized smoothed-quantile fit of the random-intercept functional model.
//
// Minimizes
//   F(a, delta, u) = sum_r rho_h(y_r - eta_r) + lambda_alpha a'P_t a
//                    + delta'(lambda_beta_s P_s + lambda_beta_t P_t) delta + lambda_u |u|^2
// by damped Newton. The random-intercept block of the Hessian is diagonal, so
// each step eliminates u through a Schur complement on the fixed coefficients.

#include "fqr/design.hpp"
#include "fqr/qloss.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace fqr {

struct SmoothingParams {
    double lambda_alpha = 1.0;
    double lambda_beta_s = 1.0;
    double lambda_beta_t = 1.0;
    double lambda_u = 1.0;

    void validate() const;
    bool operator==(const SmoothingParams&) const = default;
};

struct FitOptions {
    int max_iterations = 200;
    double relative_tolerance = 1e-9;
    double gradient_tolerance = 1e-6;
    /// Solve a short sequence of larger bandwidths first when h is small
    /// relative to the initial residual spread.
    bool continuation = true;
    /// Optional starting point [a; delta; u]; disables continuation.
    std::optional<Eigen::VectorXd> initial;
};

struct FitResult {
    ModelSpec spec;
    std::shared_ptr<const ModelBases> bases;
    Eigen::VectorXd a;
    Eigen::VectorXd delta;
    Eigen::VectorXd u;
    SmoothingParams smoothing;
    double bandwidth = 0.0;
    Eigen::MatrixXd Vp;  ///< covariance of [a; delta] conditional on u: h times the inverse profile Hessian of F
    double edf_ab = 0.0;
    double edf_u = 0.0;
    double loglik = 0.0;
    double aic = 0.0;
    double objective = 0.0;
    double gradient_max = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace;  ///< F after each accepted step at the final bandwidth

    Eigen::VectorXd fixed() const;  ///< [a; delta]
    Eigen::VectorXd all() const;    ///< [a; delta; u]
};

/// Block structure of the penalties on [a; delta] for a variant.
struct PenaltyBlocks {
    Eigen::MatrixXd alpha;   ///< L x L
    Eigen::MatrixXd beta_s;  ///< p_beta x p_beta
    Eigen::MatrixXd beta_t;  ///< p_beta x p_beta
};

PenaltyBlocks penalty_blocks(const ModelSpec& spec, const ModelBases& bases);

/// S_f such that the fixed-coefficient penalty equals theta_f' S_f theta_f.
Eigen::MatrixXd fixed_penalty(const PenaltyBlocks& blocks, const SmoothingParams& smoothing);

FitResult penalized_fit(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                        const SmoothingParams& smoothing, double bandwidth, const FitOptions& options = {});

/// F and its gradient at theta = [a; delta; u] (used by tests and diagnostics).
struct ObjectiveEval {
    double value;
    Eigen::VectorXd gradient;
};
ObjectiveEval penalized_objective(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                                  const SmoothingParams& smoothing, double bandwidth, const Eigen::VectorXd& theta);

/// Linear predictor with the random intercepts of the fit.
Eigen::VectorXd fitted_eta(const FitResult& fit, const DesignMatrices& design);

struct LambdaGrid {
    std::vector<double> alpha;   ///< shares its index with beta_t
    std::vector<double> beta_s;
    std::vector<double> beta_t;
    std::vector<double> u;

    /// `points` log-spaced values from 10^lo to 10^hi for every penalty.
    static LambdaGrid log_spaced(double log10_lo = -4.0, double log10_hi = 4.0, int points = 7);
    void validate() const;
};

struct SelectionOptions {
    std::optional<LambdaGrid> grid;  ///< default LambdaGrid::log_spaced()
    int folds = 5;
    std::optional<double> bandwidth;  ///< default_bandwidth(y) when unset
    int threads = 1;
    FitOptions fit{};
};

struct SelectionResult {
    SmoothingParams best;
    double best_score = 0.0;
    std::vector<SmoothingParams> candidates;
    std::vector<double> scores;  ///< mean held-out check loss per candidate
};

/// Cluster-blocked K-fold cross-validation on the raw check loss. Cluster i
/// goes to fold i mod K. Ties go to the larger (lambda_u, lambda_beta_s,
/// lambda_beta_t, lambda_alpha), compared lexicographically.
SelectionResult select_smoothing_cv(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                                    const SelectionOptions& options = {});

SmoothingParams select_smoothing(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                                 const SelectionOptions& options = {});

/// Rows [rows] of a design restricted to the listed clusters (renumbered in order).
DesignMatrices subset_design(const DesignMatrices& design, const std::vector<int>& clusters);

struct ComparisonRow {
    Variant variant = Variant::surface;
    bool ok = false;
    std::string error;
    double aic = 0.0;
    double edf_ab = 0.0;
    double edf_u = 0.0;
    SmoothingParams smoothing;
    bool min_aic = false;
};

/// Fits every spec (each with its own selected smoothing, shared bandwidth)
/// and flags the minimum-AIC row. Failed rows are reported, not thrown.
std::vector<ComparisonRow> compare_models(const LongitudinalDataset& data, const std::vector<ModelSpec>& specs,
                                          double tau, const SelectionOptions& options = {});

}  // namespace fqr

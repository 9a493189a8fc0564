#pragma once

// Prediction targets and their uncertainty: model-based standard errors,
// cluster (block) bootstrap standard deviations, wild-bootstrap bias, and the
// combined interval  estimate - bias +/- z_{1-alpha/2} * sd.

#include "fqr/design.hpp"
#include "fqr/fitter.hpp"
#include "fqr/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace fqr {

enum class TargetKind { linear_predictor, difference };

struct TargetSpec {
    TargetKind kind = TargetKind::linear_predictor;
    Eigen::VectorXd t_points;
    Eigen::VectorXd curve_a;  ///< X for linear_predictor, X_A for difference
    Eigen::VectorXd curve_b;  ///< X_B for difference
};

/// Rows w(t) with target(t) = w(t)' [a; delta] (random intercept set to 0).
Eigen::MatrixXd target_weights(const FitResult& fit, const TargetSpec& target);

/// alpha(t) + integral beta(s, t) X(s) ds with u = 0.
Eigen::VectorXd predict_quantile(const FitResult& fit, const Eigen::VectorXd& curve, const Eigen::VectorXd& t_points);

/// predict(X_A) - predict(X_B).
Eigen::VectorXd quantile_difference(const FitResult& fit, const Eigen::VectorXd& curve_a,
                                    const Eigen::VectorXd& curve_b, const Eigen::VectorXd& t_points);

Eigen::VectorXd evaluate_target(const FitResult& fit, const TargetSpec& target);

/// sqrt(w(t)' Vp w(t)).
Eigen::VectorXd model_based_se(const FitResult& fit, const TargetSpec& target);

struct BootstrapOptions {
    int replicates = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    double max_failure_fraction = 0.2;
    FitOptions fit{};
};

struct ReplicateSet {
    Eigen::MatrixXd targets;  ///< successful replicates x |t|
    std::vector<int> replicate_ids;
    int failed = 0;
    std::vector<std::string> warnings;
};

struct BlockBootstrap {
    Eigen::VectorXd sd;
    ReplicateSet replicates;
};

struct WildBootstrap {
    Eigen::VectorXd bias;
    ReplicateSet replicates;
};

/// Cluster-resampled dataset for replicate b: N clusters drawn with
/// replacement, each copied as an intact block with a fresh id.
LongitudinalDataset block_resample(const LongitudinalDataset& data, std::uint64_t seed, int replicate);

BlockBootstrap block_bootstrap_sd(const LongitudinalDataset& data, const FitResult& fit,
                                  const TargetSpec& target, const BootstrapOptions& options);

/// 2(1 - tau) with probability 1 - tau, -2 tau with probability tau.
double draw_wild_weight(Rng& rng, double tau);

/// Response-only replicate: Y* = eta_fixed + w |residual| + u*, with u* drawn
/// with replacement from the fitted intercepts. Curves and times are untouched.
LongitudinalDataset wild_resample(const LongitudinalDataset& data, const FitResult& fit, std::uint64_t seed,
                                  int replicate);

WildBootstrap wild_bootstrap_bias(const LongitudinalDataset& data, const FitResult& fit, const TargetSpec& target,
                                  const BootstrapOptions& options);

struct ConfidenceBand {
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
};

/// Pointwise (estimate - bias) -/+ z_{1-alpha/2} sd.
ConfidenceBand bootstrap_ci(const Eigen::VectorXd& estimate, const Eigen::VectorXd& bias, const Eigen::VectorXd& sd,
                            double alpha);

struct BootstrapSummary {
    Eigen::VectorXd t_points;
    Eigen::VectorXd estimate;
    Eigen::VectorXd bias;
    Eigen::VectorXd sd;
    Eigen::VectorXd model_se;
    Eigen::VectorXd ci_lo;
    Eigen::VectorXd ci_hi;
    double alpha = 0.05;
    int b_bias = 0;
    int b_sd = 0;
    std::uint64_t seed = 0;
    ReplicateSet bias_replicates;
    ReplicateSet sd_replicates;
};

struct SummaryOptions {
    int b_bias = 100;
    int b_sd = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int threads = 1;
    FitOptions fit{};
};

/// Runs both bootstraps around an existing fit and combines them.
BootstrapSummary bootstrap_summary(const LongitudinalDataset& data, const FitResult& fit, const TargetSpec& target,
                                   const SummaryOptions& options);

/// Elementwise standard deviation over rows (n - 1 denominator).
Eigen::VectorXd column_sd(const Eigen::MatrixXd& replicates);

}  // namespace fqr

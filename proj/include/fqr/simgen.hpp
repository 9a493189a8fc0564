#pragma once

// Synthetic longitudinal functional data with a known tau-quantile surface.
//
// Curves are random combinations of five fixed periodic shapes on S,
//   X(s) = c0 + c1 sin(2 pi x) + c2 cos(2 pi x) + c3 sin(4 pi x) + c4 cos(4 pi x),
// with x = (s - lo) / (hi - lo). Responses follow
//   Y = alpha(t) + int beta(s, t) X(s) ds + u_i + e,
// where e is shifted so that its tau-quantile is exactly 0.

#include "fqr/basis.hpp"
#include "fqr/design.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>

namespace fqr {

enum class ErrorLaw { normal, skewed, heteroskedastic };

std::string to_string(ErrorLaw law);
ErrorLaw error_law_from_string(const std::string& name);

using CurveCoefficients = std::array<double, 5>;

struct SimScenario {
    int num_clusters = 50;
    int n_min = 8;
    int n_max = 8;
    Eigen::VectorXd grid;  ///< defaults to 49 points on [0, 24]
    Interval t_range{0.0, 20.0};
    std::function<double(double)> alpha_true;
    std::function<double(double, double)> beta_true;  ///< (s, t)
    double sigma_u = 0.5;
    ErrorLaw error = ErrorLaw::normal;
    double error_scale = 1.0;
    double skew_shape = 2.0;        ///< gamma shape for skewed errors (smaller = more skew)
    double hetero_slope = 1.0;      ///< scale(t) = 1 + slope * (t - lo) / (hi - lo)
    double noise_sd = 0.0;          ///< measurement noise added to the observed curves
    CurveCoefficients curve_mean{0.0, 0.0, 0.0, 0.0, 0.0};
    CurveCoefficients curve_sd{1.0, 1.0, 0.8, 0.5, 0.4};
    double tau = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Named alpha / beta shapes used by the CLI and the test suites.
std::function<double(double)> alpha_preset(const std::string& name, Interval t_range);
std::function<double(double, double)> beta_preset(const std::string& name, Interval s_range, Interval t_range,
                                                  double amplitude = 0.08);

Eigen::VectorXd default_sim_grid();

/// Evaluates a shape-coefficient curve on a grid over [lo, hi].
Eigen::VectorXd curve_from_coefficients(const CurveCoefficients& c, const Eigen::VectorXd& grid, Interval s_range);

struct SimTruth {
    std::function<double(double)> alpha;
    std::function<double(double, double)> beta;
    Interval s_range;
    Eigen::VectorXd u;                 ///< centred intercepts, one per cluster
    Eigen::MatrixXd curve_coefficients;  ///< n_obs x 5
    Eigen::MatrixXd clean_curves;        ///< X on the grid, before measurement noise
    Eigen::VectorXd quantile;            ///< true tau-quantile per observation (row order)

    /// int beta(s, t) X(s) ds for a shape-coefficient curve (fine quadrature).
    double functional_effect(const CurveCoefficients& c, double t) const;
    /// True D(t) = int beta(s, t) (X_A - X_B)(s) ds.
    Eigen::VectorXd difference(const CurveCoefficients& a, const CurveCoefficients& b,
                               const Eigen::VectorXd& t_points) const;
    /// True alpha(t) + int beta X for u = 0.
    Eigen::VectorXd linear_predictor(const CurveCoefficients& c, const Eigen::VectorXd& t_points) const;
};

struct SimulatedData {
    LongitudinalDataset dataset;  ///< curves are the noisy observations W
    SimTruth truth;
};

SimulatedData generate(const SimScenario& scenario);

/// tau-quantile of the scenario's error law before anchoring (so that
/// error = raw - offset has tau-quantile 0); exposed for tests.
double error_anchor(const SimScenario& scenario);

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double loss = 0.0;
};

/// Exact check-loss line fit. Some optimal line passes through two data points;
/// for each anchor point the best slope is a weighted quantile of the slopes to
/// the other points, so the search is exact in O(n^2 log n).
LineFit oracle_qreg(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double tau);

double check_loss_sum(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double intercept, double slope, double tau);

}  // namespace fqr

#pragma once

// Check (pinball) loss and its logistic smoothing
//   rho_h(v) = tau * v + h * log(1 + exp(-v / h)),
// which is strictly convex, lies above the check loss and is within h*log(2)
// of it everywhere.

#include <span>

namespace fqr {

struct SmoothLossParams {
    double tau = 0.5;
    double bandwidth = 1.0;  ///< h > 0, in response units
};

struct LossDerivatives {
    double value;
    double gradient;
    double curvature;
};

double check_loss(double v, double tau);

/// Throws ValidationError for tau outside (0,1) or h <= 0.
void validate(const SmoothLossParams& params);

double smooth_loss(double v, const SmoothLossParams& params);
double smooth_loss_gradient(double v, const SmoothLossParams& params);
double smooth_loss_curvature(double v, const SmoothLossParams& params);
LossDerivatives smooth_loss_all(double v, const SmoothLossParams& params);

/// Default bandwidth 0.2 * MAD(y) * n^(-1/3); falls back to the mean absolute
/// deviation (then 1) when the MAD is zero.
double default_bandwidth(std::span<const double> y);

double median(std::span<const double> values);

}  // namespace fqr

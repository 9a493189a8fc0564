#include "fqr/qloss.hpp"

#include "fqr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace fqr {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// 1 / (1 + exp(-z)).
double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void require_bandwidth(double h) {
    if (!(h > 0.0)) throw ValidationError("smoothing bandwidth must be positive");
}

}  // namespace

double check_loss(double v, double tau) { return v * (tau - (v < 0.0 ? 1.0 : 0.0)); }

void validate(const SmoothLossParams& params) {
    if (!(params.tau > 0.0 && params.tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    if (!(params.bandwidth > 0.0) || !std::isfinite(params.bandwidth)) {
        throw ValidationError("smoothing bandwidth must be positive");
    }
}

double smooth_loss(double v, const SmoothLossParams& params) {
    require_bandwidth(params.bandwidth);
    return params.tau * v + params.bandwidth * softplus(-v / params.bandwidth);
}

double smooth_loss_gradient(double v, const SmoothLossParams& params) {
    require_bandwidth(params.bandwidth);
    return params.tau - logistic(-v / params.bandwidth);
}

double smooth_loss_curvature(double v, const SmoothLossParams& params) {
    require_bandwidth(params.bandwidth);
    const double z = v / params.bandwidth;
    return logistic(z) * logistic(-z) / params.bandwidth;
}

LossDerivatives smooth_loss_all(double v, const SmoothLossParams& params) {
    require_bandwidth(params.bandwidth);
    const double z = v / params.bandwidth;
    const double p = logistic(z);
    const double q = logistic(-z);
    return {params.tau * v + params.bandwidth * softplus(-z), params.tau - q,
            p * q / params.bandwidth};
}

double median(std::span<const double> values) {
    if (values.empty()) throw ValidationError("median of empty vector");
    std::vector<double> v(values.begin(), values.end());
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
}

double default_bandwidth(std::span<const double> y) {
    if (y.empty()) throw ValidationError("cannot choose a bandwidth for an empty response");
    const double med = median(y);
    std::vector<double> dev(y.size());
    std::transform(y.begin(), y.end(), dev.begin(), [med](double v) { return std::abs(v - med); });
    double scale = median(dev);
    if (!(scale > 0.0)) {
        double sum = 0.0;
        for (double d : dev) sum += d;
        scale = sum / static_cast<double>(dev.size());
    }
    if (!(scale > 0.0)) scale = 1.0;
    return 0.2 * scale * std::pow(static_cast<double>(y.size()), -1.0 / 3.0);
}

}  // namespace fqr

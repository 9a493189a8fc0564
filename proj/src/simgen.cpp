#include "fqr/simgen.hpp"

#include "fqr/errors.hpp"
#include "fqr/qloss.hpp"
#include "fqr/rng.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace fqr {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;
constexpr int fine_points = 1001;

double unit(double v, Interval r) { return (v - r.lo) / r.width(); }

double shape_value(const CurveCoefficients& c, double x) {
    return c[0] + c[1] * std::sin(two_pi * x) + c[2] * std::cos(two_pi * x) + c[3] * std::sin(2.0 * two_pi * x) +
           c[4] * std::cos(2.0 * two_pi * x);
}

// The five shapes at the fine quadrature nodes x_k = k / (fine_points - 1).
const std::array<std::array<double, fine_points>, 5>& fine_shapes() {
    static const auto table = [] {
        std::array<std::array<double, fine_points>, 5> t{};
        for (int k = 0; k < fine_points; ++k) {
            const double x = static_cast<double>(k) / (fine_points - 1);
            for (std::size_t j = 0; j < 5; ++j) {
                CurveCoefficients e{};
                e[j] = 1.0;
                t[j][static_cast<std::size_t>(k)] = shape_value(e, x);
            }
        }
        return t;
    }();
    return table;
}

}  // namespace

std::string to_string(ErrorLaw law) {
    switch (law) {
        case ErrorLaw::normal: return "normal";
        case ErrorLaw::skewed: return "skewed";
        case ErrorLaw::heteroskedastic: return "heteroskedastic";
    }
    return "normal";
}

ErrorLaw error_law_from_string(const std::string& name) {
    if (name == "normal") return ErrorLaw::normal;
    if (name == "skewed") return ErrorLaw::skewed;
    if (name == "heteroskedastic" || name == "hetero") return ErrorLaw::heteroskedastic;
    throw ValidationError("unknown error law '" + name + "'");
}

Eigen::VectorXd default_sim_grid() { return Eigen::VectorXd::LinSpaced(49, 0.0, 24.0); }

void SimScenario::validate() const {
    if (num_clusters < 1) throw ValidationError("simulation needs at least one cluster");
    if (n_min < 1 || n_max < n_min) throw ValidationError("cluster sizes need 1 <= n_min <= n_max");
    if (grid.size() > 0 && grid.size() < 2) throw ValidationError("simulation grid needs at least 2 points");
    if (!(t_range.lo < t_range.hi)) throw ValidationError("time range needs lo < hi");
    if (!alpha_true || !beta_true) throw ValidationError("simulation needs alpha and beta functions");
    if (!(sigma_u >= 0.0) || !(error_scale > 0.0) || !(noise_sd >= 0.0)) {
        throw ValidationError("simulation scales must be non-negative (error scale positive)");
    }
    if (error == ErrorLaw::skewed && !(skew_shape > 0.0)) throw ValidationError("skew shape must be positive");
    if (error == ErrorLaw::heteroskedastic && !(hetero_slope > -1.0)) {
        throw ValidationError("heteroskedastic slope must keep the scale positive");
    }
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    for (double s : curve_sd) {
        if (!(s >= 0.0)) throw ValidationError("curve coefficient sds must be non-negative");
    }
}

std::function<double(double)> alpha_preset(const std::string& name, Interval t_range) {
    if (name == "zero") return [](double) { return 0.0; };
    if (name == "linear") return [t_range](double t) { return 1.0 + unit(t, t_range); };
    if (name == "default" || name == "sine") {
        return [t_range](double t) { return 1.0 + 0.5 * std::sin(std::numbers::pi * unit(t, t_range)); };
    }
    throw ValidationError("unknown alpha preset '" + name + "'");
}

std::function<double(double, double)> beta_preset(const std::string& name, Interval s_range, Interval t_range,
                                                  double amplitude) {
    auto s_shape = [s_range](double s) { return 1.0 + std::cos(two_pi * (unit(s, s_range) - 0.35)); };
    if (name == "zero") return [](double, double) { return 0.0; };
    if (name == "constant") return [amplitude](double, double) { return amplitude; };
    if (name == "s_only") return [=](double s, double) { return amplitude * s_shape(s); };
    if (name == "t_only") return [=](double, double t) { return amplitude * unit(t, t_range); };
    if (name == "surface" || name == "default") {
        return [=](double s, double t) { return amplitude * unit(t, t_range) * s_shape(s); };
    }
    throw ValidationError("unknown beta preset '" + name + "'");
}

Eigen::VectorXd curve_from_coefficients(const CurveCoefficients& c, const Eigen::VectorXd& grid, Interval s_range) {
    Eigen::VectorXd out(grid.size());
    for (Eigen::Index h = 0; h < grid.size(); ++h) out[h] = shape_value(c, unit(grid[h], s_range));
    return out;
}

double SimTruth::functional_effect(const CurveCoefficients& c, double t) const {
    const auto& shapes = fine_shapes();
    const double step = s_range.width() / (fine_points - 1);
    double sum = 0.0;
    for (std::size_t k = 0; k < static_cast<std::size_t>(fine_points); ++k) {
        const double s = s_range.lo + step * static_cast<double>(k);
        const double w = (k == 0 || k + 1 == static_cast<std::size_t>(fine_points)) ? 0.5 : 1.0;
        double x = 0.0;
        for (std::size_t j = 0; j < 5; ++j) x += c[j] * shapes[j][k];
        sum += w * beta(s, t) * x;
    }
    return sum * step;
}

Eigen::VectorXd SimTruth::difference(const CurveCoefficients& a, const CurveCoefficients& b,
                                     const Eigen::VectorXd& t_points) const {
    CurveCoefficients d{};
    for (std::size_t k = 0; k < d.size(); ++k) d[k] = a[k] - b[k];
    Eigen::VectorXd out(t_points.size());
    for (Eigen::Index j = 0; j < t_points.size(); ++j) out[j] = functional_effect(d, t_points[j]);
    return out;
}

Eigen::VectorXd SimTruth::linear_predictor(const CurveCoefficients& c, const Eigen::VectorXd& t_points) const {
    Eigen::VectorXd out(t_points.size());
    for (Eigen::Index j = 0; j < t_points.size(); ++j) out[j] = alpha(t_points[j]) + functional_effect(c, t_points[j]);
    return out;
}

double error_anchor(const SimScenario& sc) {
    if (sc.error == ErrorLaw::skewed) {
        // G ~ Gamma(k, 1/sqrt(k)) has unit variance; the error is q_{1-tau}(G) - G,
        // a left-skewed law whose tau-quantile is 0.
        const boost::math::gamma_distribution<double> g(sc.skew_shape, 1.0 / std::sqrt(sc.skew_shape));
        return boost::math::quantile(g, 1.0 - sc.tau);
    }
    return boost::math::quantile(boost::math::normal_distribution<double>(), sc.tau);
}

SimulatedData generate(const SimScenario& scenario) {
    scenario.validate();
    SimScenario sc = scenario;
    if (sc.grid.size() == 0) sc.grid = default_sim_grid();
    const Interval s_range{sc.grid[0], sc.grid[sc.grid.size() - 1]};
    const double anchor = error_anchor(sc);

    SimulatedData out;
    SimTruth& truth = out.truth;
    truth.alpha = sc.alpha_true;
    truth.beta = sc.beta_true;
    truth.s_range = s_range;

    // Cluster sizes and intercepts come from the global stream; everything
    // else from a per-cluster stream so clusters are independent of each other.
    Rng global(derive_stream(sc.seed, stream::simulation, 0));
    std::uniform_int_distribution<int> size_dist(sc.n_min, sc.n_max);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::vector<int> sizes(static_cast<std::size_t>(sc.num_clusters));
    for (int& n : sizes) n = size_dist(global);
    truth.u.resize(sc.num_clusters);
    for (Eigen::Index i = 0; i < truth.u.size(); ++i) truth.u[i] = sc.sigma_u * std_normal(global);
    if (truth.u.size() > 0) truth.u.array() -= truth.u.mean();

    int total = 0;
    for (int n : sizes) total += n;
    const Eigen::Index H = sc.grid.size();
    auto& data = out.dataset;
    data.grid = sc.grid;
    data.curves.resize(total, H);
    truth.clean_curves.resize(total, H);
    truth.curve_coefficients.resize(total, 5);
    truth.quantile.resize(total);

    std::gamma_distribution<double> gamma_dist(sc.skew_shape, 1.0 / std::sqrt(sc.skew_shape));
    std::uniform_real_distribution<double> t_dist(sc.t_range.lo, sc.t_range.hi);
    int row = 0;
    for (int i = 0; i < sc.num_clusters; ++i) {
        Rng rng(derive_stream(sc.seed, stream::simulation_cluster, static_cast<std::uint64_t>(i)));
        std_normal.reset();
        gamma_dist.reset();
        ClusterRecord cluster;
        cluster.cluster_id = "c" + std::to_string(i + 1);
        for (int j = 0; j < sizes[static_cast<std::size_t>(i)]; ++j, ++row) {
            const double t = t_dist(rng);
            CurveCoefficients c{};
            for (std::size_t k = 0; k < c.size(); ++k) c[k] = sc.curve_mean[k] + sc.curve_sd[k] * std_normal(rng);
            const Eigen::VectorXd x = curve_from_coefficients(c, sc.grid, s_range);
            truth.clean_curves.row(row) = x.transpose();
            for (std::size_t k = 0; k < c.size(); ++k) truth.curve_coefficients(row, static_cast<Eigen::Index>(k)) = c[k];
            for (Eigen::Index h = 0; h < H; ++h) data.curves(row, h) = x[h] + sc.noise_sd * std_normal(rng);

            double e = 0.0;
            switch (sc.error) {
                case ErrorLaw::normal: e = std_normal(rng) - anchor; break;
                case ErrorLaw::skewed: e = anchor - gamma_dist(rng); break;
                case ErrorLaw::heteroskedastic:
                    e = (1.0 + sc.hetero_slope * unit(t, sc.t_range)) * (std_normal(rng) - anchor);
                    break;
            }
            const double q = sc.alpha_true(t) + truth.functional_effect(c, t) + truth.u[i];
            truth.quantile[row] = q;
            cluster.observations.push_back(
                {cluster.cluster_id + "_" + std::to_string(j + 1), q + sc.error_scale * e, t, row});
        }
        data.clusters.push_back(std::move(cluster));
    }
    return out;
}

double check_loss_sum(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double intercept, double slope,
                      double tau) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < y.size(); ++k) sum += check_loss(y[k] - intercept - slope * x[k], tau);
    return sum;
}

LineFit oracle_qreg(const Eigen::VectorXd& y, const Eigen::VectorXd& x, double tau) {
    if (y.size() != x.size()) throw ValidationError("y and x must have the same length");
    if (y.size() < 2) throw ValidationError("line fit needs at least 2 points");
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    if (x.maxCoeff() == x.minCoeff()) throw ValidationError("x has zero variance");

    // The optimum interpolates two data points, so it passes through some
    // anchor i. For a fixed anchor the loss in the slope b is
    //   sum_j |d_j| rho_{tau_j}(s_j - b),  d_j = x_j - x_i, s_j = (y_j - y_i) / d_j,
    // with tau_j = tau for d_j > 0 and 1 - tau otherwise: a weighted quantile
    // problem whose minimizer is one of the pair slopes s_j.
    LineFit best;
    best.loss = std::numeric_limits<double>::infinity();
    const Eigen::Index n = y.size();
    struct Kink {
        double slope;
        double weight;
    };
    std::vector<Kink> kinks;
    kinks.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        kinks.clear();
        double derivative = 0.0;  // d/db of the loss left of every kink
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = x[j] - x[i];
            if (d == 0.0) continue;
            const double w = std::abs(d);
            kinks.push_back({(y[j] - y[i]) / d, w});
            derivative -= w * (d > 0.0 ? tau : 1.0 - tau);
        }
        if (kinks.empty()) continue;
        std::sort(kinks.begin(), kinks.end(), [](const Kink& a, const Kink& b) { return a.slope < b.slope; });
        double slope = kinks.back().slope;
        for (const Kink& k : kinks) {
            derivative += k.weight;
            if (derivative >= 0.0) {
                slope = k.slope;
                break;
            }
        }
        const double intercept = y[i] - slope * x[i];
        const double loss = check_loss_sum(y, x, intercept, slope, tau);
        if (loss < best.loss) best = {intercept, slope, loss};
    }
    return best;
}

}  // namespace fqr

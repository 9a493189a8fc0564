#include "fqr/errors.hpp"
#include "fqr/fitter.hpp"
#include "fqr/simgen.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

using namespace fqr;
using fqr::testing::make_dataset;
using fqr::testing::small_sim;
using fqr::testing::small_spec;

namespace {

const SmoothingParams moderate{1.0, 1.0, 1.0, 1.0};

}  // namespace

TEST_CASE("objective gradient matches central finite differences") {
    const SimulatedData sim = small_sim(3);
    const ModelSpec spec = small_spec();
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const Eigen::VectorXd y = sim.dataset.responses();
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0.0, 0.3);
    Eigen::VectorXd theta(x.num_fixed() + x.num_clusters());
    for (auto& v : theta) v = z(rng);
    const SmoothingParams sp{0.7, 1.3, 0.4, 2.0};
    const ObjectiveEval e = penalized_objective(x, y, spec, sp, 0.3, theta);
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        const double step = 1e-6 * std::max(1.0, std::abs(theta[k]));
        Eigen::VectorXd hi = theta, lo = theta;
        hi[k] += step;
        lo[k] -= step;
        const double fd = (penalized_objective(x, y, spec, sp, 0.3, hi).value -
                           penalized_objective(x, y, spec, sp, 0.3, lo).value) /
                          (2 * step);
        CHECK(std::abs(fd - e.gradient[k]) <= 1e-5 * std::max(1.0, std::abs(e.gradient[k])));
    }
    CHECK_THROWS_AS(penalized_objective(x, y, spec, sp, 0.3, theta.head(3)), ValidationError);
}

TEST_CASE("fit reaches a stationary point with the documented summaries") {
    for (Variant v : {Variant::surface, Variant::s_only, Variant::t_only, Variant::constant}) {
        CAPTURE(to_string(v));
        const SimulatedData sim = small_sim(5);
        const ModelSpec spec = small_spec(v);
        const DesignMatrices x = assemble_design(sim.dataset, spec);
        const Eigen::VectorXd y = sim.dataset.responses();
        const double h = 0.2;
        const FitResult fit = penalized_fit(x, y, spec, moderate, h);
        CHECK(fit.converged);
        CHECK(fit.gradient_max < 1e-6 * (1.0 + std::abs(fit.objective)));
        CHECK(std::abs(fit.u.mean()) < 1e-8);
        for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
            CHECK(fit.objective_trace[k] < fit.objective_trace[k - 1]);
        }

        const ObjectiveEval at = penalized_objective(x, y, spec, moderate, h, fit.all());
        CHECK(at.value == doctest::Approx(fit.objective).epsilon(1e-12));
        CHECK(at.gradient.cwiseAbs().maxCoeff() == doctest::Approx(fit.gradient_max).epsilon(1e-9));

        const Eigen::Index p = x.num_fixed();
        REQUIRE(fit.Vp.rows() == p);
        CHECK((fit.Vp - fit.Vp.transpose()).cwiseAbs().maxCoeff() == 0.0);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.Vp);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-12 * eig.eigenvalues().maxCoeff());

        CHECK(fit.edf_u >= 0.0);
        CHECK(fit.edf_u <= static_cast<double>(x.num_clusters()));
        CHECK(fit.edf_ab >= 0.0);
        CHECK(fit.edf_ab <= static_cast<double>(p));

        double loss = 0.0;
        const Eigen::VectorXd eta = fitted_eta(fit, x);
        for (Eigen::Index r = 0; r < y.size(); ++r) loss += smooth_loss(y[r] - eta[r], {spec.tau, h});
        CHECK(fit.loglik == doctest::Approx(-loss / h).epsilon(1e-10));
        CHECK(fit.aic == doctest::Approx(-2.0 * fit.loglik + 2.0 * (fit.edf_ab + fit.edf_u)).epsilon(1e-12));
    }
}

TEST_CASE("EDF against an explicit dense trace") {
    const SimulatedData sim = small_sim(8, 6, 4);
    const ModelSpec spec = small_spec(Variant::s_only);
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const Eigen::VectorXd y = sim.dataset.responses();
    const double h = 0.3;
    const SmoothingParams sp{2.0, 0.5, 0.0, 1.5};
    const FitResult fit = penalized_fit(x, y, spec, sp, h);

    // Full Hessian of F at the optimum, with and without penalties.
    Eigen::MatrixXd full(y.size(), x.num_fixed() + x.num_clusters());
    full << x.A, x.B, x.Z;
    const Eigen::VectorXd eta = fitted_eta(fit, x);
    Eigen::VectorXd w(y.size());
    for (Eigen::Index r = 0; r < y.size(); ++r) w[r] = smooth_loss_curvature(y[r] - eta[r], {spec.tau, h});
    const Eigen::MatrixXd unpen = full.transpose() * w.asDiagonal() * full;
    Eigen::MatrixXd pen = unpen;
    const Eigen::Index p = x.num_fixed();
    pen.topLeftCorner(p, p) += 2.0 * fixed_penalty(penalty_blocks(spec, *x.bases), sp);
    pen.bottomRightCorner(x.num_clusters(), x.num_clusters()).diagonal().array() += 2.0 * sp.lambda_u;
    const Eigen::MatrixXd prod = pen.ldlt().solve(unpen);
    CHECK(fit.edf_ab == doctest::Approx(prod.topLeftCorner(p, p).trace()).epsilon(1e-8));
    CHECK(fit.edf_u == doctest::Approx(prod.bottomRightCorner(x.num_clusters(), x.num_clusters()).trace()).epsilon(1e-8));
    const Eigen::MatrixXd vfull = pen.ldlt().solve(Eigen::MatrixXd::Identity(pen.rows(), pen.cols()));
    CHECK((fit.Vp - h * vfull.topLeftCorner(p, p)).cwiseAbs().maxCoeff() < 1e-8 * fit.Vp.cwiseAbs().maxCoeff());
}

TEST_CASE("matches an exact check-loss line fit in the scalar limit") {
    for (double tau : {0.5, 0.1}) {
        CAPTURE(tau);
        std::mt19937_64 rng(tau == 0.5 ? 101 : 202);
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const int n = 500;
        Eigen::VectorXd xs(n), ys(n), ts(n);
        for (int r = 0; r < n; ++r) {
            xs[r] = 2.0 * unif(rng) - 1.0;
            ts[r] = unif(rng);
            ys[r] = 1.0 + 2.0 * xs[r] + (1.0 + 0.5 * xs[r]) * z(rng);
        }
        const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(11, 0.0, 1.0);
        std::vector<int> sizes(100, 5);
        const auto data = make_dataset(sizes, grid, [&](int r, double) { return xs[r]; },
                                       [&](int r) { return ts[r]; }, [&](int r) { return ys[r]; });
        ModelSpec spec;
        spec.tau = tau;
        spec.variant = Variant::constant;
        spec.num_t = 5;
        spec.penalty_order = 1;
        spec.t_domain = Interval{0.0, 1.0};
        const DesignMatrices x = assemble_design(data, spec);
        const FitResult fit = penalized_fit(x, data.responses(), spec, {1e12, 0.0, 0.0, 1e12}, 1e-3);
        CHECK(fit.converged);
        const LineFit oracle = oracle_qreg(ys, xs, tau);
        CHECK(std::abs(fit.a.mean() - oracle.intercept) < 1e-2);
        CHECK(std::abs(fit.delta[0] - oracle.slope) < 1e-2);
        CHECK(fit.u.norm() < 1e-6);
    }
}

TEST_CASE("very large penalties push coefficients into the null spaces") {
    const SimulatedData sim = small_sim(9);
    const ModelSpec spec = small_spec();
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const FitResult fit = penalized_fit(x, sim.dataset.responses(), spec, {1e12, 1e12, 1e12, 1e12}, 0.2);
    const PenaltyBlocks blocks = penalty_blocks(spec, *x.bases);
    CHECK(fit.delta.dot(blocks.beta_s * fit.delta) + fit.delta.dot(blocks.beta_t * fit.delta) < 1e-6);
    CHECK(fit.u.norm() < 1e-4);
}

TEST_CASE("duplicating every cluster with doubled penalties leaves the surfaces unchanged") {
    const SimulatedData sim = small_sim(13);
    LongitudinalDataset twice = sim.dataset;
    const Eigen::Index rows = twice.curves.rows();
    twice.curves.conservativeResize(2 * rows, Eigen::NoChange);
    twice.curves.bottomRows(rows) = sim.dataset.curves;
    for (const auto& c : sim.dataset.clusters) {
        ClusterRecord copy = c;
        copy.cluster_id += "_copy";
        for (auto& o : copy.observations) o.curve_row += rows;
        twice.clusters.push_back(copy);
    }
    const ModelSpec spec = small_spec();
    const SmoothingParams sp{0.5, 2.0, 1.0, 1.0};
    // Each copy keeps its own intercept, so lambda_u stays as it is.
    const SmoothingParams doubled{1.0, 4.0, 2.0, 1.0};
    const DesignMatrices x1 = assemble_design(sim.dataset, spec);
    const DesignMatrices x2 = assemble_design(twice, spec);
    const FitResult f1 = penalized_fit(x1, sim.dataset.responses(), spec, sp, 0.2);
    const FitResult f2 = penalized_fit(x2, twice.responses(), spec, doubled, 0.2);
    CHECK((f1.a - f2.a).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((f1.delta - f2.delta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((f1.u - f2.u.head(f1.u.size())).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("intercept EDF decreases along a lambda_u ladder") {
    const SimulatedData sim = small_sim(17);
    const ModelSpec spec = small_spec();
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const Eigen::VectorXd y = sim.dataset.responses();
    double previous = std::numeric_limits<double>::infinity();
    for (double lu : {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3}) {
        const FitResult fit = penalized_fit(x, y, spec, {1.0, 1.0, 1.0, lu}, 0.2);
        CHECK(fit.edf_u < previous);
        previous = fit.edf_u;
    }
}

TEST_CASE("fitted quantiles do not depend on cluster order or labels") {
    const SimulatedData sim = small_sim(21);
    LongitudinalDataset shuffled = sim.dataset;
    std::vector<std::size_t> perm(shuffled.clusters.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(4);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.clusters[i] = sim.dataset.clusters[perm[i]];
        shuffled.clusters[i].cluster_id = "relabelled" + std::to_string(i);
        std::reverse(shuffled.clusters[i].observations.begin(), shuffled.clusters[i].observations.end());
    }
    const ModelSpec spec = small_spec();
    const DesignMatrices x1 = assemble_design(sim.dataset, spec);
    const DesignMatrices x2 = assemble_design(shuffled, spec);
    const FitResult f1 = penalized_fit(x1, sim.dataset.responses(), spec, moderate, 0.2);
    const FitResult f2 = penalized_fit(x2, shuffled.responses(), spec, moderate, 0.2);
    CHECK(f1.a == f2.a);
    CHECK(f1.delta == f2.delta);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(f2.u[static_cast<Eigen::Index>(i)] == f1.u[static_cast<Eigen::Index>(perm[i])]);
    }
    // Row-level check through the observation ids.
    const Eigen::VectorXd e1 = fitted_eta(f1, x1);
    const Eigen::VectorXd e2 = fitted_eta(f2, x2);
    std::map<std::string, double> by_id;
    Eigen::Index r = 0;
    for (const auto& c : sim.dataset.clusters) {
        for (const auto& o : c.observations) by_id[o.obs_id] = e1[r++];
    }
    r = 0;
    for (const auto& c : shuffled.clusters) {
        for (const auto& o : c.observations) CHECK(e2[r++] == by_id.at(o.obs_id));
    }
}

TEST_CASE("warm starts are accepted in the caller's cluster order") {
    const SimulatedData sim = small_sim(23);
    const ModelSpec spec = small_spec();
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const Eigen::VectorXd y = sim.dataset.responses();
    const FitResult cold = penalized_fit(x, y, spec, moderate, 0.2);
    FitOptions opts;
    opts.initial = cold.all();
    const FitResult warm = penalized_fit(x, y, spec, moderate, 0.2, opts);
    CHECK(warm.converged);
    CHECK((warm.all() - cold.all()).cwiseAbs().maxCoeff() < 1e-6);
    opts.initial = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(penalized_fit(x, y, spec, moderate, 0.2, opts), ValidationError);
}

TEST_CASE("fit errors") {
    const SimulatedData sim = small_sim(29);
    const ModelSpec spec = small_spec();
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const Eigen::VectorXd y = sim.dataset.responses();
    CHECK_THROWS_AS(penalized_fit(x, y, spec, moderate, 0.0), ValidationError);
    CHECK_THROWS_AS(penalized_fit(x, y, spec, {-1.0, 1.0, 1.0, 1.0}, 0.2), ValidationError);
    CHECK_THROWS_AS(penalized_fit(x, y.head(4), spec, moderate, 0.2), ValidationError);

    // Identical curves make the beta block collinear with the alpha block.
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    std::vector<int> sizes(6, 4);
    const auto flat = make_dataset(sizes, grid, [](int, double s) { return 1.0 + s; },
                                   [](int r) { return 0.1 * r; }, [](int r) { return std::sin(1.0 * r); });
    ModelSpec s2 = small_spec(Variant::t_only);
    s2.t_domain.reset();
    const DesignMatrices xf = assemble_design(flat, s2);
    CHECK_THROWS_AS(penalized_fit(xf, flat.responses(), s2, {0.0, 0.0, 0.0, 0.0}, 0.2), NumericalError);
}

TEST_CASE("smoothing selection basics") {
    const SimulatedData sim = small_sim(31, 10, 4);
    const ModelSpec spec = small_spec();
    const DesignMatrices x = assemble_design(sim.dataset, spec);
    const Eigen::VectorXd y = sim.dataset.responses();

    SelectionOptions one;
    one.grid = LambdaGrid{{0.3}, {7.0}, {0.3}, {2.0}};
    one.folds = 3;
    one.bandwidth = 0.2;
    const SmoothingParams picked = select_smoothing(x, y, spec, one);
    CHECK(picked == SmoothingParams{0.3, 7.0, 0.3, 2.0});

    SelectionOptions two = one;
    two.grid = LambdaGrid::log_spaced(-1.0, 1.0, 2);
    const SelectionResult r = select_smoothing_cv(x, y, spec, two);
    // alpha and beta_t share an index: 2 x 2 x 2 candidates.
    CHECK(r.candidates.size() == 8);
    CHECK(r.scores.size() == 8);
    CHECK(r.best_score == *std::min_element(r.scores.begin(), r.scores.end()));

    SelectionOptions many = one;
    many.folds = 11;
    CHECK_THROWS_AS(select_smoothing(x, y, spec, many), ValidationError);
    many.folds = 1;
    CHECK_THROWS_AS(select_smoothing(x, y, spec, many), ValidationError);
}

TEST_CASE("cross-validation ties go to the smoother candidate") {
    // Constant responses: every candidate predicts them perfectly.
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    std::vector<int> sizes(6, 3);
    const auto data = make_dataset(sizes, grid, [](int r, double s) { return std::cos(r + s); },
                                   [](int r) { return 0.05 * r; }, [](int) { return 2.0; });
    ModelSpec spec = small_spec(Variant::constant);
    spec.t_domain.reset();
    const DesignMatrices x = assemble_design(data, spec);
    SelectionOptions opts;
    opts.grid = LambdaGrid{{1.0, 10.0}, {1.0}, {1.0, 10.0}, {1.0, 10.0}};
    opts.folds = 3;
    opts.bandwidth = 1e-6;
    const SelectionResult r = select_smoothing_cv(x, data.responses(), spec, opts);
    const double best = r.best_score;
    int ties = 0;
    for (double s : r.scores) ties += s <= best + 1e-9;
    REQUIRE(ties > 1);
    CHECK(r.best.lambda_u == 10.0);
}

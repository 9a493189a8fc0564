#include "fqr/errors.hpp"
#include "fqr/qloss.hpp"
#include "fqr/simgen.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace fqr;

namespace {

SimScenario scenario(ErrorLaw law, double tau, int clusters, int n) {
    SimScenario sc;
    sc.num_clusters = clusters;
    sc.n_min = n;
    sc.n_max = n;
    sc.alpha_true = alpha_preset("default", sc.t_range);
    sc.beta_true = beta_preset("surface", {0.0, 24.0}, sc.t_range);
    sc.error = law;
    sc.tau = tau;
    sc.seed = 12345;
    return sc;
}

double fraction_below(const SimulatedData& d) {
    const Eigen::VectorXd y = d.dataset.responses();
    return (y.array() < d.truth.quantile.array()).cast<double>().mean();
}

}  // namespace

TEST_CASE("errors are anchored at the requested quantile") {
    SimScenario sc = scenario(ErrorLaw::normal, 0.5, 1000, 100);
    sc.sigma_u = 0.0;
    CHECK(std::abs(fraction_below(generate(sc)) - 0.5) < 0.01);

    for (ErrorLaw law : {ErrorLaw::normal, ErrorLaw::skewed, ErrorLaw::heteroskedastic}) {
        for (double tau : {0.1, 0.5, 0.9}) {
            CAPTURE(to_string(law));
            CAPTURE(tau);
            SimScenario s = scenario(law, tau, 400, 50);
            s.noise_sd = 0.3;
            const double n = 20000.0;
            const double se = std::sqrt(tau * (1 - tau) / n);
            CHECK(std::abs(fraction_below(generate(s)) - tau) < 3.0 * se);
        }
    }
}

TEST_CASE("truth record is consistent with the responses' construction") {
    SimScenario sc = scenario(ErrorLaw::skewed, 0.1, 6, 4);
    sc.noise_sd = 0.2;
    const SimulatedData d = generate(sc);
    CHECK(std::abs(d.truth.u.mean()) < 1e-12);
    REQUIRE(d.truth.curve_coefficients.rows() == 24);
    Eigen::Index r = 0;
    for (std::size_t i = 0; i < d.dataset.clusters.size(); ++i) {
        for (const auto& o : d.dataset.clusters[i].observations) {
            CurveCoefficients c;
            for (int k = 0; k < 5; ++k) c[static_cast<std::size_t>(k)] = d.truth.curve_coefficients(r, k);
            const double expected = d.truth.linear_predictor(c, Eigen::VectorXd::Constant(1, o.t))[0] +
                                    d.truth.u[static_cast<Eigen::Index>(i)];
            CHECK(d.truth.quantile[r] == doctest::Approx(expected).epsilon(1e-12));
            const Eigen::VectorXd clean = curve_from_coefficients(c, d.dataset.grid, {0.0, 24.0});
            CHECK((d.truth.clean_curves.row(o.curve_row).transpose() - clean).cwiseAbs().maxCoeff() < 1e-12);
            CHECK(o.t >= sc.t_range.lo);
            CHECK(o.t <= sc.t_range.hi);
            ++r;
        }
    }
    // Measurement noise is present on the observed curves.
    const double noise = (d.dataset.curves - d.truth.clean_curves).array().square().mean();
    CHECK(std::sqrt(noise) == doctest::Approx(0.2).epsilon(0.1));
    CHECK(d.dataset.clusters[0].cluster_id == "c1");
    CHECK(d.dataset.clusters[0].observations[1].obs_id == "c1_2");
}

TEST_CASE("true differences") {
    SimScenario sc = scenario(ErrorLaw::normal, 0.5, 3, 2);
    const CurveCoefficients a{1.0, 0.5, 0.5, 0.0, 0.0};
    const CurveCoefficients b{-1.0, -0.5, -0.5, 0.0, 0.0};
    const Eigen::VectorXd t = Eigen::VectorXd::LinSpaced(5, 0.0, 20.0);

    sc.beta_true = beta_preset("zero", {0.0, 24.0}, sc.t_range);
    CHECK(generate(sc).truth.difference(a, b, t).cwiseAbs().maxCoeff() == 0.0);

    // Constant beta: D = amp * integral of (X_A - X_B) = amp * 2 * 24 (periodic terms integrate to 0).
    sc.beta_true = beta_preset("constant", {0.0, 24.0}, sc.t_range, 0.08);
    const Eigen::VectorXd d = generate(sc).truth.difference(a, b, t);
    CHECK((d.array() - 0.08 * 48.0).abs().maxCoeff() < 1e-10);

    // Surface preset: amp * x_t * int (1 + cos(2 pi (x - .35))) (2 + sin 2 pi x + cos 2 pi x) ds
    //   = amp * x_t * 24 * (2 + 0.5 (cos(2 pi .35) + sin(2 pi .35))).
    sc.beta_true = beta_preset("surface", {0.0, 24.0}, sc.t_range, 0.08);
    const Eigen::VectorXd ds = generate(sc).truth.difference(a, b, t);
    const double two_pi = 2.0 * 3.14159265358979323846;
    const double k = 0.08 * 24.0 * (2.0 + 0.5 * (std::cos(two_pi * 0.35) + std::sin(two_pi * 0.35)));
    for (Eigen::Index j = 0; j < t.size(); ++j) CHECK(ds[j] == doctest::Approx(k * t[j] / 20.0).epsilon(1e-6));
}

TEST_CASE("generation is deterministic") {
    SimScenario sc = scenario(ErrorLaw::heteroskedastic, 0.3, 10, 3);
    sc.n_max = 7;
    sc.noise_sd = 0.1;
    const SimulatedData a = generate(sc);
    const SimulatedData b = generate(sc);
    CHECK(a.dataset.responses() == b.dataset.responses());
    CHECK(a.dataset.curves == b.dataset.curves);
    CHECK(a.truth.u == b.truth.u);
    bool varied = false;
    for (const auto& c : a.dataset.clusters) {
        CHECK(c.observations.size() >= 3);
        CHECK(c.observations.size() <= 7);
        varied |= c.observations.size() != a.dataset.clusters[0].observations.size();
    }
    CHECK(varied);
    sc.seed += 1;
    CHECK(generate(sc).dataset.responses() != a.dataset.responses());
}

TEST_CASE("scenario validation and presets") {
    SimScenario sc = scenario(ErrorLaw::normal, 0.5, 3, 2);
    sc.sigma_u = -1.0;
    CHECK_THROWS_AS(generate(sc), ValidationError);
    sc = scenario(ErrorLaw::normal, 0.5, 3, 2);
    sc.n_max = 1;
    CHECK_THROWS_AS(generate(sc), ValidationError);
    sc = scenario(ErrorLaw::normal, 0.5, 3, 2);
    sc.alpha_true = nullptr;
    CHECK_THROWS_AS(generate(sc), ValidationError);
    CHECK_THROWS_AS(alpha_preset("bumpy", {0, 1}), ValidationError);
    CHECK_THROWS_AS(beta_preset("bumpy", {0, 1}, {0, 1}), ValidationError);
    CHECK(error_law_from_string("hetero") == ErrorLaw::heteroskedastic);
    CHECK_THROWS_AS(error_law_from_string("cauchy"), ValidationError);
    const auto alpha = alpha_preset("default", {0.0, 20.0});
    CHECK(alpha(10.0) == doctest::Approx(1.5));
}

TEST_CASE("exact line fit by pair enumeration") {
    Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(15, -2.0, 3.0);
    Eigen::VectorXd y = (3.0 + 2.0 * x.array()).matrix();
    for (double tau : {0.1, 0.5, 0.9}) {
        const LineFit f = oracle_qreg(y, x, tau);
        CHECK(f.intercept == doctest::Approx(3.0).epsilon(1e-12));
        CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(f.loss == doctest::Approx(0.0));
    }

    const Eigen::VectorXd x2 = (Eigen::VectorXd(2) << 1.0, 3.0).finished();
    const Eigen::VectorXd y2 = (Eigen::VectorXd(2) << 2.0, -2.0).finished();
    const LineFit two = oracle_qreg(y2, x2, 0.3);
    CHECK(two.slope == doctest::Approx(-2.0));
    CHECK(two.intercept == doctest::Approx(4.0));
    CHECK(two.loss == 0.0);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    const int n = 2000;
    Eigen::VectorXd xs(n), ys(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = z(rng);
        ys[i] = 1.0 + xs[i] + z(rng);
    }
    const LineFit big = oracle_qreg(ys, xs, 0.5);
    CHECK(std::abs(big.slope - 1.0) < 0.1);

    // No line through a data pair does better.
    const int m = 60;
    const Eigen::VectorXd xm = xs.head(m), ym = ys.head(m);
    const LineFit small = oracle_qreg(ym, xm, 0.25);
    CHECK(small.loss == doctest::Approx(check_loss_sum(ym, xm, small.intercept, small.slope, 0.25)));
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            if (xm[i] == xm[j]) continue;
            const double slope = (ym[j] - ym[i]) / (xm[j] - xm[i]);
            best = std::min(best, check_loss_sum(ym, xm, ym[i] - slope * xm[i], slope, 0.25));
        }
    }
    CHECK(small.loss <= best + 1e-12);

    CHECK_THROWS_AS(oracle_qreg(ym, Eigen::VectorXd::Constant(m, 2.0), 0.5), ValidationError);
    CHECK_THROWS_AS(oracle_qreg(ym.head(1), xm.head(1), 0.5), ValidationError);
    CHECK_THROWS_AS(oracle_qreg(ym, xm.head(5), 0.5), ValidationError);
}

TEST_CASE("error anchor") {
    SimScenario sc = scenario(ErrorLaw::normal, 0.1, 3, 2);
    CHECK(error_anchor(sc) == doctest::Approx(-1.2815515655).epsilon(1e-9));
    sc.tau = 0.5;
    CHECK(error_anchor(sc) == doctest::Approx(0.0).scale(1.0));
}

#include "fqr/errors.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace fqr;
using fqr::testing::make_dataset;

TEST_CASE("functional scores by trapezoid quadrature") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(21, 0.0, 1.0);
    const Basis constant = make_basis({BasisKind::constant, 1, {0.0, 1.0}});
    const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(2, 21, 3.25);
    const Eigen::MatrixXd xi = functional_scores(c, grid, constant);
    CHECK(xi.rows() == 2);
    CHECK(xi.cols() == 1);
    CHECK(std::abs(xi(0, 0) - 3.25) < 1e-12);

    const Basis cubic = make_basis({BasisKind::cubic_bspline, 10, {0.0, 1.0}});
    const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, 21);
    CHECK(std::abs(functional_scores(ones, grid, cubic).sum() - 1.0) < 1e-8);
    const Basis cyclic = make_basis({BasisKind::cyclic_cubic, 8, {0.0, 1.0}});
    CHECK(std::abs(functional_scores(ones, grid, cyclic).sum() - 1.0) < 1e-8);

    const Eigen::VectorXd fine = Eigen::VectorXd::LinSpaced(101, 0.0, 1.0);
    const Eigen::MatrixXd linear = fine.transpose();
    CHECK(std::abs(functional_scores(linear, fine, constant)(0, 0) - 0.5) < 1e-4);

    // Against an explicit weighted sum.
    const Eigen::MatrixXd phi = cubic.evaluate(grid);
    Eigen::MatrixXd curves(1, 21);
    for (int k = 0; k < 21; ++k) curves(0, k) = std::sin(3.0 * grid[k]) + grid[k];
    const Eigen::MatrixXd got = functional_scores(curves, grid, cubic);
    for (int d = 0; d < 10; ++d) {
        double sum = 0.0;
        for (int k = 0; k + 1 < 21; ++k) {
            const double dx = grid[k + 1] - grid[k];
            sum += 0.5 * dx * (phi(k, d) * curves(0, k) + phi(k + 1, d) * curves(0, k + 1));
        }
        CHECK(got(0, d) == doctest::Approx(sum).epsilon(1e-13));
    }
}

TEST_CASE("functional scores reject a grid outside the basis domain") {
    const Basis cubic = make_basis({BasisKind::cubic_bspline, 6, {0.0, 1.0}});
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(5, 0.0, 1.5);
    CHECK_THROWS_AS(functional_scores(Eigen::MatrixXd::Ones(1, 5), grid, cubic), ValidationError);
    CHECK_THROWS_AS(functional_scores(Eigen::MatrixXd::Ones(1, 4), Eigen::VectorXd::LinSpaced(5, 0.0, 1.0), cubic),
                    ValidationError);
}

TEST_CASE("surface design row matches an explicit double loop") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(25, 0.0, 24.0);
    const auto data = make_dataset({1}, grid, [](int, double s) { return 1.0 + std::cos(s / 4.0); },
                                   [](int) { return 3.7; }, [](int) { return 1.0; });
    ModelSpec spec;
    spec.variant = Variant::surface;
    spec.num_t = 4;
    spec.num_s = 4;
    spec.basis_s_kind = BasisKind::cubic_bspline;
    spec.penalty_order = 1;
    spec.t_domain = Interval{0.0, 10.0};
    const DesignMatrices x = assemble_design(data, spec);
    REQUIRE(x.B.cols() == 16);
    const Basis bt = make_basis({BasisKind::cubic_bspline, 4, {0.0, 10.0}});
    const Basis bs = make_basis({BasisKind::cubic_bspline, 4, {0.0, 24.0}});
    const Eigen::VectorXd psi = bt.evaluate(3.7);
    const Eigen::MatrixXd xi = functional_scores(data.curves, grid, bs);
    for (int d = 0; d < 4; ++d) {
        for (int l = 0; l < 4; ++l) CHECK(x.B(0, d * 4 + l) == doctest::Approx(psi[l] * xi(0, d)).epsilon(1e-14));
    }
    CHECK((x.A.row(0).transpose() - psi).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(x.fixed_design().cols() == 20);
    CHECK(x.num_fixed() == 20);

    // Cubic bases need at least four functions, so L=4, D=3 is checked on the row map.
    const Eigen::RowVectorXd xi3 = xi.row(0).head(3);
    const Eigen::RowVectorXd row = beta_row(Variant::surface, psi.transpose(), xi3);
    REQUIRE(row.size() == 12);
    for (int d = 0; d < 3; ++d) {
        for (int l = 0; l < 4; ++l) CHECK(row[d * 4 + l] == psi[l] * xi3[d]);
    }
}

TEST_CASE("variant blocks") {
    const Eigen::RowVectorXd psi = (Eigen::RowVectorXd(3) << 0.2, 0.5, 0.3).finished();
    const Eigen::RowVectorXd xi = (Eigen::RowVectorXd(2) << 4.0, -1.0).finished();
    const Eigen::RowVectorXd surf = beta_row(Variant::surface, psi, xi);
    CHECK(surf.size() == 6);
    CHECK(surf[tensor_index(1, 2, 3)] == doctest::Approx(-0.3));
    CHECK(beta_row(Variant::s_only, psi, xi) == xi);
    const Eigen::RowVectorXd scalar = (Eigen::RowVectorXd(1) << 48.0).finished();
    CHECK(beta_row(Variant::t_only, psi, scalar).isApprox(psi * 48.0));
    CHECK(beta_row(Variant::constant, psi, scalar)[0] == 48.0);
}

TEST_CASE("constant variant uses the curve integral") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(49, 0.0, 24.0);
    const auto data = make_dataset({2, 2}, grid, [](int, double) { return 2.0; },
                                   [](int r) { return static_cast<double>(r); }, [](int) { return 0.0; });
    ModelSpec spec;
    spec.variant = Variant::constant;
    spec.num_t = 5;
    const DesignMatrices x = assemble_design(data, spec);
    REQUIRE(x.B.cols() == 1);
    for (Eigen::Index r = 0; r < x.rows(); ++r) CHECK(std::abs(x.B(r, 0) - 48.0) < 1e-8);

    spec.variant = Variant::t_only;
    const DesignMatrices xt = assemble_design(data, spec);
    REQUIRE(xt.B.cols() == 5);
    CHECK((xt.B - 48.0 * xt.A).cwiseAbs().maxCoeff() < 1e-8);

    spec.variant = Variant::s_only;
    spec.num_s = 6;
    const DesignMatrices xs = assemble_design(data, spec);
    CHECK(xs.B.cols() == 6);
    CHECK(xs.B == xs.Xi);
}

TEST_CASE("random-intercept indicators") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    const auto data = make_dataset({2, 1, 2}, grid, [](int r, double s) { return r * s; },
                                   [](int r) { return 0.5 * r; }, [](int r) { return 1.0 * r; });
    ModelSpec spec;
    spec.num_t = 5;
    spec.num_s = 5;
    const DesignMatrices x = assemble_design(data, spec);
    REQUIRE(x.Z.rows() == 5);
    REQUIRE(x.Z.cols() == 3);
    CHECK((x.Z.rowwise().sum().array() == 1.0).all());
    CHECK(x.Z.colwise().sum() == (Eigen::RowVectorXd(3) << 2, 1, 2).finished());
    CHECK(x.cluster_of_row == std::vector<int>{0, 0, 1, 2, 2});
    CHECK(x.row_index[3] == std::pair<int, int>{2, 0});
    CHECK(data.responses() == (Eigen::VectorXd(5) << 0, 1, 2, 3, 4).finished());
    CHECK(data.time_range() == Interval{0.0, 2.0});
    // Default t-domain is the observed range.
    CHECK(x.bases->t.domain() == Interval{0.0, 2.0});
    CHECK(x.bases->s.domain() == Interval{0.0, 1.0});
}

TEST_CASE("assembly is deterministic") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(30, 0.0, 24.0);
    const auto data = make_dataset({3, 4, 2}, grid, [](int r, double s) { return std::sin(s + r); },
                                   [](int r) { return 0.7 * r; }, [](int r) { return 0.1 * r; });
    ModelSpec spec;
    const DesignMatrices x1 = assemble_design(data, spec);
    const DesignMatrices x2 = assemble_design(data, spec);
    CHECK(x1.A == x2.A);
    CHECK(x1.B == x2.B);
    CHECK(x1.Xi == x2.Xi);
    CHECK(x1.Z == x2.Z);
}

TEST_CASE("dataset and spec validation") {
    const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(10, 0.0, 1.0);
    auto data = make_dataset({2, 1}, grid, [](int, double s) { return s; }, [](int r) { return 1.0 * r; },
                             [](int) { return 0.0; });
    CHECK_NOTHROW(data.validate());
    auto shared = data;
    shared.clusters[1].observations[0].curve_row = 0;
    CHECK_THROWS_AS(shared.validate(), ValidationError);
    auto bad_row = data;
    bad_row.clusters[1].observations[0].curve_row = 7;
    CHECK_THROWS_AS(bad_row.validate(), ValidationError);
    auto empty = data;
    empty.clusters[0].observations.clear();
    CHECK_THROWS_AS(empty.validate(), ValidationError);
    auto missing = data;
    missing.curves(0, 0) = std::nan("");
    CHECK_THROWS_AS(missing.validate(), ValidationError);
    auto nonfinite = data;
    nonfinite.clusters[0].observations[0].y = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(nonfinite.validate(), ValidationError);

    ModelSpec spec;
    spec.tau = 1.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = {};
    spec.penalty_order = 10;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    CHECK(variant_from_string("t_only") == Variant::t_only);
    CHECK(to_string(Variant::s_only) == "s_only");
    CHECK_THROWS_AS(variant_from_string("wiggly"), ValidationError);
}

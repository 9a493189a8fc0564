#include "fqr/basis.hpp"

#include "fqr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fqr {

std::string to_string(BasisKind kind) {
    switch (kind) {
        case BasisKind::cubic_bspline: return "cubic_bspline";
        case BasisKind::cyclic_cubic: return "cyclic_cubic";
        case BasisKind::constant: return "constant";
    }
    return "unknown";
}

BasisKind basis_kind_from_string(const std::string& name) {
    if (name == "cubic_bspline" || name == "cr" || name == "bs") return BasisKind::cubic_bspline;
    if (name == "cyclic_cubic" || name == "cc") return BasisKind::cyclic_cubic;
    if (name == "constant") return BasisKind::constant;
    throw ValidationError("unknown basis kind '" + name + "'");
}

Basis::Basis(const SplineBasisSpec& spec) : spec_(spec) {
    const auto& dom = spec_.domain;
    if (!(std::isfinite(dom.lo) && std::isfinite(dom.hi)) || dom.lo >= dom.hi) {
        std::ostringstream msg;
        msg << "degenerate basis domain [" << dom.lo << ", " << dom.hi << "]";
        throw ValidationError(msg.str());
    }
    const int k = spec_.num_basis;
    switch (spec_.kind) {
        case BasisKind::constant:
            if (k != 1) throw ValidationError("constant basis must have num_basis = 1");
            knots_ = {dom.lo, dom.hi};
            break;
        case BasisKind::cubic_bspline: {
            if (k < 4) throw ValidationError("cubic B-spline basis needs num_basis >= 4");
            const int intervals = k - 3;
            const double step = dom.width() / intervals;
            knots_.assign(3, dom.lo);
            for (int i = 0; i <= intervals; ++i) {
                knots_.push_back(i == intervals ? dom.hi : dom.lo + i * step);
            }
            knots_.insert(knots_.end(), 3, dom.hi);
            break;
        }
        case BasisKind::cyclic_cubic: {
            if (k < 4) throw ValidationError("cyclic cubic basis needs num_basis >= 4");
            const double step = dom.width() / k;
            for (int i = 0; i <= k; ++i) knots_.push_back(i == k ? dom.hi : dom.lo + i * step);
            break;
        }
    }
}

void Basis::eval_into(double x, double* out) const {
    const int k = spec_.num_basis;
    std::fill(out, out + k, 0.0);
    const auto& dom = spec_.domain;

    if (spec_.kind == BasisKind::cyclic_cubic) {
        const double period = dom.width();
        double u = std::fmod(x - dom.lo, period);
        if (u < 0) u += period;
        u *= k / period;
        int j = static_cast<int>(std::floor(u));
        if (j >= k) j = k - 1;
        const double f = u - j;
        const double f2 = f * f;
        const double f3 = f2 * f;
        const double g = 1.0 - f;
        const auto wrap = [k](int idx) { return ((idx % k) + k) % k; };
        out[wrap(j)] += f3 / 6.0;
        out[wrap(j - 1)] += (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
        out[wrap(j - 2)] += (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
        out[wrap(j - 3)] += g * g * g / 6.0;
        return;
    }

    const double tol = 1e-10 * dom.width();
    if (x < dom.lo - tol || x > dom.hi + tol || std::isnan(x)) {
        std::ostringstream msg;
        msg << "point " << x << " outside basis domain [" << dom.lo << ", " << dom.hi << "]";
        throw ValidationError(msg.str());
    }
    x = std::clamp(x, dom.lo, dom.hi);

    if (spec_.kind == BasisKind::constant) {
        out[0] = 1.0;
        return;
    }

    // Cox-de Boor on the open knot vector; span index i satisfies
    // knots[i] <= x < knots[i+1] with 3 <= i <= k-1.
    const auto& t = knots_;
    int span = static_cast<int>(std::upper_bound(t.begin() + 3, t.begin() + k, x) - t.begin()) - 1;
    span = std::clamp(span, 3, k - 1);

    double n[4] = {1.0, 0.0, 0.0, 0.0};
    double left[4];
    double right[4];
    for (int deg = 1; deg <= 3; ++deg) {
        left[deg] = x - t[span + 1 - deg];
        right[deg] = t[span + deg] - x;
        double saved = 0.0;
        for (int r = 0; r < deg; ++r) {
            const double denom = right[r + 1] + left[deg - r];
            const double temp = denom > 0.0 ? n[r] / denom : 0.0;
            n[r] = saved + right[r + 1] * temp;
            saved = left[deg - r] * temp;
        }
        n[deg] = saved;
    }
    for (int r = 0; r < 4; ++r) out[span - 3 + r] = n[r];
}

Eigen::VectorXd Basis::evaluate(double x) const {
    Eigen::VectorXd row(spec_.num_basis);
    eval_into(x, row.data());
    return row;
}

Eigen::MatrixXd Basis::evaluate(std::span<const double> points) const {
    // Row-major scratch so each evaluation writes one contiguous row.
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(
        static_cast<Eigen::Index>(points.size()), spec_.num_basis);
    for (std::size_t r = 0; r < points.size(); ++r) {
        eval_into(points[r], out.row(static_cast<Eigen::Index>(r)).data());
    }
    return out;
}

Eigen::MatrixXd Basis::evaluate(const Eigen::VectorXd& points) const {
    return evaluate(std::span<const double>(points.data(), static_cast<std::size_t>(points.size())));
}

Basis make_basis(const SplineBasisSpec& spec) { return Basis(spec); }

Eigen::MatrixXd difference_penalty(int num_basis, int order, bool cyclic) {
    if (order < 1) throw ValidationError("difference order must be >= 1");
    if (order >= num_basis) {
        throw ValidationError("difference order must be smaller than the number of coefficients");
    }
    // Build D by repeated first differencing of the identity.
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(num_basis, num_basis);
    for (int k = 0; k < order; ++k) {
        if (cyclic) {
            Eigen::MatrixXd next(d.rows(), d.cols());
            for (Eigen::Index r = 0; r < d.rows(); ++r) {
                next.row(r) = d.row((r + 1) % d.rows()) - d.row(r);
            }
            d = std::move(next);
        } else {
            const Eigen::Index rows = d.rows() - 1;
            d = (d.bottomRows(rows) - d.topRows(rows)).eval();
        }
    }
    Eigen::MatrixXd p = d.transpose() * d;
    return 0.5 * (p + p.transpose());
}

Eigen::MatrixXd basis_penalty(const Basis& basis, int order) {
    if (basis.kind() == BasisKind::constant) return Eigen::MatrixXd::Zero(1, 1);
    return difference_penalty(basis.size(), order, basis.cyclic());
}

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

TensorPenalties tensor_penalties(const Basis& basis_s, const Basis& basis_t, int order) {
    const Eigen::MatrixXd ps = basis_penalty(basis_s, order);
    const Eigen::MatrixXd pt = basis_penalty(basis_t, order);
    return {kronecker(ps, Eigen::MatrixXd::Identity(basis_t.size(), basis_t.size())),
            kronecker(Eigen::MatrixXd::Identity(basis_s.size(), basis_s.size()), pt)};
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
    const Eigen::Index h = grid.size();
    if (h < 2) throw ValidationError("quadrature grid needs at least 2 points");
    Eigen::VectorXd w = Eigen::VectorXd::Zero(h);
    for (Eigen::Index k = 0; k + 1 < h; ++k) {
        const double step = grid[k + 1] - grid[k];
        if (!(step > 0.0)) throw ValidationError("quadrature grid must be strictly increasing");
        w[k] += 0.5 * step;
        w[k + 1] += 0.5 * step;
    }
    return w;
}

}  // namespace fqr

#pragma once

// Univariate spline bases and difference penalties.
//
// Coefficient layout for tensor-product surfaces: a D x L coefficient array
// delta(d, l) (d indexes the s-basis, l the t-basis) is stored as a flat
// vector with index d * L + l, i.e. the L t-coefficients belonging to one
// s-basis function are contiguous. Under this layout the s-direction penalty
// is kron(P_s, I_L) and the t-direction penalty is kron(I_D, P_t). Every
// consumer (design matrix, penalties, covariance, prediction) uses tensor_index().

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace fqr {

enum class BasisKind {
    cubic_bspline,  ///< open cubic B-spline with replicated boundary knots
    cyclic_cubic,   ///< periodic cubic B-spline, period = hi - lo
    constant,       ///< single function equal to 1 (scalar summaries of curves)
};

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& name);

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    double width() const { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

struct SplineBasisSpec {
    BasisKind kind = BasisKind::cubic_bspline;
    int num_basis = 10;
    Interval domain{};
};

/// Immutable, evaluable spline basis. Knots are equally spaced.
class Basis {
public:
    explicit Basis(const SplineBasisSpec& spec);

    BasisKind kind() const { return spec_.kind; }
    int size() const { return spec_.num_basis; }
    const Interval& domain() const { return spec_.domain; }
    const SplineBasisSpec& spec() const { return spec_; }
    bool cyclic() const { return spec_.kind == BasisKind::cyclic_cubic; }

    /// Full knot vector. Open bases carry 4 replicated knots at each end;
    /// cyclic bases list the K + 1 breakpoints lo, ..., hi of one period.
    const std::vector<double>& knots() const { return knots_; }

    /// Values of all basis functions at x (length size()).
    Eigen::VectorXd evaluate(double x) const;

    /// |points| x size() evaluation matrix.
    Eigen::MatrixXd evaluate(std::span<const double> points) const;
    Eigen::MatrixXd evaluate(const Eigen::VectorXd& points) const;

private:
    void eval_into(double x, double* out) const;

    SplineBasisSpec spec_;
    std::vector<double> knots_;
};

/// Returns a validated basis; throws ValidationError on a bad spec.
Basis make_basis(const SplineBasisSpec& spec);

/// D^T D for the order-m difference operator on K coefficients. For cyclic
/// penalties the differences wrap around (D is K x K circulant).
Eigen::MatrixXd difference_penalty(int num_basis, int order, bool cyclic = false);

/// Difference penalty matched to a basis (cyclic bases get wrapped differences).
Eigen::MatrixXd basis_penalty(const Basis& basis, int order);

struct TensorPenalties {
    Eigen::MatrixXd s;  ///< kron(P_s, I_L)
    Eigen::MatrixXd t;  ///< kron(I_D, P_t)
};

TensorPenalties tensor_penalties(const Basis& basis_s, const Basis& basis_t, int order);

inline int tensor_index(int d, int l, int num_t) { return d * num_t + l; }

Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Trapezoid-rule weights for a strictly increasing grid.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid);

}  // namespace fqr

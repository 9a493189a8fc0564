#include "fqr/fitter.hpp"

#include "fqr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace fqr {

void SmoothingParams::validate() const {
    for (double v : {lambda_alpha, lambda_beta_s, lambda_beta_t, lambda_u}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("smoothing parameters must be finite and >= 0");
    }
}

Eigen::VectorXd FitResult::fixed() const {
    Eigen::VectorXd out(a.size() + delta.size());
    out << a, delta;
    return out;
}

Eigen::VectorXd FitResult::all() const {
    Eigen::VectorXd out(a.size() + delta.size() + u.size());
    out << a, delta, u;
    return out;
}

PenaltyBlocks penalty_blocks(const ModelSpec& spec, const ModelBases& bases) {
    const int order = spec.penalty_order;
    const Eigen::MatrixXd pt = basis_penalty(bases.t, order);
    const Eigen::Index l = bases.t.size();
    const Eigen::Index d = bases.s.size();
    PenaltyBlocks out;
    out.alpha = pt;
    switch (spec.variant) {
        case Variant::surface: {
            const TensorPenalties tp = tensor_penalties(bases.s, bases.t, order);
            out.beta_s = tp.s;
            out.beta_t = tp.t;
            break;
        }
        case Variant::s_only:
            out.beta_s = basis_penalty(bases.s, order);
            out.beta_t = Eigen::MatrixXd::Zero(d, d);
            break;
        case Variant::t_only:
            out.beta_s = Eigen::MatrixXd::Zero(l, l);
            out.beta_t = pt;
            break;
        case Variant::constant:
            out.beta_s = Eigen::MatrixXd::Zero(1, 1);
            out.beta_t = Eigen::MatrixXd::Zero(1, 1);
            break;
    }
    return out;
}

Eigen::MatrixXd fixed_penalty(const PenaltyBlocks& blocks, const SmoothingParams& smoothing) {
    const Eigen::Index l = blocks.alpha.rows();
    const Eigen::Index p = blocks.beta_s.rows();
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(l + p, l + p);
    s.topLeftCorner(l, l) = smoothing.lambda_alpha * blocks.alpha;
    s.bottomRightCorner(p, p) = smoothing.lambda_beta_s * blocks.beta_s + smoothing.lambda_beta_t * blocks.beta_t;
    return s;
}

namespace {

// Evaluation state at one parameter vector.
struct State {
    double value = 0.0;
    double loss = 0.0;
    Eigen::VectorXd gradient;  // [f; u]
    Eigen::VectorXd curvature;  // rho'' per row
};

class Problem {
public:
    Problem(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
            const SmoothingParams& smoothing, double bandwidth)
        : x_(design.fixed_design()),
          y_(y),
          cluster_(design.cluster_of_row),
          num_clusters_(design.num_clusters()),
          lambda_u_(smoothing.lambda_u) {
        if (y.size() != x_.rows()) throw ValidationError("response length does not match the design");
        if (!design.bases) throw ValidationError("design matrices carry no bases");
        penalty_ = fixed_penalty(penalty_blocks(spec, *design.bases), smoothing);
        if (penalty_.rows() != x_.cols()) throw ValidationError("penalty size does not match the design");
        set_bandwidth(bandwidth, spec.tau);
    }

    void set_bandwidth(double h, double tau) {
        loss_ = {tau, h};
        validate(loss_);
    }
    const SmoothLossParams& loss() const { return loss_; }

    Eigen::Index num_fixed() const { return x_.cols(); }
    Eigen::Index num_clusters() const { return num_clusters_; }
    Eigen::Index size() const { return num_fixed() + num_clusters_; }
    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::MatrixXd& penalty() const { return penalty_; }
    double lambda_u() const { return lambda_u_; }

    Eigen::VectorXd eta(const Eigen::VectorXd& theta) const {
        Eigen::VectorXd e = x_ * theta.head(num_fixed());
        for (Eigen::Index r = 0; r < e.size(); ++r) e[r] += theta[num_fixed() + cluster_[static_cast<std::size_t>(r)]];
        return e;
    }

    double penalty_value(const Eigen::VectorXd& theta) const {
        const auto f = theta.head(num_fixed());
        const auto u = theta.tail(num_clusters_);
        return f.dot(penalty_ * f) + lambda_u_ * u.squaredNorm();
    }

    double value(const Eigen::VectorXd& theta) const {
        const Eigen::VectorXd e = eta(theta);
        double loss = 0.0;
        for (Eigen::Index r = 0; r < e.size(); ++r) loss += smooth_loss(y_[r] - e[r], loss_);
        return loss + penalty_value(theta);
    }

    State evaluate(const Eigen::VectorXd& theta) const {
        State s;
        const Eigen::VectorXd e = eta(theta);
        const Eigen::Index n = e.size();
        Eigen::VectorXd psi(n);
        s.curvature.resize(n);
        for (Eigen::Index r = 0; r < n; ++r) {
            const LossDerivatives d = smooth_loss_all(y_[r] - e[r], loss_);
            s.loss += d.value;
            psi[r] = d.gradient;
            s.curvature[r] = d.curvature;
        }
        s.value = s.loss + penalty_value(theta);
        s.gradient.resize(size());
        const auto f = theta.head(num_fixed());
        s.gradient.head(num_fixed()) = -(x_.transpose() * psi) + 2.0 * (penalty_ * f);
        Eigen::VectorXd gu = 2.0 * lambda_u_ * theta.tail(num_clusters_);
        for (Eigen::Index r = 0; r < n; ++r) gu[cluster_[static_cast<std::size_t>(r)]] -= psi[r];
        s.gradient.tail(num_clusters_) = gu;
        return s;
    }

    // Blocks of the penalized Hessian: H_ff (dense), H_fu (p x N), diagonal of H_uu.
    struct Hessian {
        Eigen::MatrixXd ff;
        Eigen::MatrixXd fu;
        Eigen::VectorXd uu;
    };

    Hessian hessian(const State& s) const {
        const Eigen::Index n = x_.rows();
        const Eigen::Index p = num_fixed();
        Hessian h;
        Eigen::MatrixXd scaled = s.curvature.cwiseSqrt().asDiagonal() * x_;
        h.ff = Eigen::MatrixXd::Zero(p, p);
        h.ff.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
        h.ff = h.ff.selfadjointView<Eigen::Lower>();
        h.ff += 2.0 * penalty_;
        h.fu = Eigen::MatrixXd::Zero(p, num_clusters_);
        h.uu = Eigen::VectorXd::Constant(num_clusters_, 2.0 * lambda_u_);
        for (Eigen::Index r = 0; r < n; ++r) {
            const int c = cluster_[static_cast<std::size_t>(r)];
            h.fu.col(c) += s.curvature[r] * x_.row(r).transpose();
            h.uu[c] += s.curvature[r];
        }
        // Keeps the elimination defined when lambda_u = 0 and a cluster's
        // residuals all sit far in the flat tails of the loss.
        const double floor = 1e-12 * std::max(1.0, h.uu.maxCoeff());
        h.uu = h.uu.cwiseMax(floor);
        return h;
    }

    struct Schur {
        Eigen::LLT<Eigen::MatrixXd> llt;
        Eigen::MatrixXd fu_scaled;  // H_fu D^-1
    };

    // Cholesky of the Schur complement. When every residual sits in the flat
    // tails the complement can lose definiteness in floating point; a small
    // ridge is then added, which only damps the step.
    static Schur factor(const Hessian& h) {
        Schur sc;
        sc.fu_scaled = h.fu * h.uu.cwiseInverse().asDiagonal();
        Eigen::MatrixXd m = h.ff - sc.fu_scaled * h.fu.transpose();
        m = (0.5 * (m + m.transpose())).eval();
        sc.llt.compute(m);
        double ridge = 1e-14 * std::max(1.0, m.diagonal().cwiseAbs().maxCoeff());
        for (int attempt = 0; sc.llt.info() != Eigen::Success && attempt < 8; ++attempt, ridge *= 100.0) {
            Eigen::MatrixXd damped = m;
            damped.diagonal().array() += ridge;
            sc.llt.compute(damped);
        }
        if (sc.llt.info() != Eigen::Success) throw NumericalError("penalized Hessian is not positive definite");
        return sc;
    }

    Eigen::VectorXd newton_step(const State& s, const Hessian& h, const Schur& sc) const {
        const Eigen::Index p = num_fixed();
        const auto gf = s.gradient.head(p);
        const auto gu = s.gradient.tail(num_clusters_);
        const Eigen::VectorXd df = sc.llt.solve(-gf + sc.fu_scaled * gu);
        Eigen::VectorXd step(size());
        step.head(p) = df;
        step.tail(num_clusters_) = (-gu - h.fu.transpose() * df).cwiseQuotient(h.uu);
        if (!step.allFinite()) {
            throw NumericalError("Newton step is not finite; use nonzero smoothing parameters");
        }
        return step;
    }

private:
    Eigen::MatrixXd x_;
    Eigen::VectorXd y_;
    std::vector<int> cluster_;
    Eigen::Index num_clusters_;
    double lambda_u_;
    Eigen::MatrixXd penalty_;
    SmoothLossParams loss_{};
};

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
};

NewtonOutcome newton(const Problem& prob, Eigen::VectorXd& theta, int max_iter, double rel_tol, double grad_tol,
                     std::vector<double>* trace) {
    NewtonOutcome out;
    State s = prob.evaluate(theta);
    double rel_change = std::numeric_limits<double>::infinity();
    for (int iter = 0;; ++iter) {
        const double gmax = s.gradient.cwiseAbs().maxCoeff();
        const double gate = grad_tol * (1.0 + std::abs(s.value));
        if (gmax < gate && (iter == 0 || rel_change < rel_tol)) {
            out.converged = true;
            break;
        }
        if (iter >= max_iter) break;

        const auto h = prob.hessian(s);
        const auto sc = Problem::factor(h);
        const Eigen::VectorXd step = prob.newton_step(s, h, sc);
        const double slope = s.gradient.dot(step);
        // Newton decrement at the floating-point floor: no further progress possible.
        if (-slope < 1e-12 * (1.0 + std::abs(s.value))) {
            out.converged = true;
            break;
        }

        double t = 1.0;
        bool accepted = false;
        Eigen::VectorXd candidate;
        double f_new = 0.0;
        for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
            candidate = theta + t * step;
            f_new = prob.value(candidate);
            if (f_new < s.value) {
                accepted = true;
                break;
            }
        }
        ++out.iterations;
        if (!accepted) {
            out.converged = gmax < gate;
            break;
        }
        rel_change = std::abs(s.value - f_new) / std::max(std::abs(s.value), 1e-300);
        theta = std::move(candidate);
        s = prob.evaluate(theta);
        if (trace) trace->push_back(s.value);
    }
    return out;
}

double mad(const Eigen::VectorXd& v) {
    std::vector<double> x(v.data(), v.data() + v.size());
    const double m = median(x);
    for (double& e : x) e = std::abs(e - m);
    return median(x);
}

}  // namespace

ObjectiveEval penalized_objective(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                                  const SmoothingParams& smoothing, double bandwidth, const Eigen::VectorXd& theta) {
    const Problem prob(design, y, spec, smoothing, bandwidth);
    if (theta.size() != prob.size()) throw ValidationError("parameter vector has the wrong length");
    const State s = prob.evaluate(theta);
    return {s.value, s.gradient};
}

namespace {

// Rows and clusters in an order that depends only on the data values, so that
// relabelling or reordering clusters leaves every floating-point operation of
// the fit unchanged.
struct CanonicalOrder {
    std::vector<Eigen::Index> rows;  // new row -> old row
    std::vector<int> clusters;       // new cluster -> old cluster
};

CanonicalOrder canonical_order(const DesignMatrices& design, const Eigen::VectorXd& y) {
    const auto row_less = [&](Eigen::Index a, Eigen::Index b) {
        if (y[a] != y[b]) return y[a] < y[b];
        for (Eigen::Index k = 0; k < design.A.cols(); ++k) {
            if (design.A(a, k) != design.A(b, k)) return design.A(a, k) < design.A(b, k);
        }
        for (Eigen::Index k = 0; k < design.B.cols(); ++k) {
            if (design.B(a, k) != design.B(b, k)) return design.B(a, k) < design.B(b, k);
        }
        return false;
    };
    const auto num_clusters = static_cast<std::size_t>(design.num_clusters());
    std::vector<std::vector<Eigen::Index>> members(num_clusters);
    for (Eigen::Index r = 0; r < design.rows(); ++r) {
        members[static_cast<std::size_t>(design.cluster_of_row[static_cast<std::size_t>(r)])].push_back(r);
    }
    for (auto& m : members) std::stable_sort(m.begin(), m.end(), row_less);

    CanonicalOrder out;
    out.clusters.resize(num_clusters);
    std::iota(out.clusters.begin(), out.clusters.end(), 0);
    std::stable_sort(out.clusters.begin(), out.clusters.end(), [&](int a, int b) {
        const auto& ma = members[static_cast<std::size_t>(a)];
        const auto& mb = members[static_cast<std::size_t>(b)];
        return std::lexicographical_compare(ma.begin(), ma.end(), mb.begin(), mb.end(), row_less);
    });
    for (int c : out.clusters) {
        const auto& m = members[static_cast<std::size_t>(c)];
        out.rows.insert(out.rows.end(), m.begin(), m.end());
    }
    return out;
}

DesignMatrices reorder(const DesignMatrices& design, const CanonicalOrder& order) {
    std::vector<int> new_cluster(order.clusters.size());
    for (std::size_t c = 0; c < order.clusters.size(); ++c) {
        new_cluster[static_cast<std::size_t>(order.clusters[c])] = static_cast<int>(c);
    }
    DesignMatrices out;
    out.variant = design.variant;
    out.bases = design.bases;
    out.A = design.A(order.rows, Eigen::all);
    out.B = design.B(order.rows, Eigen::all);
    out.Xi = design.Xi(order.rows, Eigen::all);
    out.Z = Eigen::MatrixXd::Zero(design.Z.rows(), design.Z.cols());
    for (std::size_t r = 0; r < order.rows.size(); ++r) {
        const auto old = static_cast<std::size_t>(order.rows[r]);
        const int c = new_cluster[static_cast<std::size_t>(design.cluster_of_row[old])];
        out.cluster_of_row.push_back(c);
        out.row_index.push_back(design.row_index.empty() ? std::pair<int, int>{c, 0} : design.row_index[old]);
        out.Z(static_cast<Eigen::Index>(r), c) = 1.0;
    }
    return out;
}

FitResult fit_in_order(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                       const SmoothingParams& smoothing, double bandwidth, const FitOptions& options);

}  // namespace

FitResult penalized_fit(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                        const SmoothingParams& smoothing, double bandwidth, const FitOptions& options) {
    spec.validate();
    smoothing.validate();
    if (y.size() != design.rows()) throw ValidationError("response length does not match the design");
    if (static_cast<Eigen::Index>(design.cluster_of_row.size()) != design.rows()) {
        throw ValidationError("design rows carry no cluster assignment");
    }
    const CanonicalOrder order = canonical_order(design, y);
    const Eigen::Index p = design.num_fixed();
    FitOptions opts = options;
    if (options.initial) {
        if (options.initial->size() != p + design.num_clusters()) {
            throw ValidationError("initial parameter vector has the wrong length");
        }
        Eigen::VectorXd init(options.initial->size());
        init.head(p) = options.initial->head(p);
        for (std::size_t c = 0; c < order.clusters.size(); ++c) {
            init[p + static_cast<Eigen::Index>(c)] = (*options.initial)[p + order.clusters[c]];
        }
        opts.initial = std::move(init);
    }
    FitResult fit = fit_in_order(reorder(design, order), y(order.rows), spec, smoothing, bandwidth, opts);
    Eigen::VectorXd u(fit.u.size());
    for (std::size_t c = 0; c < order.clusters.size(); ++c) u[order.clusters[c]] = fit.u[static_cast<Eigen::Index>(c)];
    fit.u = std::move(u);
    return fit;
}

namespace {

// Orthonormal basis of the null space of a positive semidefinite matrix.
Eigen::MatrixXd null_basis(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    const double tol = 1e-9 * std::max(1e-300, eig.eigenvalues().cwiseAbs().maxCoeff());
    const auto k = (eig.eigenvalues().array() <= tol).count();
    // Eigenvalues are ascending, so the null directions come first.
    return eig.eigenvectors().leftCols(k);
}

// The coefficients are identified iff [X Z] has full column rank on the null
// space of the penalty (directions the penalty does not constrain). Each
// penalized block contributes the null space of its unit-scaled penalties, so
// the test does not depend on the magnitude of the smoothing parameters.
void check_identified(const DesignMatrices& design, const ModelSpec& spec, const SmoothingParams& smoothing) {
    const PenaltyBlocks blocks = penalty_blocks(spec, *design.bases);
    const auto unit = [](const Eigen::MatrixXd& p) {
        const double scale = p.cwiseAbs().maxCoeff();
        return scale > 0.0 ? Eigen::MatrixXd(p / scale) : p;
    };
    const Eigen::Index l = blocks.alpha.rows();
    const Eigen::Index q = blocks.beta_s.rows();
    const Eigen::Index num_u = design.num_clusters();

    const Eigen::MatrixXd na = smoothing.lambda_alpha > 0.0 ? null_basis(unit(blocks.alpha))
                                                            : Eigen::MatrixXd::Identity(l, l);
    Eigen::MatrixXd pd = Eigen::MatrixXd::Zero(q, q);
    if (smoothing.lambda_beta_s > 0.0) pd += unit(blocks.beta_s);
    if (smoothing.lambda_beta_t > 0.0) pd += unit(blocks.beta_t);
    const Eigen::MatrixXd nd = null_basis(pd);
    const Eigen::Index nu = smoothing.lambda_u > 0.0 ? 0 : num_u;

    const Eigen::Index k = na.cols() + nd.cols() + nu;
    if (k == 0) return;
    Eigen::MatrixXd restricted(design.rows(), k);
    restricted.leftCols(na.cols()) = design.A * na;
    restricted.middleCols(na.cols(), nd.cols()) = design.B * nd;
    if (nu > 0) restricted.rightCols(nu) = design.Z;

    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(restricted);
    const Eigen::VectorXd sv = svd.singularValues();
    // Beyond a condition number of 1e8 the normal equations are singular in
    // double precision.
    if (sv.size() < k || !(sv[k - 1] > 1e-8 * sv[0])) {
        throw NumericalError(
            "penalized Hessian is singular; the design is rank deficient, use nonzero smoothing parameters");
    }
}

FitResult fit_in_order(const DesignMatrices& design, const Eigen::VectorXd& y, const ModelSpec& spec,
                       const SmoothingParams& smoothing, double bandwidth, const FitOptions& options) {
    check_identified(design, spec, smoothing);
    Problem prob(design, y, spec, smoothing, bandwidth);
    const Eigen::Index p = prob.num_fixed();
    const Eigen::Index l = design.A.cols();
    const Eigen::Index num_u = prob.num_clusters();

    Eigen::VectorXd theta = Eigen::VectorXd::Zero(prob.size());
    bool warm = false;
    if (options.initial) {
        if (options.initial->size() != prob.size()) throw ValidationError("initial parameter vector has the wrong length");
        theta = *options.initial;
        warm = true;
    } else {
        theta.head(l) = design.A.completeOrthogonalDecomposition().solve(y);
    }

    FitResult fit;
    fit.spec = spec;
    fit.bases = design.bases;
    fit.smoothing = smoothing;
    fit.bandwidth = bandwidth;

    if (options.continuation && !warm) {
        const double spread = mad(y - prob.eta(theta));
        double h = 0.25 * spread;
        while (h > 4.0 * bandwidth) {
            prob.set_bandwidth(h, spec.tau);
            fit.iterations += newton(prob, theta, 50, 1e-6, 1e-3, nullptr).iterations;
            h *= 0.25;
        }
        prob.set_bandwidth(bandwidth, spec.tau);
    }

    const NewtonOutcome outcome = newton(prob, theta, options.max_iterations, options.relative_tolerance,
                                         options.gradient_tolerance, &fit.objective_trace);
    fit.converged = outcome.converged;
    fit.iterations += outcome.iterations;

    // Center the intercepts; the t-basis sums to one, so shifting every a_l by
    // the mean leaves each linear predictor unchanged.
    if (num_u > 0) {
        const double m = theta.tail(num_u).mean();
        theta.tail(num_u).array() -= m;
        theta.head(l).array() += m;
    }

    const State s = prob.evaluate(theta);
    fit.objective = s.value;
    fit.gradient_max = s.gradient.cwiseAbs().maxCoeff();
    fit.a = theta.head(l);
    fit.delta = theta.segment(l, p - l);
    fit.u = theta.tail(num_u);

    const auto h = prob.hessian(s);
    const auto sc = Problem::factor(h);
    Eigen::MatrixXd hinv = sc.llt.solve(Eigen::MatrixXd::Identity(p, p));
    hinv = (0.5 * (hinv + hinv.transpose())).eval();
    // F / h is the negative log-likelihood analogue (scale s = h), so the
    // covariance is the inverse of its profile Hessian: h * (Schur complement)^-1.
    fit.Vp = bandwidth * hinv;

    // Trace of H_pen^-1 H_unpen split into the fixed and intercept blocks,
    // using the block inverse of [[H_ff, H_fu], [H_uf, diag(d)]].
    const Eigen::MatrixXd two_s = 2.0 * prob.penalty();
    fit.edf_ab = static_cast<double>(p) - (hinv.cwiseProduct(two_s.transpose())).sum();
    if (num_u > 0) {
        const Eigen::VectorXd dinv = h.uu.cwiseInverse();
        const Eigen::MatrixXd g = h.fu * dinv.asDiagonal();  // H_fu D^-1
        const double tr_vuu = dinv.sum() + (hinv.cwiseProduct(g * g.transpose())).sum();
        fit.edf_u = static_cast<double>(num_u) - 2.0 * prob.lambda_u() * tr_vuu;
    }

    fit.loglik = -s.loss / bandwidth;
    fit.aic = -2.0 * fit.loglik + 2.0 * (fit.edf_ab + fit.edf_u);
    return fit;
}

}  // namespace

Eigen::VectorXd fitted_eta(const FitResult& fit, const DesignMatrices& design) {
    Eigen::VectorXd e = design.A * fit.a + design.B * fit.delta;
    for (Eigen::Index r = 0; r < e.size(); ++r) e[r] += fit.u[design.cluster_of_row[static_cast<std::size_t>(r)]];
    return e;
}

}  // namespace fqr

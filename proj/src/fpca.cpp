#include "fqr/fpca.hpp"

#include "fqr/basis.hpp"
#include "fqr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fqr {

namespace {

std::string row_name(const FunctionalSample& sample, Eigen::Index r) {
    if (static_cast<std::size_t>(r) < sample.obs_ids.size()) return sample.obs_ids[static_cast<std::size_t>(r)];
    return "#" + std::to_string(r);
}

// Mean of (raw diagonal - band extrapolation). Along the anti-diagonal through
// (k, k) the covariance g(j) = C(k - j, k + j) is even in the lag j, so g(0) is
// extrapolated by a polynomial in j^2 through the first one to three lags.
// Only points where the widest available stencil fits are used.
double estimate_noise_variance(const Eigen::MatrixXd& cov) {
    const Eigen::Index h = cov.rows();
    const Eigen::Index lags = std::min<Eigen::Index>(3, (h - 1) / 2);
    if (lags == 0) return 0.0;
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index k = lags; k + lags < h; ++k) {
        const auto g = [&](Eigen::Index j) { return cov(k - j, k + j); };
        double interp = g(1);
        if (lags == 2) interp = (4.0 * g(1) - g(2)) / 3.0;
        if (lags == 3) interp = 1.5 * g(1) - 0.6 * g(2) + 0.1 * g(3);
        sum += cov(k, k) - interp;
        ++count;
    }
    return std::max(0.0, sum / count);
}

Eigen::MatrixXd project_rows(const FpcaResult& fit, const Eigen::VectorXd& weights,
                             const Eigen::MatrixXd& rows) {
    const Eigen::Index n = rows.rows();
    const Eigen::Index h = rows.cols();
    const Eigen::Index k = fit.components();
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, k);
    if (k == 0) return scores;
    const Eigen::MatrixXd weighted_phi = weights.asDiagonal() * fit.eigenfunctions;

    for (Eigen::Index r = 0; r < n; ++r) {
        const bool complete = rows.row(r).array().isFinite().all();
        if (complete) {
            scores.row(r) = (rows.row(r) - fit.mean.transpose()) * weighted_phi;
            continue;
        }
        // Conditional expectation of the scores given the observed entries:
        // (Phi_o' Phi_o + sigma^2 Lambda^-1)^-1 Phi_o' (W_o - mu_o).
        std::vector<Eigen::Index> seen;
        for (Eigen::Index c = 0; c < h; ++c) {
            if (std::isfinite(rows(r, c))) seen.push_back(c);
        }
        Eigen::MatrixXd phi_o(static_cast<Eigen::Index>(seen.size()), k);
        Eigen::VectorXd resid(static_cast<Eigen::Index>(seen.size()));
        for (std::size_t i = 0; i < seen.size(); ++i) {
            const auto c = seen[i];
            phi_o.row(static_cast<Eigen::Index>(i)) = fit.eigenfunctions.row(c);
            resid[static_cast<Eigen::Index>(i)] = rows(r, c) - fit.mean[c];
        }
        Eigen::MatrixXd lhs = phi_o.transpose() * phi_o;
        for (Eigen::Index j = 0; j < k; ++j) lhs(j, j) += fit.noise_variance / fit.eigenvalues[j];
        scores.row(r) = lhs.completeOrthogonalDecomposition().solve(phi_o.transpose() * resid).transpose();
    }
    return scores;
}

Eigen::MatrixXd reconstruct(const FpcaResult& fit, const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd out = scores * fit.eigenfunctions.transpose();
    out.rowwise() += fit.mean.transpose();
    return out;
}

}  // namespace

Eigen::Index FunctionalSample::min_observed(Eigen::Index grid_size) {
    return std::max<Eigen::Index>(4, static_cast<Eigen::Index>(std::ceil(0.1 * static_cast<double>(grid_size))));
}

void FunctionalSample::validate() const {
    const Eigen::Index h = grid.size();
    if (h < 2) throw ValidationError("functional grid needs at least 2 points");
    for (Eigen::Index k = 0; k + 1 < h; ++k) {
        if (!(grid[k + 1] > grid[k])) throw ValidationError("functional grid must be strictly increasing");
    }
    if (values.cols() != h) throw ValidationError("curve matrix width does not match the grid");
    const Eigen::Index need = min_observed(h);
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        const Eigen::Index seen = values.row(r).array().isFinite().count();
        if (seen < need) {
            std::ostringstream msg;
            msg << "curve '" << row_name(*this, r) << "' has " << seen << " observed values; at least "
                << need << " are required";
            throw ValidationError(msg.str());
        }
    }
}

FpcaResult fpca_smooth(const FunctionalSample& sample, double pve) {
    if (!(pve > 0.0 && pve < 1.0)) throw ValidationError("pve must lie in (0, 1)");
    sample.validate();
    const Eigen::Index n = sample.values.rows();
    const Eigen::Index h = sample.grid.size();
    if (n < 2) throw ValidationError("FPCA needs at least 2 curves");

    FpcaResult out;
    out.grid = sample.grid;
    const Eigen::MatrixXd& w = sample.values;
    const Eigen::ArrayXXd seen = w.array().isFinite().cast<double>();

    out.mean.resize(h);
    for (Eigen::Index c = 0; c < h; ++c) {
        double sum = 0.0;
        double count = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            if (seen(r, c) > 0) {
                sum += w(r, c);
                count += 1.0;
            }
        }
        if (count == 0.0) {
            std::ostringstream msg;
            msg << "no curve is observed at grid point " << sample.grid[c];
            throw ValidationError(msg.str());
        }
        out.mean[c] = sum / count;
    }

    Eigen::MatrixXd centered = Eigen::MatrixXd::Zero(n, h);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < h; ++c) {
            if (seen(r, c) > 0) centered(r, c) = w(r, c) - out.mean[c];
        }
    }
    const Eigen::MatrixXd pair_counts = seen.matrix().transpose() * seen.matrix();
    Eigen::MatrixXd cov = centered.transpose() * centered;
    for (Eigen::Index i = 0; i < h; ++i) {
        for (Eigen::Index j = 0; j < h; ++j) {
            const double m = pair_counts(i, j);
            cov(i, j) = m > 1.0 ? cov(i, j) / (m - 1.0) : 0.0;
        }
    }
    cov = (0.5 * (cov + cov.transpose())).eval();

    const Eigen::VectorXd weights = trapezoid_weights(sample.grid);
    const Eigen::VectorXd sqrt_w = weights.array().sqrt();
    const Eigen::MatrixXd op_raw = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig;
    const auto decompose = [&](double sigma2) {
        eig.compute(op_raw - sigma2 * Eigen::MatrixXd(weights.asDiagonal()));
        if (eig.info() != Eigen::Success) throw NumericalError("covariance eigendecomposition failed");
    };

    // The band extrapolation is biased upwards when the covariance is curved
    // on a coarse grid. Principal-factor refinement: replace the estimate by
    // the mean diagonal left over by the retained components, as long as that
    // lowers it. Noiseless low-rank input converges to zero.
    double sigma2 = estimate_noise_variance(cov);
    const double diag_scale = cov.diagonal().cwiseAbs().mean();
    for (int iter = 0; iter < 200 && sigma2 > 0.0; ++iter) {
        decompose(sigma2);
        const Eigen::VectorXd vals = eig.eigenvalues().reverse().cwiseMax(0.0);
        const double total = vals.sum();
        if (!(total > 0.0)) break;
        Eigen::Index keep = 0;
        double cumulative = 0.0;
        while (keep < vals.size() && cumulative / total < pve) cumulative += vals[keep++];
        const Eigen::MatrixXd phi =
            sqrt_w.cwiseInverse().asDiagonal() * eig.eigenvectors().rowwise().reverse().leftCols(keep);
        const Eigen::VectorXd fitted = (phi * vals.head(keep).asDiagonal() * phi.transpose()).diagonal();
        const double residual = std::max(0.0, (cov.diagonal() - fitted).mean());
        if (!(residual < sigma2 - 1e-15 * diag_scale)) break;
        sigma2 = residual;
    }
    out.noise_variance = sigma2;
    cov.diagonal().array() -= sigma2;
    decompose(sigma2);

    Eigen::VectorXd values = eig.eigenvalues().reverse();
    Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

    const double largest = std::max(0.0, values.maxCoeff());
    // After removing the noise variance, small negative eigenvalues are
    // ordinary sampling noise; only a material negative part is reported.
    const double negative = -values.cwiseMin(0.0).sum();
    const double positive = values.cwiseMax(0.0).sum();
    if (negative > 0.05 * positive && largest > 0.0) {
        out.warnings.push_back("covariance is markedly indefinite (negative eigenvalue mass " +
                               std::to_string(negative / positive) + " of the positive mass); clipped to 0");
    }
    const double scale = 1.0 + w.array().isFinite().select(w.array().abs(), 0.0).maxCoeff();
    const double zero_tol = 1e-12 * weights.sum() * scale * scale;
    for (Eigen::Index k = 0; k < values.size(); ++k) {
        if (values[k] <= zero_tol) values[k] = 0.0;
    }
    out.all_eigenvalues = values;

    const double total = values.sum();
    Eigen::Index keep = 0;
    if (total > 0.0) {
        double cumulative = 0.0;
        while (keep < values.size()) {
            cumulative += values[keep];
            ++keep;
            if (cumulative / total >= pve) break;
        }
        out.pve_achieved = cumulative / total;
    } else {
        out.pve_achieved = 1.0;
    }

    out.eigenvalues = values.head(keep);
    out.eigenfunctions = sqrt_w.cwiseInverse().asDiagonal() * vectors.leftCols(keep);
    // Fix the sign so the largest-magnitude entry of each eigenfunction is positive.
    for (Eigen::Index k = 0; k < keep; ++k) {
        Eigen::Index arg = 0;
        out.eigenfunctions.col(k).cwiseAbs().maxCoeff(&arg);
        if (out.eigenfunctions(arg, k) < 0) out.eigenfunctions.col(k) *= -1.0;
    }

    out.scores = project_rows(out, weights, w);
    out.smoothed = reconstruct(out, out.scores);
    return out;
}

Projection project_new(const FpcaResult& result, const Eigen::VectorXd& grid, const Eigen::MatrixXd& new_rows) {
    if (grid.size() != result.grid.size() || (grid - result.grid).cwiseAbs().maxCoeff() > 0.0) {
        throw ValidationError("curves are not on the FPCA training grid");
    }
    if (new_rows.cols() != grid.size()) throw ValidationError("curve width does not match the FPCA grid");
    const Eigen::VectorXd weights = trapezoid_weights(grid);
    Projection p;
    p.scores = project_rows(result, weights, new_rows);
    p.smoothed = reconstruct(result, p.scores);
    return p;
}

}  // namespace fqr

#pragma once

// Pre-smoothing of noisy curves by functional principal component analysis.
//
// Covariance: pairwise-complete empirical covariance of the demeaned rows.
// The measurement-noise variance is estimated from the gap between the raw
// diagonal and an extrapolation of the off-diagonal band along anti-diagonals,
// lowered by principal factoring when the retained components leave less on
// the diagonal, and removed from the diagonal. Eigenfunctions are orthonormal
// under trapezoid quadrature on the observation grid. Missing values are NaN.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fqr {

struct FunctionalSample {
    Eigen::VectorXd grid;            ///< s_1 < ... < s_H
    Eigen::MatrixXd values;          ///< n_obs x H, NaN = missing
    std::vector<std::string> obs_ids;

    /// Throws ValidationError when a grid or row invariant is violated.
    void validate() const;
    static Eigen::Index min_observed(Eigen::Index grid_size);
};

struct FpcaResult {
    Eigen::VectorXd grid;
    Eigen::VectorXd mean;
    Eigen::MatrixXd eigenfunctions;   ///< H x D~
    Eigen::VectorXd eigenvalues;      ///< retained, nonincreasing
    Eigen::VectorXd all_eigenvalues;  ///< every eigenvalue, clipped at 0, nonincreasing
    double noise_variance = 0.0;
    Eigen::MatrixXd scores;           ///< n_obs x D~
    Eigen::MatrixXd smoothed;         ///< n_obs x H
    double pve_achieved = 1.0;
    std::vector<std::string> warnings;

    Eigen::Index components() const { return eigenvalues.size(); }
};

FpcaResult fpca_smooth(const FunctionalSample& sample, double pve);

struct Projection {
    Eigen::MatrixXd scores;
    Eigen::MatrixXd smoothed;
};

/// Scores and reconstructions for new curves on the training grid.
Projection project_new(const FpcaResult& result, const Eigen::VectorXd& grid,
                       const Eigen::MatrixXd& new_rows);

}  // namespace fqr

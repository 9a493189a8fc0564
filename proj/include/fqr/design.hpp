#pragma once

// Longitudinal dataset and the finite-dimensional design of the functional
// quantile model
//   Q(t_ij) = sum_l a_l psi_l(t_ij) + sum_{d,l} delta_dl psi_l(t_ij) xi_d,ij + u_i,
// where xi_d,ij is the trapezoid-rule integral of phi_d(s) X_ij(s).

#include "fqr/basis.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fqr {

struct Observation {
    std::string obs_id;
    double y = 0.0;
    double t = 0.0;
    Eigen::Index curve_row = 0;
};

struct ClusterRecord {
    std::string cluster_id;
    std::vector<Observation> observations;
};

struct LongitudinalDataset {
    std::vector<ClusterRecord> clusters;
    Eigen::VectorXd grid;
    Eigen::MatrixXd curves;  ///< n_curves x H, smoothed covariate values

    /// Checks cluster sizes, curve indices (valid and unique) and grid shape.
    /// N >= 1 is accepted here; ingestion enforces N >= 2.
    void validate() const;
    Eigen::Index total_observations() const;
    Eigen::VectorXd responses() const;
    Interval time_range() const;
};

enum class Variant {
    surface,   ///< beta(s, t)
    s_only,    ///< beta_A(s)
    t_only,    ///< beta_B(t) times the curve integral
    constant,  ///< beta_C times the curve integral
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& name);

struct ModelSpec {
    double tau = 0.5;
    Variant variant = Variant::surface;
    BasisKind basis_t_kind = BasisKind::cubic_bspline;
    int num_t = 10;  ///< L
    BasisKind basis_s_kind = BasisKind::cyclic_cubic;
    int num_s = 10;  ///< D
    int penalty_order = 2;
    /// Domain of the t-basis; the observed range of t when unset.
    std::optional<Interval> t_domain;

    void validate() const;
};

/// The bases a fitted model is expressed in.
struct ModelBases {
    Basis t;
    Basis s;  ///< constant basis for t_only / constant variants
    Eigen::VectorXd grid;
    Eigen::VectorXd quad_weights;
};

ModelBases make_model_bases(const ModelSpec& spec, const Interval& t_domain, const Eigen::VectorXd& grid);

struct DesignMatrices {
    Eigen::MatrixXd A;   ///< n x L, psi_l(t_r)
    Eigen::MatrixXd Xi;  ///< n x D, functional scores per row
    Eigen::MatrixXd B;   ///< n x p_beta
    Eigen::MatrixXd Z;   ///< n x N cluster indicators
    std::vector<int> cluster_of_row;
    std::vector<std::pair<int, int>> row_index;  ///< row -> (cluster, observation)
    Variant variant = Variant::surface;
    std::shared_ptr<const ModelBases> bases;

    Eigen::Index rows() const { return A.rows(); }
    Eigen::Index num_fixed() const { return A.cols() + B.cols(); }
    Eigen::Index num_clusters() const { return Z.cols(); }
    /// [A | B]
    Eigen::MatrixXd fixed_design() const;
};

/// xi(r, d) = trapezoid integral of phi_d(s) * curves(r, s) over the grid.
Eigen::MatrixXd functional_scores(const Eigen::MatrixXd& curves, const Eigen::VectorXd& grid, const Basis& basis_s);

/// Weighted basis matrix W * Phi (H x D) so that scores = curves * result.
Eigen::MatrixXd score_operator(const Eigen::VectorXd& grid, const Basis& basis_s);

/// Beta-block covariates for one row given the t-basis row and the curve scores.
Eigen::RowVectorXd beta_row(Variant variant, const Eigen::RowVectorXd& psi_t, const Eigen::RowVectorXd& xi);

DesignMatrices assemble_design(const LongitudinalDataset& data, const ModelSpec& spec);
DesignMatrices assemble_design(const LongitudinalDataset& data, const ModelSpec& spec, const ModelBases& bases);

/// Bases implied by a dataset and spec (t-domain from spec or data).
ModelBases bases_for(const LongitudinalDataset& data, const ModelSpec& spec);

}  // namespace fqr

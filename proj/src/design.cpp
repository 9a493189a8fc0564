#include "fqr/design.hpp"

#include "fqr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fqr {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::surface: return "surface";
        case Variant::s_only: return "s_only";
        case Variant::t_only: return "t_only";
        case Variant::constant: return "constant";
    }
    return "unknown";
}

Variant variant_from_string(const std::string& name) {
    if (name == "surface" || name == "st") return Variant::surface;
    if (name == "s_only" || name == "A") return Variant::s_only;
    if (name == "t_only" || name == "B") return Variant::t_only;
    if (name == "constant" || name == "C") return Variant::constant;
    throw ValidationError("unknown model variant '" + name + "'");
}

void LongitudinalDataset::validate() const {
    if (clusters.empty()) throw ValidationError("dataset has no clusters");
    if (grid.size() < 2) throw ValidationError("functional grid needs at least 2 points");
    if (curves.cols() != grid.size()) throw ValidationError("curve matrix width does not match the grid");
    std::vector<char> used(static_cast<std::size_t>(curves.rows()), 0);
    for (const auto& c : clusters) {
        if (c.observations.empty()) throw ValidationError("cluster '" + c.cluster_id + "' has no observations");
        for (const auto& o : c.observations) {
            if (o.curve_row < 0 || o.curve_row >= curves.rows()) {
                throw ValidationError("observation '" + o.obs_id + "' references a missing curve row");
            }
            auto& flag = used[static_cast<std::size_t>(o.curve_row)];
            if (flag) throw ValidationError("curve row shared by several observations ('" + o.obs_id + "')");
            flag = 1;
            if (!std::isfinite(o.y) || !std::isfinite(o.t)) {
                throw ValidationError("observation '" + o.obs_id + "' has a non-finite response or time");
            }
        }
    }
    if (!curves.allFinite()) throw ValidationError("covariate curves contain missing values; smooth them first");
}

Eigen::Index LongitudinalDataset::total_observations() const {
    Eigen::Index n = 0;
    for (const auto& c : clusters) n += static_cast<Eigen::Index>(c.observations.size());
    return n;
}

Eigen::VectorXd LongitudinalDataset::responses() const {
    Eigen::VectorXd y(total_observations());
    Eigen::Index r = 0;
    for (const auto& c : clusters) {
        for (const auto& o : c.observations) y[r++] = o.y;
    }
    return y;
}

Interval LongitudinalDataset::time_range() const {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& c : clusters) {
        for (const auto& o : c.observations) {
            lo = std::min(lo, o.t);
            hi = std::max(hi, o.t);
        }
    }
    return {lo, hi};
}

void ModelSpec::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("tau must lie in (0, 1)");
    if (penalty_order < 1) throw ValidationError("penalty order must be >= 1");
    if (basis_t_kind == BasisKind::constant) throw ValidationError("the t-basis cannot be constant");
    if (penalty_order >= num_t) throw ValidationError("penalty order must be smaller than L");
    const bool uses_s = variant == Variant::surface || variant == Variant::s_only;
    if (uses_s && basis_s_kind != BasisKind::constant && penalty_order >= num_s) {
        throw ValidationError("penalty order must be smaller than D");
    }
}

ModelBases make_model_bases(const ModelSpec& spec, const Interval& t_domain, const Eigen::VectorXd& grid) {
    spec.validate();
    const bool uses_s = spec.variant == Variant::surface || spec.variant == Variant::s_only;
    const Interval s_domain{grid[0], grid[grid.size() - 1]};
    SplineBasisSpec s_spec{BasisKind::constant, 1, s_domain};
    if (uses_s) s_spec = {spec.basis_s_kind, spec.basis_s_kind == BasisKind::constant ? 1 : spec.num_s, s_domain};
    return ModelBases{make_basis({spec.basis_t_kind, spec.num_t, t_domain}), make_basis(s_spec), grid,
                      trapezoid_weights(grid)};
}

ModelBases bases_for(const LongitudinalDataset& data, const ModelSpec& spec) {
    return make_model_bases(spec, spec.t_domain.value_or(data.time_range()), data.grid);
}

Eigen::MatrixXd score_operator(const Eigen::VectorXd& grid, const Basis& basis_s) {
    const auto& dom = basis_s.domain();
    const double tol = 1e-10 * dom.width();
    if (!basis_s.cyclic() && (grid[0] < dom.lo - tol || grid[grid.size() - 1] > dom.hi + tol)) {
        throw ValidationError("functional grid extends outside the s-basis domain");
    }
    return trapezoid_weights(grid).asDiagonal() * basis_s.evaluate(grid);
}

Eigen::MatrixXd functional_scores(const Eigen::MatrixXd& curves, const Eigen::VectorXd& grid, const Basis& basis_s) {
    if (curves.cols() != grid.size()) throw ValidationError("curve width does not match the grid");
    return curves * score_operator(grid, basis_s);
}

Eigen::RowVectorXd beta_row(Variant variant, const Eigen::RowVectorXd& psi_t, const Eigen::RowVectorXd& xi) {
    switch (variant) {
        case Variant::surface: {
            const Eigen::Index l = psi_t.size();
            Eigen::RowVectorXd row(xi.size() * l);
            for (Eigen::Index d = 0; d < xi.size(); ++d) {
                for (Eigen::Index k = 0; k < l; ++k) {
                    row[tensor_index(static_cast<int>(d), static_cast<int>(k), static_cast<int>(l))] = psi_t[k] * xi[d];
                }
            }
            return row;
        }
        case Variant::s_only: return xi;
        case Variant::t_only: return psi_t * xi[0];
        case Variant::constant: return xi.leftCols(1);
    }
    return {};
}

DesignMatrices assemble_design(const LongitudinalDataset& data, const ModelSpec& spec) {
    data.validate();
    return assemble_design(data, spec, bases_for(data, spec));
}

DesignMatrices assemble_design(const LongitudinalDataset& data, const ModelSpec& spec, const ModelBases& bases) {
    const Eigen::Index n = data.total_observations();
    const Eigen::Index num_clusters = static_cast<Eigen::Index>(data.clusters.size());

    std::vector<double> times;
    std::vector<Eigen::Index> curve_rows;
    DesignMatrices out;
    out.variant = spec.variant;
    out.bases = std::make_shared<const ModelBases>(bases);
    out.Z = Eigen::MatrixXd::Zero(n, num_clusters);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < num_clusters; ++i) {
        const auto& obs = data.clusters[static_cast<std::size_t>(i)].observations;
        for (std::size_t j = 0; j < obs.size(); ++j, ++r) {
            times.push_back(obs[j].t);
            curve_rows.push_back(obs[j].curve_row);
            out.Z(r, i) = 1.0;
            out.cluster_of_row.push_back(static_cast<int>(i));
            out.row_index.emplace_back(static_cast<int>(i), static_cast<int>(j));
        }
    }

    out.A = bases.t.evaluate(std::span<const double>(times));
    const Eigen::MatrixXd op = score_operator(bases.grid, bases.s);
    out.Xi.resize(n, op.cols());
    for (Eigen::Index k = 0; k < n; ++k) out.Xi.row(k) = data.curves.row(curve_rows[static_cast<std::size_t>(k)]) * op;

    const Eigen::RowVectorXd probe = beta_row(spec.variant, out.A.row(0), out.Xi.row(0));
    out.B.resize(n, probe.size());
    for (Eigen::Index k = 0; k < n; ++k) out.B.row(k) = beta_row(spec.variant, out.A.row(k), out.Xi.row(k));
    return out;
}

Eigen::MatrixXd DesignMatrices::fixed_design() const {
    Eigen::MatrixXd x(A.rows(), A.cols() + B.cols());
    x << A, B;
    return x;
}

}  // namespace fqr

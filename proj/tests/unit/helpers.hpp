#pragma once

#include "fqr/design.hpp"
#include "fqr/simgen.hpp"

#include <functional>
#include <string>
#include <vector>

namespace fqr::testing {

// Dataset with cluster sizes `sizes`; observation r (global order) gets
// curve(r, s) on the grid, time t(r) and response y(r).
inline LongitudinalDataset make_dataset(const std::vector<int>& sizes, const Eigen::VectorXd& grid,
                                        const std::function<double(int, double)>& curve,
                                        const std::function<double(int)>& time,
                                        const std::function<double(int)>& response) {
    LongitudinalDataset data;
    data.grid = grid;
    int total = 0;
    for (int n : sizes) total += n;
    data.curves.resize(total, grid.size());
    int r = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        ClusterRecord c;
        c.cluster_id = "c" + std::to_string(i + 1);
        for (int j = 0; j < sizes[i]; ++j, ++r) {
            for (Eigen::Index k = 0; k < grid.size(); ++k) data.curves(r, k) = curve(r, grid[k]);
            c.observations.push_back({c.cluster_id + "_" + std::to_string(j + 1), response(r), time(r), r});
        }
        data.clusters.push_back(std::move(c));
    }
    return data;
}

// Small surface-truth simulation on a 25-point grid over [0, 24].
inline SimulatedData small_sim(std::uint64_t seed, int clusters = 12, int n = 5, double sigma_u = 0.5) {
    SimScenario sc;
    sc.num_clusters = clusters;
    sc.n_min = n;
    sc.n_max = n;
    sc.grid = Eigen::VectorXd::LinSpaced(25, 0.0, 24.0);
    sc.alpha_true = alpha_preset("default", sc.t_range);
    sc.beta_true = beta_preset("surface", {0.0, 24.0}, sc.t_range);
    sc.sigma_u = sigma_u;
    sc.tau = 0.5;
    sc.seed = seed;
    return generate(sc);
}

inline ModelSpec small_spec(Variant v = Variant::surface) {
    ModelSpec spec;
    spec.tau = 0.5;
    spec.variant = v;
    spec.num_t = 6;
    spec.num_s = 6;
    spec.t_domain = Interval{0.0, 20.0};
    return spec;
}

}  // namespace fqr::testing

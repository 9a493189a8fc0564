// Simulation properties of cross-validated smoothing selection.

#include "fqr/fitter.hpp"
#include "fqr/simgen.hpp"

#include <doctest.h>

using namespace fqr;

namespace {

SimulatedData selection_sim(std::uint64_t seed, const char* beta, double sigma_u) {
    SimScenario sc;
    sc.num_clusters = 30;
    sc.n_min = 8;
    sc.n_max = 8;
    sc.grid = Eigen::VectorXd::LinSpaced(25, 0.0, 24.0);
    sc.alpha_true = alpha_preset("default", sc.t_range);
    sc.beta_true = beta_preset(beta, {0.0, 24.0}, sc.t_range);
    sc.sigma_u = sigma_u;
    sc.seed = seed;
    return generate(sc);
}

ModelSpec selection_spec() {
    ModelSpec spec;
    spec.t_domain = Interval{0.0, 20.0};
    return spec;
}

const std::vector<double> levels{1e-2, 1.0, 1e2, 1e4};

}  // namespace

TEST_CASE("flat truth drives the beta penalties to the top of the grid") {
    int near_top = 0;
    for (int r = 0; r < 20; ++r) {
        const SimulatedData sim = selection_sim(400 + static_cast<std::uint64_t>(r), "constant", 0.5);
        const ModelSpec spec = selection_spec();
        const DesignMatrices x = assemble_design(sim.dataset, spec);
        SelectionOptions opts;
        opts.grid = LambdaGrid{levels, levels, levels, {1.0}};
        const SmoothingParams sp = select_smoothing(x, sim.dataset.responses(), spec, opts);
        near_top += sp.lambda_beta_s >= 1e2 && sp.lambda_beta_t >= 1e2;
    }
    MESSAGE("beta penalties in the top two grid levels in " << near_top << " of 20 replicates");
    CHECK(near_top >= 16);
}

TEST_CASE("without cluster effects lambda_u lands in the top half of the grid") {
    int top_half = 0;
    for (int r = 0; r < 20; ++r) {
        const SimulatedData sim = selection_sim(500 + static_cast<std::uint64_t>(r), "surface", 0.0);
        const ModelSpec spec = selection_spec();
        const DesignMatrices x = assemble_design(sim.dataset, spec);
        SelectionOptions opts;
        opts.grid = LambdaGrid{levels, levels, levels, levels};
        top_half += select_smoothing(x, sim.dataset.responses(), spec, opts).lambda_u >= 1e2;
    }
    MESSAGE("lambda_u in the top half in " << top_half << " of 20 replicates");
    CHECK(top_half >= 14);
}

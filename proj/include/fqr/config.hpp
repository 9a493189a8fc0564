#pragma once

// Flat `key = value` run configuration.
//
//   # comment
//   tau = 0.1
//   variant = surface
//   responses = "data/responses.csv"     # paths are relative to the file
//   lambda_grid = -4:4:7                  # log10 lo:hi:points
//   lambda_u_grid = 0.1, 1, 10            # explicit values override the grid
//
// Unknown keys are rejected so typos surface immediately.

#include "fqr/design.hpp"
#include "fqr/fitter.hpp"
#include "fqr/simgen.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fqr {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Parses the raw key/value pairs (later duplicates are an error).
KeyValues parse_key_values(std::istream& in);

struct SimulationConfig {
    int clusters = 30;
    int n_min = 8;
    int n_max = 8;
    int grid_points = 49;
    Interval s_range{0.0, 24.0};
    Interval t_range{0.0, 20.0};
    std::string alpha = "default";
    std::string beta = "surface";
    double beta_amplitude = 0.08;
    double sigma_u = 0.5;
    ErrorLaw error = ErrorLaw::normal;
    double error_scale = 1.0;
    double skew_shape = 2.0;
    double hetero_slope = 1.0;
    double noise_sd = 0.2;
    CurveCoefficients pair_a{1.0, 0.5, 0.5, 0.0, 0.0};
    CurveCoefficients pair_b{-1.0, -0.5, -0.5, 0.0, 0.0};

    SimScenario scenario(double tau, std::uint64_t seed) const;
};

struct RunConfig {
    std::optional<std::filesystem::path> responses;
    std::optional<std::filesystem::path> curves;
    std::optional<std::filesystem::path> target_curves;
    std::optional<std::filesystem::path> fit;

    ModelSpec spec;
    double pve = 0.99;
    bool smooth_curves = true;

    std::optional<SmoothingParams> smoothing;  ///< fixed lambdas skip selection
    LambdaGrid lambda_grid = LambdaGrid::log_spaced();
    int cv_folds = 5;
    std::optional<double> bandwidth;

    std::optional<std::string> target;  ///< linear_predictor | difference
    std::optional<Eigen::VectorXd> t_points;

    std::vector<Variant> compare_variants{Variant::surface, Variant::s_only, Variant::t_only, Variant::constant};

    int b_bias = 100;
    int b_sd = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int threads = 1;
    bool write_replicates = false;
    bool plot = false;

    SimulationConfig simulation;

    KeyValues echo;  ///< the parsed pairs, for provenance

    void validate() const;
};

/// Builds a RunConfig; relative paths resolve against `base_dir`.
RunConfig make_run_config(const KeyValues& values, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Accepts "lo:hi:count" (inclusive, evenly spaced) or a comma list.
Eigen::VectorXd parse_points(const std::string& text, const std::string& key);

}  // namespace fqr

#pragma once

// The command layer behind the `fqr` tool. Each command reads a RunConfig and
// writes its outputs into a directory.

#include "fqr/artifact.hpp"
#include "fqr/config.hpp"
#include "fqr/infer.hpp"
#include "fqr/io.hpp"

#include <filesystem>

namespace fqr {

/// Ingested data with the covariate curves replaced by their FPCA smooth.
struct PreparedData {
    IngestedData raw;
    LongitudinalDataset dataset;
    SmootherSummary smoother;
};

PreparedData prepare_data(const RunConfig& config);

/// Selects smoothing (unless fixed in the config) and fits.
FitArtifact fit_model(const RunConfig& config, const PreparedData& data);

/// Target from `target_curves`: one row gives a linear predictor, two rows
/// (A then B) a difference. Curves must lie on the fit grid.
TargetSpec load_target(const RunConfig& config, const FitResult& fit);

void cmd_fit(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_predict(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_bootstrap(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_compare(const RunConfig& config, const std::filesystem::path& out_dir);
void cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace fqr

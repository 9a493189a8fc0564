#pragma once

// fit.json: everything needed to rebuild the predictor of a fitted model,
// plus a config echo and provenance. The only time-dependent field is
// `created_at`.

#include "fqr/fitter.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace fqr {

inline constexpr int fit_format_version = 1;
inline constexpr const char* fqr_version = "0.1.0";

struct SmootherSummary {
    bool applied = false;
    double pve = 0.0;
    double pve_achieved = 0.0;
    int components = 0;
    double noise_variance = 0.0;
};

struct FitArtifact {
    FitResult fit;
    std::vector<std::string> cluster_ids;
    std::vector<std::pair<std::string, std::string>> config;
    SmootherSummary smoother;
    std::string created_at;
};

std::string fit_to_json(const FitArtifact& artifact);
/// Throws ValidationError on malformed input or a format-version mismatch.
FitArtifact fit_from_json(const std::string& text);

void save_fit(const std::filesystem::path& path, const FitArtifact& artifact);
FitArtifact load_fit(const std::filesystem::path& path);

/// Current UTC time as ISO-8601.
std::string utc_timestamp();

}  // namespace fqr

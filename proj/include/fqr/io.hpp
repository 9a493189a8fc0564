#pragma once

// Delimited-text ingestion and serialization.
//
// responses: header `cluster_id,obs_id,t,y`, one row per observation.
// curves:    header `obs_id,<s_1>,...,<s_H>`; the numeric column names form the
//            grid, and an empty (or NA) cell is a missing value.

#include "fqr/design.hpp"
#include "fqr/fitter.hpp"
#include "fqr/fpca.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fqr {

struct CurveTable {
    Eigen::VectorXd grid;
    Eigen::MatrixXd values;  ///< NaN = missing
    std::vector<std::string> obs_ids;
};

/// Raw curves plus a dataset whose curve rows index into them. The dataset's
/// curves are the raw values until replaced by a smoother.
struct IngestedData {
    FunctionalSample sample;
    LongitudinalDataset dataset;
};

CurveTable read_curves(std::istream& in);
CurveTable read_curves(const std::filesystem::path& path);

IngestedData ingest(std::istream& responses, std::istream& curves);
IngestedData ingest(const std::filesystem::path& responses_path, const std::filesystem::path& curves_path);

void write_responses(std::ostream& out, const LongitudinalDataset& data, const std::vector<std::string>& obs_ids = {});
void write_curves(std::ostream& out, const CurveTable& table);
/// Writes both files of an ingested dataset (raw sample values for the curves).
void write_dataset(std::ostream& responses, std::ostream& curves, const IngestedData& data);

/// Shortest text with 17 significant digits; NaN is written as an empty cell.
std::string format_number(double v);
/// Strict full-string parse; throws ValidationError naming `what` on failure.
double parse_number(const std::string& text, const std::string& what);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace fqr

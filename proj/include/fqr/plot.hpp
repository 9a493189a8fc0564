#pragma once

#include <Eigen/Dense>

#include <string>

namespace fqr {

struct BandPlot {
    Eigen::VectorXd t;
    Eigen::VectorXd estimate;  ///< unadjusted, drawn dashed
    Eigen::VectorXd adjusted;  ///< bias-adjusted, drawn solid
    Eigen::VectorXd lo;
    Eigen::VectorXd hi;
    std::string title;
    std::string x_label = "t";
    std::string y_label = "estimate";
};

/// Standalone SVG document: shaded pointwise band, both curves, axes and ticks.
std::string band_svg(const BandPlot& plot);

}  // namespace fqr

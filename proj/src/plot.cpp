#include "fqr/plot.hpp"

#include "fqr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace fqr {

namespace {

constexpr double width = 640.0;
constexpr double height = 400.0;
constexpr double left = 70.0;
constexpr double right = 20.0;
constexpr double top = 40.0;
constexpr double bottom = 50.0;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Roughly five round tick positions covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (span / step <= 6.0) break;
    }
    std::vector<double> out;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(v);
    return out;
}

}  // namespace

std::string band_svg(const BandPlot& p) {
    const Eigen::Index n = p.t.size();
    if (n < 2 || p.estimate.size() != n || p.adjusted.size() != n || p.lo.size() != n || p.hi.size() != n) {
        throw ValidationError("band plot needs at least 2 points and equal-length series");
    }
    double ylo = std::min({p.lo.minCoeff(), p.estimate.minCoeff(), p.adjusted.minCoeff()});
    double yhi = std::max({p.hi.maxCoeff(), p.estimate.maxCoeff(), p.adjusted.maxCoeff()});
    if (!(yhi > ylo)) {
        ylo -= 1.0;
        yhi += 1.0;
    }
    const double pad = 0.05 * (yhi - ylo);
    ylo -= pad;
    yhi += pad;
    const double xlo = p.t.minCoeff();
    const double xhi = p.t.maxCoeff();
    const double pw = width - left - right;
    const double ph = height - top - bottom;
    auto sx = [&](double x) { return left + (x - xlo) / (xhi - xlo) * pw; };
    auto sy = [&](double y) { return top + (yhi - y) / (yhi - ylo) * ph; };
    auto polyline = [&](const Eigen::VectorXd& y) {
        std::string pts;
        for (Eigen::Index k = 0; k < n; ++k) pts += fmt(sx(p.t[k])) + "," + fmt(sy(y[k])) + " ";
        return pts;
    };

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(p.title)
      << "</text>\n";

    std::string band;
    for (Eigen::Index k = 0; k < n; ++k) band += fmt(sx(p.t[k])) + "," + fmt(sy(p.hi[k])) + " ";
    for (Eigen::Index k = n; k-- > 0;) band += fmt(sx(p.t[k])) + "," + fmt(sy(p.lo[k])) + " ";
    s << "<polygon points=\"" << band << "\" fill=\"#f4a261\" fill-opacity=\"0.35\" stroke=\"none\"/>\n";
    if (ylo < 0.0 && yhi > 0.0) {
        s << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(sy(0.0)) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
          << fmt(sy(0.0)) << "\" stroke=\"#999\" stroke-dasharray=\"2,3\"/>\n";
    }
    s << "<polyline points=\"" << polyline(p.estimate)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/>\n";
    s << "<polyline points=\"" << polyline(p.adjusted) << "\" fill=\"none\" stroke=\"#e76f51\" stroke-width=\"2\"/>\n";

    // Axes.
    s << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
      << fmt(top + ph) << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\"" << fmt(top + ph)
      << "\" stroke=\"black\"/>\n";
    for (double v : ticks(xlo, xhi)) {
        s << "<line x1=\"" << fmt(sx(v)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(sx(v)) << "\" y2=\""
          << fmt(top + ph + 5) << "\" stroke=\"black\"/>";
        s << "<text x=\"" << fmt(sx(v)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
          << tick_label(v) << "</text>\n";
    }
    for (double v : ticks(ylo, yhi)) {
        s << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(sy(v)) << "\" x2=\"" << fmt(left) << "\" y2=\""
          << fmt(sy(v)) << "\" stroke=\"black\"/>";
        s << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(sy(v) + 4) << "\" text-anchor=\"end\">" << tick_label(v)
          << "</text>\n";
    }
    s << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(height - 10) << "\" text-anchor=\"middle\">"
      << escape(p.x_label) << "</text>\n";
    s << "<text transform=\"translate(16," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(p.y_label) << "</text>\n";

    // Legend.
    const double lx = left + pw - 190;
    s << "<line x1=\"" << lx << "\" y1=\"" << top + 10 << "\" x2=\"" << lx + 25 << "\" y2=\"" << top + 10
      << "\" stroke=\"#e76f51\" stroke-width=\"2\"/><text x=\"" << lx + 30 << "\" y=\"" << top + 14
      << "\">bias-adjusted</text>\n";
    s << "<line x1=\"" << lx << "\" y1=\"" << top + 26 << "\" x2=\"" << lx + 25 << "\" y2=\"" << top + 26
      << "\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6,4\"/><text x=\"" << lx + 30 << "\" y=\""
      << top + 30 << "\">unadjusted</text>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace fqr

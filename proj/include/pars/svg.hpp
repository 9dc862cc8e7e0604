#pragma once

// Minimal SVG heatmaps: one <rect> per grid cell, colors from a 256-entry
// linear ramp (dark blue -> white -> dark red).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "pars/error.hpp"
#include "pars/nn_core.hpp"
#include "pars/text_io.hpp"

namespace pars {

struct Rgb {
    int r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};

/// Entry k of the ramp, k in [0, 255].
inline Rgb ramp_color(int k) {
    k = std::clamp(k, 0, 255);
    const double t = k / 255.0;
    auto lerp = [](double a, double b, double u) { return static_cast<int>(std::lround(a + (b - a) * u)); };
    if (t <= 0.5) {
        const double u = t / 0.5;
        return {lerp(33, 255, u), lerp(62, 255, u), lerp(160, 255, u)};
    }
    const double u = (t - 0.5) / 0.5;
    return {lerp(255, 165, u), lerp(255, 25, u), lerp(255, 30, u)};
}

/// Ramp index for v on [lo, hi]; NaN maps to -1 (drawn grey).
inline int ramp_index(double v, double lo, double hi) {
    if (std::isnan(v)) return -1;
    if (!(hi > lo)) return 128;
    return std::clamp(static_cast<int>(std::floor((v - lo) / (hi - lo) * 256.0)), 0, 255);
}

inline std::string hex(const Rgb& c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
    return buf;
}

/// values(i, j): row i drawn bottom-up (row 0 at the bottom), column j left
/// to right. Color limits default to the finite min/max.
inline void write_heatmap_svg(std::ostream& os, const Matrix& values, const std::string& title, int cell = 12,
                              double lo = NAN, double hi = NAN) {
    if (values.rows() < 1 || values.cols() < 1) throw InvalidArgument("write_heatmap_svg: empty grid");
    if (cell < 1) throw InvalidArgument("write_heatmap_svg: cell size must be >= 1");
    if (std::isnan(lo) || std::isnan(hi)) {
        double mn = INFINITY, mx = -INFINITY;
        for (Eigen::Index k = 0; k < values.size(); ++k)
            if (std::isfinite(values.data()[k])) {
                mn = std::min(mn, values.data()[k]);
                mx = std::max(mx, values.data()[k]);
            }
        if (std::isnan(lo)) lo = std::isfinite(mn) ? mn : 0.0;
        if (std::isnan(hi)) hi = std::isfinite(mx) ? mx : 1.0;
    }
    const long w = values.cols() * cell, h = values.rows() * cell, top = 24, bar = 16;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h + top + bar + 20
       << "\">\n";
    std::string safe;
    for (char ch : title) {
        if (ch == '<') safe += "&lt;";
        else if (ch == '>') safe += "&gt;";
        else if (ch == '&') safe += "&amp;";
        else safe += ch;
    }
    os << "<text x=\"2\" y=\"16\" font-family=\"monospace\" font-size=\"12\">" << safe << "</text>\n";
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = 0; j < values.cols(); ++j) {
            const int k = ramp_index(values(i, j), lo, hi);
            os << "<rect x=\"" << j * cell << "\" y=\"" << top + (values.rows() - 1 - i) * cell << "\" width=\""
               << cell << "\" height=\"" << cell << "\" fill=\"" << (k < 0 ? std::string("#888888") : hex(ramp_color(k)))
               << "\"/>\n";
        }
    // color bar
    const double step = static_cast<double>(w) / 256.0;
    for (int k = 0; k < 256; ++k)
        os << "<rect x=\"" << format_real(k * step) << "\" y=\"" << top + h + 4 << "\" width=\"" << format_real(step)
           << "\" height=\"" << bar << "\" fill=\"" << hex(ramp_color(k)) << "\"/>\n";
    os << "<text x=\"2\" y=\"" << top + h + bar + 18 << "\" font-family=\"monospace\" font-size=\"10\">"
       << format_real(lo) << "</text>\n";
    os << "<text x=\"" << w - 2 << "\" y=\"" << top + h + bar + 18
       << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"10\">" << format_real(hi) << "</text>\n";
    os << "</svg>\n";
}

}  // namespace pars

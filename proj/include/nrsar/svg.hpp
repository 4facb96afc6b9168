#pragma once

// Static SVG line chart of predicted against reference SAR over time.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <span>
#include <string>

#include "nrsar/error.hpp"

namespace nrsar {

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

} // namespace detail

inline void write_series_svg(std::ostream& os, const std::string& title, std::span<const double> t,
                             std::span<const double> predicted, std::span<const double> reference) {
    if (t.size() != predicted.size() || t.size() != reference.size())
        throw DimensionError("chart series differ in length");
    constexpr double W = 720, H = 320, ml = 56, mr = 16, mt = 32, mb = 40;
    double t0 = 0, t1 = 1, y0 = -10, y1 = 10;
    if (!t.empty()) {
        t0 = t.front();
        t1 = std::max(t.back(), t0 + 1e-9);
        const auto [pmin, pmax] = std::minmax_element(predicted.begin(), predicted.end());
        const auto [rmin, rmax] = std::minmax_element(reference.begin(), reference.end());
        y0 = std::floor(std::min(*pmin, *rmin) / 5.0) * 5.0;
        y1 = std::ceil(std::max(*pmax, *rmax) / 5.0) * 5.0;
        if (y1 <= y0) y1 = y0 + 5;
    }
    const auto X = [&](double v) { return ml + (v - t0) / (t1 - t0) * (W - ml - mr); };
    const auto Y = [&](double v) { return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb); };

    os << std::fixed << std::setprecision(2);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << detail::xml_escape(title)
       << "</text>\n";
    os << "<g stroke=\"#ccc\" font-family=\"sans-serif\" font-size=\"10\">\n";
    for (double v = y0; v <= y1 + 1e-9; v += 5.0) {
        os << "<line x1=\"" << ml << "\" x2=\"" << W - mr << "\" y1=\"" << Y(v) << "\" y2=\"" << Y(v) << "\"/>";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << Y(v) + 3 << "\" text-anchor=\"end\" stroke=\"none\">"
           << std::setprecision(0) << v << std::setprecision(2) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 8
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">time (s)</text>\n";
    os << "<text x=\"14\" y=\"" << (mt + H - mb) / 2 << "\" font-family=\"sans-serif\" font-size=\"11\" transform=\"rotate(-90 14 "
       << (mt + H - mb) / 2 << ")\" text-anchor=\"middle\">SAR (dB)</text>\n";
    const auto line = [&](std::span<const double> v, const char* colour) {
        os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << X(t[i]) << ',' << Y(v[i]);
        os << "\"/>\n";
    };
    line(reference, "#1f77b4");
    line(predicted, "#d62728");
    os << "<text x=\"" << W - mr - 150 << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f77b4\">reference</text>\n";
    os << "<text x=\"" << W - mr - 80 << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">predicted</text>\n";
    os << "</svg>\n";
    os.unsetf(std::ios::floatfield);
}

} // namespace nrsar

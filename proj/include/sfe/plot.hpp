#pragma once

// Self-contained SVG line plot of overlaid series sharing a time base.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "sfe/error.hpp"
#include "sfe/signal.hpp"

namespace sfe {

struct PlotSeries {
    std::string label;
    TimeSeries data;
    std::string color;
};

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

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

// Min/max per pixel column keeps the envelope of dense signals.
inline std::vector<std::size_t> decimate(const TimeSeries& s, std::size_t buckets) {
    std::vector<std::size_t> idx;
    if (s.size() <= 2 * buckets) {
        for (std::size_t k = 0; k < s.size(); ++k) idx.push_back(k);
        return idx;
    }
    const double per = static_cast<double>(s.size()) / static_cast<double>(buckets);
    for (std::size_t b = 0; b < buckets; ++b) {
        const auto lo = static_cast<std::size_t>(per * static_cast<double>(b));
        const auto hi = std::min(s.size(), static_cast<std::size_t>(per * static_cast<double>(b + 1)));
        std::size_t imin = lo, imax = lo;
        for (std::size_t k = lo; k < hi; ++k) {
            if (s[k] < s[imin]) imin = k;
            if (s[k] > s[imax]) imax = k;
        }
        idx.push_back(std::min(imin, imax));
        if (imin != imax) idx.push_back(std::max(imin, imax));
    }
    return idx;
}

}  // namespace detail

inline std::string overlay_svg(const std::vector<PlotSeries>& series, const std::string& title,
                               const std::string& x_label, const std::string& y_label) {
    if (series.empty()) throw validation_error("plot: no series");
    const double W = 960, H = 480, ml = 80, mr = 20, mt = 40, mb = 50;
    const double pw = W - ml - mr, ph = H - mt - mb;

    double tmax = 0.0, ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const auto& s : series) {
        if (s.data.empty()) continue;
        tmax = std::max(tmax, s.data.time(s.data.size() - 1));
        for (double v : s.data.values()) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (!std::isfinite(ymin)) ymin = -1.0, ymax = 1.0;
    if (ymax - ymin < 1e-12) ymin -= 1.0, ymax += 1.0;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    if (tmax <= 0.0) tmax = 1.0;

    auto X = [&](double t) { return ml + pw * t / tmax; };
    auto Y = [&](double y) { return mt + ph * (1.0 - (y - ymin) / (ymax - ymin)); };

    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"480\" viewBox=\"0 0 960 480\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"480\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
           detail::xml_escape(title) + "</text>\n";
    svg += "<rect x=\"" + detail::fmt("%.1f", ml) + "\" y=\"" + detail::fmt("%.1f", mt) + "\" width=\"" +
           detail::fmt("%.1f", pw) + "\" height=\"" + detail::fmt("%.1f", ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double tv = tmax * i / 5.0, yv = ymin + (ymax - ymin) * i / 5.0;
        svg += "<text x=\"" + detail::fmt("%.1f", X(tv)) + "\" y=\"" + detail::fmt("%.1f", mt + ph + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fmt("%.4g", tv) + "</text>\n";
        svg += "<text x=\"" + detail::fmt("%.1f", ml - 6) + "\" y=\"" + detail::fmt("%.1f", Y(yv) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fmt("%.4g", yv) + "</text>\n";
        svg += "<line x1=\"" + detail::fmt("%.1f", ml) + "\" x2=\"" + detail::fmt("%.1f", ml + pw) + "\" y1=\"" +
               detail::fmt("%.1f", Y(yv)) + "\" y2=\"" + detail::fmt("%.1f", Y(yv)) + "\" stroke=\"#ddd\"/>\n";
    }
    svg += "<text x=\"480\" y=\"" + detail::fmt("%.1f", H - 10) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           detail::xml_escape(x_label) + "</text>\n";
    svg += "<text x=\"16\" y=\"240\" transform=\"rotate(-90 16 240)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
           detail::xml_escape(y_label) + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        std::string pts;
        for (std::size_t k : detail::decimate(s.data, static_cast<std::size_t>(pw))) {
            pts += detail::fmt("%.2f", X(s.data.time(k))) + "," + detail::fmt("%.2f", Y(s.data[k])) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
        const double ly = mt + 16 + 18.0 * static_cast<double>(i);
        svg += "<line x1=\"" + detail::fmt("%.1f", ml + 12) + "\" x2=\"" + detail::fmt("%.1f", ml + 36) + "\" y1=\"" +
               detail::fmt("%.1f", ly) + "\" y2=\"" + detail::fmt("%.1f", ly) + "\" stroke=\"" + s.color +
               "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fmt("%.1f", ml + 42) + "\" y=\"" + detail::fmt("%.1f", ly + 4) +
               "\" font-family=\"sans-serif\" font-size=\"12\">" + detail::xml_escape(s.label) + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace sfe

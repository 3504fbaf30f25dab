#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace rydberg::cli {

namespace {

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

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// 1, 2 or 5 times a power of ten, giving roughly `target` ticks.
double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

}  // namespace

std::string fmt(double v, int digits) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string render_svg(const PlotSpec& spec) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : spec.series)
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            x0 = std::min(x0, x), x1 = std::max(x1, x);
            y0 = std::min(y0, y), y1 = std::max(y1, y);
        }
    if (!(x0 <= x1)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (x1 - x0 <= 0.0) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 <= 0.0) {
        const double pad = std::max(1e-3, std::abs(y0) * 1e-3);
        y0 -= pad, y1 += pad;
    }
    const double ypad = 0.05 * (y1 - y0);
    y0 -= ypad, y1 += ypad;

    const double left = 80.0, right = 20.0, top = 40.0, bottom = 55.0;
    const double pw = spec.width - left - right, ph = spec.height - top - bottom;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(spec.width) + "\" height=\"" + px(spec.height) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<polyline fill=\"none\" stroke=\"black\" points=\"" + px(left) + "," + px(top) + " " + px(left) + "," +
         px(top + ph) + " " + px(left + pw) + "," + px(top + ph) + "\"/>\n";
    o += "<text x=\"" + px(spec.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         escape(spec.title) + "</text>\n";
    o += "<text x=\"" + px(left + pw / 2) + "\" y=\"" + px(spec.height - 12) + "\" text-anchor=\"middle\">" +
         escape(spec.x_label) + "</text>\n";
    o += "<text x=\"16\" y=\"" + px(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         px(top + ph / 2) + ")\">" + escape(spec.y_label) + "</text>\n";

    const double xs = nice_step(x1 - x0, 6), ys = nice_step(y1 - y0, 5);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
        const double t_clean = std::abs(t) < 1e-9 * xs ? 0.0 : t;
        o += "<polyline stroke=\"black\" points=\"" + px(sx(t)) + "," + px(top + ph) + " " + px(sx(t)) + "," +
             px(top + ph + 5) + "\"/>\n";
        o += "<text x=\"" + px(sx(t)) + "\" y=\"" + px(top + ph + 18) + "\" text-anchor=\"middle\">" +
             fmt(t_clean, 6) + "</text>\n";
    }
    for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
        const double t_clean = std::abs(t) < 1e-9 * ys ? 0.0 : t;
        o += "<polyline stroke=\"black\" points=\"" + px(left - 5) + "," + px(sy(t)) + " " + px(left) + "," +
             px(sy(t)) + "\"/>\n";
        o += "<text x=\"" + px(left - 8) + "\" y=\"" + px(sy(t) + 4) + "\" text-anchor=\"end\">" +
             fmt(t_clean, 6) + "</text>\n";
    }

    double legend_y = top + 14;
    for (const auto& s : spec.series) {
        if (s.markers) {
            for (const auto& [x, y] : s.points) {
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                const double cx = sx(x), cy = sy(y);
                o += "<polyline stroke=\"" + s.color + "\" points=\"" + px(cx - 4) + "," + px(cy) + " " +
                     px(cx + 4) + "," + px(cy) + "\"/>\n";
                o += "<polyline stroke=\"" + s.color + "\" points=\"" + px(cx) + "," + px(cy - 4) + " " + px(cx) +
                     "," + px(cy + 4) + "\"/>\n";
            }
        } else if (!s.points.empty()) {
            o += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (const auto& [x, y] : s.points) {
                if (!std::isfinite(x) || !std::isfinite(y)) continue;
                o += (first ? "" : " ") + px(sx(x)) + "," + px(sy(y));
                first = false;
            }
            o += "\"/>\n";
        }
        if (!s.label.empty()) {
            o += "<text x=\"" + px(left + 10) + "\" y=\"" + px(legend_y) + "\" fill=\"" + s.color + "\">" +
                 escape(s.label) + "</text>\n";
            legend_y += 16;
        }
    }
    double note_y = top + 14;
    for (const auto& n : spec.notes) {
        o += "<text x=\"" + px(left + pw - 6) + "\" y=\"" + px(note_y) + "\" text-anchor=\"end\">" + escape(n) +
             "</text>\n";
        note_y += 16;
    }
    o += "</svg>\n";
    return o;
}

}  // namespace rydberg::cli

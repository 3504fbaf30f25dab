#pragma once

// Minimal SVG line plots: polylines, point markers and text, nothing else.

#include <string>
#include <utility>
#include <vector>

namespace rydberg::cli {

struct Series {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;
    bool markers = false;  // draw a small cross at each point instead of a line
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<std::string> notes;  // text lines in the upper right corner
    double width = 720.0;
    double height = 440.0;
};

std::string render_svg(const PlotSpec& spec);

// Shortest round-trip decimal form, stable across runs.
std::string fmt(double v, int digits = 10);

}  // namespace rydberg::cli

#pragma once

#include <string>
#include <vector>

namespace cbr::io {

struct PlotSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::string label;
    std::string color = "#1f77b4";
    bool markers = false;  // points instead of a polyline
};

struct PlotMarker {
    double x = 0.0;
    std::string label;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    std::vector<PlotMarker> markers;  // vertical lines
    bool log_y = false;
};

std::string render_svg(const Plot& plot, int width = 720, int height = 480);
void write_svg_file(const std::string& path, const Plot& plot);

}  // namespace cbr::io

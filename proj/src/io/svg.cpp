#include "cbr/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cbr/csv.hpp"
#include "cbr/errors.hpp"

namespace cbr::io {

namespace {

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

}  // namespace

std::string render_svg(const Plot& plot, int width, int height) {
    const double left = 80, right = 20, top = 40, bottom = 60;
    const double pw = width - left - right;
    const double ph = height - top - bottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    auto ty = [&](double y) { return plot.log_y ? std::log10(std::max(y, 1e-300)) : y; };
    for (const auto& s : plot.series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (plot.log_y && s.y[i] <= 0.0) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (1.0 - (ty(y) - ymin) / (ymax - ymin)) * ph; };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"16\">" << escape(plot.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + k * (xmax - xmin) / 4;
        const double yv = ymin + k * (ymax - ymin) / 4;
        os << "<text class=\"tick\" x=\"" << px(xv) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(xv) << "</text>\n";
        const double ylab = plot.log_y ? std::pow(10.0, yv) : yv;
        os << "<text class=\"tick\" x=\"" << left - 6 << "\" y=\"" << top + (1.0 - k / 4.0) * ph + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fmt(ylab) << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(plot.x_label)
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       << "font-size=\"13\" transform=\"rotate(-90 18 " << top + ph / 2 << ")\">" << escape(plot.y_label)
       << "</text>\n";

    for (const auto& s : plot.series) {
        if (s.markers) {
            os << "<g class=\"series\" fill=\"" << s.color << "\">\n";
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0)) continue;
                os << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i])) << "\" r=\"2\"/>\n";
            }
            os << "</g>\n";
        } else {
            os << "<polyline class=\"series\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
                if (!std::isfinite(s.y[i]) || (plot.log_y && s.y[i] <= 0)) continue;
                os << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
            }
            os << "\"/>\n";
        }
    }
    for (const auto& m : plot.markers) {
        os << "<line class=\"marker\" x1=\"" << fmt(px(m.x)) << "\" x2=\"" << fmt(px(m.x)) << "\" y1=\"" << top
           << "\" y2=\"" << top + ph << "\" stroke=\"#d62728\" stroke-dasharray=\"4 3\"/>\n";
        os << "<text x=\"" << fmt(px(m.x) + 4) << "\" y=\"" << top + 14
           << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">" << escape(m.label) << "</text>\n";
    }
    double ly = top + 16;
    for (const auto& s : plot.series) {
        if (s.label.empty()) continue;
        os << "<text x=\"" << left + pw - 8 << "\" y=\"" << ly << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           << "font-size=\"12\" fill=\"" << s.color << "\">" << escape(s.label) << "</text>\n";
        ly += 16;
    }
    os << "</svg>\n";
    return os.str();
}

void write_svg_file(const std::string& path, const Plot& plot) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write file", path);
    out << render_svg(plot);
}

}  // namespace cbr::io

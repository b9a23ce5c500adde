#include "dergrid/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "dergrid/errors.hpp"

namespace dergrid {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Round a raw tick spacing to a 1/2/5 decade.
double nice_step(double span, int ticks) {
    if (span <= 0.0) return 1.0;
    const double raw = span / ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double r = raw / mag;
    if (r < 1.5) return mag;
    if (r < 3.5) return 2.0 * mag;
    if (r < 7.5) return 5.0 * mag;
    return 10.0 * mag;
}

} // namespace

SvgChart::SvgChart(std::string title, std::string x_label, std::string y_label,
                   int width, int height)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)),
      width_(width), height_(height) {}

void SvgChart::add_series(std::string name, std::vector<double> x, std::vector<double> y,
                          std::string color) {
    if (x.size() != y.size()) throw DimensionError("svg chart: x/y length mismatch");
    if (color.empty()) color = kPalette[series_.size() % (sizeof kPalette / sizeof *kPalette)];
    series_.push_back({std::move(name), std::move(x), std::move(y), std::move(color)});
}

void SvgChart::add_hline(double y, std::string name, std::string color) {
    hlines_.push_back({y, std::move(name), std::move(color)});
}

std::string SvgChart::render() const {
    const double ml = 70, mr = 20, mt = 40, mb = 55;
    const double pw = width_ - ml - mr;
    const double ph = height_ - mt - mb;

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series_) {
        for (double v : s.x) { x_min = std::min(x_min, v); x_max = std::max(x_max, v); }
        for (double v : s.y) { y_min = std::min(y_min, v); y_max = std::max(y_max, v); }
    }
    for (const auto& h : hlines_) { y_min = std::min(y_min, h.y); y_max = std::max(y_max, h.y); }
    if (!std::isfinite(x_min)) { x_min = 0; x_max = 1; }
    if (!std::isfinite(y_min)) { y_min = 0; y_max = 1; }
    if (x_max == x_min) { x_max += 1; x_min -= 1; }
    if (y_max == y_min) { y_max += 1; y_min -= 1; }
    const double y_pad = 0.05 * (y_max - y_min);
    y_min -= y_pad;
    y_max += y_pad;

    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * pw; };
    auto py = [&](double y) { return mt + ph - (y - y_min) / (y_max - y_min) * ph; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
        << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_
        << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width_ / 2 << "\" y=\"22\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">" << title_ << "</text>\n";

    // Axes and grid.
    const double xs = nice_step(x_max - x_min, 8);
    const double ys = nice_step(y_max - y_min, 6);
    out << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
    for (double x = std::ceil(x_min / xs) * xs; x <= x_max + 1e-9; x += xs) {
        out << "<line x1=\"" << fmt(px(x)) << "\" y1=\"" << mt << "\" x2=\"" << fmt(px(x))
            << "\" y2=\"" << mt + ph << "\" stroke=\"#eeeeee\"/>\n";
        out << "<text x=\"" << fmt(px(x)) << "\" y=\"" << mt + ph + 16
            << "\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
    }
    for (double y = std::ceil(y_min / ys) * ys; y <= y_max + 1e-9; y += ys) {
        out << "<line x1=\"" << ml << "\" y1=\"" << fmt(py(y)) << "\" x2=\"" << ml + pw
            << "\" y2=\"" << fmt(py(y)) << "\" stroke=\"#eeeeee\"/>\n";
        out << "<text x=\"" << ml - 6 << "\" y=\"" << fmt(py(y) + 4)
            << "\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
    }
    out << "</g>\n";
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height_ - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << x_label_ << "</text>\n";
    out << "<text x=\"18\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 " << mt + ph / 2 << ")\">" << y_label_ << "</text>\n";

    for (const auto& h : hlines_) {
        out << "<line x1=\"" << ml << "\" y1=\"" << fmt(py(h.y)) << "\" x2=\"" << ml + pw
            << "\" y2=\"" << fmt(py(h.y)) << "\" stroke=\"" << h.color
            << "\" stroke-dasharray=\"6 4\"/>\n";
    }

    for (const auto& s : series_) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) out << ' ';
            out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
        }
        out << "\"/>\n";
    }

    // Legend.
    double ly = mt + 14;
    out << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (const auto& s : series_) {
        out << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << ml + pw - 126 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly << "\">" << s.name << "</text>\n";
        ly += 16;
    }
    for (const auto& h : hlines_) {
        out << "<line x1=\"" << ml + pw - 150 << "\" y1=\"" << ly - 4 << "\" x2=\""
            << ml + pw - 126 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << h.color
            << "\" stroke-dasharray=\"6 4\"/>\n";
        out << "<text x=\"" << ml + pw - 120 << "\" y=\"" << ly << "\">" << h.name << "</text>\n";
        ly += 16;
    }
    out << "</g>\n</svg>\n";
    return out.str();
}

void SvgChart::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write plot file: " + path);
    out << render();
}

} // namespace dergrid

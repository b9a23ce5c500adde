#pragma once

#include <string>
#include <vector>

namespace dergrid {

// Minimal standalone SVG line-chart writer used for the run and sweep plots.
class SvgChart {
public:
    SvgChart(std::string title, std::string x_label, std::string y_label,
             int width = 900, int height = 480);

    void add_series(std::string name, std::vector<double> x, std::vector<double> y,
                    std::string color = "");
    // Horizontal reference line (e.g. a voltage limit).
    void add_hline(double y, std::string name, std::string color = "#888888");

    std::string render() const;
    void save(const std::string& path) const;

private:
    struct Series {
        std::string name;
        std::vector<double> x, y;
        std::string color;
    };
    struct HLine {
        double y;
        std::string name, color;
    };

    std::string title_, x_label_, y_label_;
    int width_, height_;
    std::vector<Series> series_;
    std::vector<HLine> hlines_;
};

} // namespace dergrid

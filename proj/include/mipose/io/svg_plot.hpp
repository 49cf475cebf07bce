#pragma once

// Minimal SVG chart emitters for benchmark reports: multi-series line charts
// (loss curves, keypoint paths) and labeled bar charts (AP, latency).

#include <string>
#include <vector>

namespace mipose {

struct PlotSeries {
    std::string label;
    std::vector<double> xs;
    std::vector<double> ys;
};

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series);

struct BarEntry {
    std::string label;
    double value = 0.0;
};

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<BarEntry>& bars);

}  // namespace mipose

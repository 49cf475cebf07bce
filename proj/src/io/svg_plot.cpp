#include "mipose/io/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mipose {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kLeft = 64;
constexpr int kRight = 24;
constexpr int kTop = 40;
constexpr int kBottom = 52;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b"};
constexpr int kPaletteSize = 6;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Axis {
    double lo = 0.0, hi = 1.0, step = 0.2;
};

// Round the range outward to multiples of a 1/2/5 step, ~5 intervals.
Axis nice_axis(double lo, double hi) {
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double norm = raw / mag;
    double step = 10.0 * mag;
    if (norm <= 1.0) step = 1.0 * mag;
    else if (norm <= 2.0) step = 2.0 * mag;
    else if (norm <= 5.0) step = 5.0 * mag;
    Axis a;
    a.step = step;
    a.lo = std::floor(lo / step) * step;
    a.hi = std::ceil(hi / step) * step;
    if (a.lo == a.hi) a.hi = a.lo + step;
    return a;
}

void open_svg(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
        << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" "
           "font-size=\"15\">"
        << escape(title) << "</text>\n";
}

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<PlotSeries>& series) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        if (s.xs.size() != s.ys.size())
            throw std::invalid_argument("write_line_chart: series '" + s.label +
                                        "' has mismatched xs/ys");
        for (double x : s.xs) {
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
        }
        for (double y : s.ys) {
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    const Axis ax = nice_axis(xmin, xmax);
    const Axis ay = nice_axis(ymin, ymax);
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto sy = [&](double y) { return kTop + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_line_chart: cannot open " + path);
    open_svg(out, title);

    for (double v = ax.lo; v <= ax.hi + 1e-9 * ax.step; v += ax.step) {
        out << "<line x1=\"" << sx(v) << "\" y1=\"" << kTop << "\" x2=\"" << sx(v)
            << "\" y2=\"" << kTop + ph << "\" stroke=\"#eeeeee\"/>\n";
        out << "<text x=\"" << sx(v) << "\" y=\"" << kTop + ph + 16
            << "\" text-anchor=\"middle\">" << fmt(v) << "</text>\n";
    }
    for (double v = ay.lo; v <= ay.hi + 1e-9 * ay.step; v += ay.step) {
        out << "<line x1=\"" << kLeft << "\" y1=\"" << sy(v) << "\" x2=\""
            << kLeft + pw << "\" y2=\"" << sy(v) << "\" stroke=\"#eeeeee\"/>\n";
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(v) + 4
            << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
        << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444444\"/>\n";
    out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 14
        << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << kTop + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kTop + ph / 2
        << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        if (s.xs.empty()) continue;
        out << "<polyline fill=\"none\" stroke=\""
            << kPalette[i % kPaletteSize] << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t j = 0; j < s.xs.size(); ++j)
            out << sx(s.xs[j]) << ',' << sy(s.ys[j]) << ' ';
        out << "\"/>\n";
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double ly = kTop + 10 + 16.0 * static_cast<double>(i);
        out << "<line x1=\"" << kLeft + pw - 120 << "\" y1=\"" << ly << "\" x2=\""
            << kLeft + pw - 96 << "\" y2=\"" << ly << "\" stroke=\""
            << kPalette[i % kPaletteSize] << "\" stroke-width=\"1.8\"/>\n";
        out << "<text x=\"" << kLeft + pw - 90 << "\" y=\"" << ly + 4 << "\">"
            << escape(series[i].label) << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write_line_chart: write failed for " + path);
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<BarEntry>& bars) {
    double ymax = 0.0;
    for (const auto& b : bars) ymax = std::max(ymax, b.value);
    const Axis ay = nice_axis(0.0, ymax > 0 ? ymax : 1.0);
    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto sy = [&](double y) { return kTop + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_bar_chart: cannot open " + path);
    open_svg(out, title);

    for (double v = ay.lo; v <= ay.hi + 1e-9 * ay.step; v += ay.step) {
        out << "<line x1=\"" << kLeft << "\" y1=\"" << sy(v) << "\" x2=\""
            << kLeft + pw << "\" y2=\"" << sy(v) << "\" stroke=\"#eeeeee\"/>\n";
        out << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(v) + 4
            << "\" text-anchor=\"end\">" << fmt(v) << "</text>\n";
    }
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
        << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444444\"/>\n";
    out << "<text x=\"16\" y=\"" << kTop + ph / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kTop + ph / 2
        << ")\">" << escape(y_label) << "</text>\n";

    const double slot = pw / std::max<std::size_t>(1, bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const double x = kLeft + slot * (static_cast<double>(i) + 0.2);
        const double w = slot * 0.6;
        const double y = sy(bars[i].value);
        out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w
            << "\" height=\"" << kTop + ph - y << "\" fill=\""
            << kPalette[i % kPaletteSize] << "\"/>\n";
        out << "<text x=\"" << x + w / 2 << "\" y=\"" << y - 5
            << "\" text-anchor=\"middle\">" << fmt(bars[i].value) << "</text>\n";
        out << "<text x=\"" << x + w / 2 << "\" y=\"" << kTop + ph + 16
            << "\" text-anchor=\"middle\">" << escape(bars[i].label) << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("write_bar_chart: write failed for " + path);
}

}  // namespace mipose

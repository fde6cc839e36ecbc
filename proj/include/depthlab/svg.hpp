#pragma once

// Minimal self-contained SVG output: line plots and boxplots.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "depthlab/error.hpp"
#include "depthlab/simlab.hpp"

namespace depthlab::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotOptions {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool log_y = false;
    std::optional<double> asymptote;  // vertical dashed line at this x
    int width = 640;
    int height = 420;
};

inline std::string escape(const std::string& s) {
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

namespace detail {

inline const char* palette(std::size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
    return colors[i % 8];
}

/// Roughly five round tick positions covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) t.push_back(std::fabs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

struct Frame {
    double x0, x1, y0, y1;  // data range
    double left = 70, right = 20, top = 40, bottom = 55;
    int width = 640, height = 420;

    double sx(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
    double sy(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

inline void pad(double& lo, double& hi) {
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    } else {
        const double m = 0.05 * (hi - lo);
        lo -= m;
        hi += m;
    }
}

inline std::string header(int w, int h, const std::string& title) {
    return fmt::format(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n"
        "<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">{}</text>\n",
        w, h, w, h, w, h, w / 2, escape(title));
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel, bool log_y,
                        const std::vector<double>& xticks, const std::vector<std::string>& xtick_labels) {
    std::string s;
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
                     f.left, f.top, f.width - f.left - f.right, f.height - f.top - f.bottom);
    for (std::size_t i = 0; i < xticks.size(); ++i) {
        const double x = f.sx(xticks[i]);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", x,
                         f.height - f.bottom, x, f.height - f.bottom + 5);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                         "font-size=\"11\">{}</text>\n",
                         x, f.height - f.bottom + 18, escape(xtick_labels[i]));
    }
    for (double t : ticks(f.y0, f.y1)) {
        const double y = f.sy(t);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", f.left - 5,
                         y, f.left, y);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"#dddddd\"/>\n", f.left, y,
                         f.width - f.right, y);
        const std::string label = log_y ? fmt::format("1e{:g}", t) : fmt::format("{:g}", t);
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-family=\"sans-serif\" "
                         "font-size=\"11\">{}</text>\n",
                         f.left - 8, y + 4, escape(label));
    }
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                     "font-size=\"13\">{}</text>\n",
                     (f.left + f.width - f.right) / 2, f.height - 12.0, escape(xlabel));
    s += fmt::format("<text x=\"16\" y=\"{:.2f}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
                     "transform=\"rotate(-90 16 {:.2f})\">{}</text>\n",
                     (f.top + f.height - f.bottom) / 2, (f.top + f.height - f.bottom) / 2, escape(ylabel));
    return s;
}

}  // namespace detail

/// Line plot of one or more series. In log mode non-positive values are dropped.
inline std::string line_plot(const std::vector<Series>& series, const PlotOptions& opt) {
    std::vector<Series> data;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw DomainError("line_plot: x and y lengths differ");
        Series t{s.label, {}, {}};
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (!std::isfinite(y) || !std::isfinite(s.x[i])) continue;
            if (opt.log_y) {
                if (!(y > 0)) continue;
                y = std::log10(y);
            }
            t.x.push_back(s.x[i]);
            t.y.push_back(y);
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
        data.push_back(std::move(t));
    }
    if (!std::isfinite(x0)) throw DomainError("line_plot: nothing to draw");
    if (opt.asymptote) x1 = std::max(x1, *opt.asymptote);
    detail::pad(y0, y1);
    if (x1 - x0 < 1e-12) detail::pad(x0, x1);
    detail::Frame f{x0, x1, y0, y1};
    f.width = opt.width;
    f.height = opt.height;

    std::string s = detail::header(opt.width, opt.height, opt.title);
    const auto xt = detail::ticks(x0, x1);
    std::vector<std::string> xl;
    for (double v : xt) xl.push_back(fmt::format("{:g}", v));
    s += detail::axes(f, opt.xlabel, opt.ylabel, opt.log_y, xt, xl);
    if (opt.asymptote) {
        const double x = f.sx(*opt.asymptote);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"gray\" "
                         "stroke-dasharray=\"6,4\"/>\n",
                         x, f.top, x, f.height - f.bottom);
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& d = data[i];
        if (d.x.empty()) continue;
        std::string pts;
        for (std::size_t j = 0; j < d.x.size(); ++j) pts += fmt::format("{:.2f},{:.2f} ", f.sx(d.x[j]), f.sy(d.y[j]));
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\" points=\"{}\"/>\n",
                         detail::palette(i), pts);
        for (std::size_t j = 0; j < d.x.size(); ++j)
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", f.sx(d.x[j]), f.sy(d.y[j]),
                             detail::palette(i));
        const double ly = f.top + 16.0 * static_cast<double>(i) + 12;
        const double lx = f.left + 12;
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                         lx, ly - 4, lx + 18, ly - 4, detail::palette(i));
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                         lx + 24, ly, escape(d.label));
    }
    s += "</svg>\n";
    return s;
}

/// Side-by-side boxplots; values are drawn as given (pass log values for a log scale).
inline std::string boxplot(const std::vector<std::pair<std::string, BoxplotStats>>& boxes, const PlotOptions& opt) {
    if (boxes.empty()) throw DomainError("boxplot: nothing to draw");
    double y0 = INFINITY, y1 = -INFINITY;
    for (const auto& [name, b] : boxes) {
        y0 = std::min(y0, b.lower_whisker);
        y1 = std::max(y1, b.upper_whisker);
        for (double o : b.outliers) {
            y0 = std::min(y0, o);
            y1 = std::max(y1, o);
        }
    }
    detail::pad(y0, y1);
    const double x0 = 0.5, x1 = static_cast<double>(boxes.size()) + 0.5;
    detail::Frame f{x0, x1, y0, y1};
    f.width = opt.width;
    f.height = opt.height;
    std::string s = detail::header(opt.width, opt.height, opt.title);
    std::vector<double> xt;
    std::vector<std::string> xl;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        xt.push_back(static_cast<double>(i + 1));
        xl.push_back(boxes[i].first);
    }
    s += detail::axes(f, opt.xlabel, opt.ylabel, false, xt, xl);
    const double half = 0.3 * (f.sx(2.0) - f.sx(1.0));
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const auto& b = boxes[i].second;
        const double cx = f.sx(static_cast<double>(i + 1));
        const char* col = detail::palette(i);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", cx,
                         f.sy(b.lower_whisker), cx, f.sy(b.q1));
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", cx,
                         f.sy(b.q3), cx, f.sy(b.upper_whisker));
        for (double w : {b.lower_whisker, b.upper_whisker})
            s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n",
                             cx - half / 2, f.sy(w), cx + half / 2, f.sy(w));
        const double top = f.sy(b.q3), h = std::max(f.sy(b.q1) - top, 0.5);
        s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" "
                         "fill-opacity=\"0.35\" stroke=\"black\"/>\n",
                         cx - half, top, 2 * half, h, col);
        s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\" "
                         "stroke-width=\"2\"/>\n",
                         cx - half, f.sy(b.median), cx + half, f.sy(b.median));
        for (double o : b.outliers)
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"none\" stroke=\"black\"/>\n", cx,
                             f.sy(o));
    }
    s += "</svg>\n";
    return s;
}

}  // namespace depthlab::svg

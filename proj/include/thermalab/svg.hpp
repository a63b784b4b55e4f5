#pragma once

// Minimal deterministic SVG line/scatter plots.

#include "thermalab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace thermalab::svg {

enum class Style { line, dashed, points };

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    Style style = Style::line;
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
    int width = 640;
    int height = 440;
};

namespace detail {

inline const char* color(std::size_t i)
{
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

inline std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string escape(const std::string& s)
{
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

struct Axis {
    double lo = 0, hi = 1;
    bool log = false;

    double map(double v) const { return log ? std::log10(v) : v; }
    double frac(double v) const { return (map(v) - lo) / (hi - lo); }
};

inline Axis make_axis(const std::vector<const std::vector<double>*>& data, bool log)
{
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto* d : data)
        for (double v : *d) {
            if (!std::isfinite(v) || (log && !(v > 0))) continue;
            const double m = log ? std::log10(v) : v;
            lo = std::min(lo, m);
            hi = std::max(hi, m);
        }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.04 * (hi - lo);
    return {lo - pad, hi + pad, log};
}

} // namespace detail

inline std::string render(const Plot& p)
{
    using namespace detail;
    const double left = 80, right = 170, top = 40, bottom = 60;
    const double pw = p.width - left - right, ph = p.height - top - bottom;
    std::vector<const std::vector<double>*> xs, ys;
    for (const auto& s : p.series) {
        if (s.x.size() != s.y.size()) throw UsageError("svg series '" + s.label + "' has mismatched lengths");
        xs.push_back(&s.x);
        ys.push_back(&s.y);
    }
    const Axis ax = make_axis(xs, p.log_x), ay = make_axis(ys, p.log_y);
    auto px = [&](double v) { return left + ax.frac(v) * pw; };
    auto py = [&](double v) { return top + (1.0 - ay.frac(v)) * ph; };
    auto ok = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!p.log_x || x > 0) && (!p.log_y || y > 0);
    };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(p.width) + "\" height=\"" +
         std::to_string(p.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + num(left + pw / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" + escape(p.title) +
         "</text>\n";
    o += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double fx = ax.lo + (ax.hi - ax.lo) * i / 4.0, fy = ay.lo + (ay.hi - ay.lo) * i / 4.0;
        const double vx = ax.log ? std::pow(10.0, fx) : fx, vy = ay.log ? std::pow(10.0, fy) : fy;
        const double X = left + pw * i / 4.0, Y = top + ph * (1 - i / 4.0);
        o += "<line x1=\"" + num(X) + "\" y1=\"" + num(top + ph) + "\" x2=\"" + num(X) + "\" y2=\"" + num(top + ph + 5) +
             "\" stroke=\"black\"/>\n";
        o += "<text x=\"" + num(X) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" + tick(vx) + "</text>\n";
        o += "<line x1=\"" + num(left - 5) + "\" y1=\"" + num(Y) + "\" x2=\"" + num(left) + "\" y2=\"" + num(Y) +
             "\" stroke=\"black\"/>\n";
        o += "<text x=\"" + num(left - 8) + "\" y=\"" + num(Y + 4) + "\" text-anchor=\"end\">" + tick(vy) + "</text>\n";
    }
    o += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(p.height - 15.0) + "\" text-anchor=\"middle\">" +
         escape(p.x_label + (p.log_x ? " (log)" : "")) + "</text>\n";
    o += "<text x=\"18\" y=\"" + num(top + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         num(top + ph / 2) + ")\">" + escape(p.y_label + (p.log_y ? " (log)" : "")) + "</text>\n";

    for (std::size_t k = 0; k < p.series.size(); ++k) {
        const auto& s = p.series[k];
        const char* c = color(k);
        if (s.style == Style::points) {
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (ok(s.x[i], s.y[i]))
                    o += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" + c +
                         "\"/>\n";
        } else {
            std::string path;
            bool pen = false;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!ok(s.x[i], s.y[i])) {
                    pen = false;
                    continue;
                }
                path += (pen ? " L" : " M") + num(px(s.x[i])) + " " + num(py(s.y[i]));
                pen = true;
            }
            if (!path.empty())
                o += "<path d=\"" + path.substr(1) + "\" fill=\"none\" stroke=\"" + c + "\" stroke-width=\"1.2\"" +
                     (s.style == Style::dashed ? " stroke-dasharray=\"5,4\"" : "") + "/>\n";
        }
        const double ly = top + 14 + 16.0 * static_cast<double>(k);
        o += "<rect x=\"" + num(left + pw + 12) + "\" y=\"" + num(ly - 8) + "\" width=\"10\" height=\"10\" fill=\"" + c +
             "\"/>\n";
        o += "<text x=\"" + num(left + pw + 28) + "\" y=\"" + num(ly + 1) + "\">" + escape(s.label) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

} // namespace thermalab::svg

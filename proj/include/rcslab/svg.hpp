#pragma once
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcslab {

// write-to-temp then rename, so readers never see a half file
inline void write_text_atomic(const std::string& path, const std::string& body) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out << body;
        if (!out) throw std::runtime_error("short write to '" + tmp + "'");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename '" + tmp + "' to '" + path + "'");
}

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> pts;
};

namespace detail {
inline std::string svg_num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    return buf;
}
} // namespace detail

// a small static chart: axes, tick labels at the extremes, one polyline
// with point markers per series, legend down the right edge
inline std::string render_svg_plot(const std::string& title, const std::vector<PlotSeries>& series,
                                   const std::string& xlabel, const std::string& ylabel) {
    const double W = 720, H = 440, ml = 70, mr = 150, mt = 42, mb = 52;
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (auto& s : series)
        for (auto& [x, y] : s.pts) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (!std::isfinite(xmin)) { xmin = 0; xmax = 1; ymin = 0; ymax = 1; }
    if (xmax == xmin) { xmax += 1; xmin -= 1; }
    if (ymax == ymin) { ymax += 1; ymin -= 1; }
    double pad = 0.04 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
    auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(W) + "\" height=\"" +
         detail::svg_num(H) + "\" viewBox=\"0 0 " + detail::svg_num(W) + " " + detail::svg_num(H) + "\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + detail::svg_num(W / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
    // axes
    s += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(H - mb) + "\" x2=\"" +
         detail::svg_num(W - mr) + "\" y2=\"" + detail::svg_num(H - mb) + "\" stroke=\"black\"/>\n";
    s += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt) + "\" x2=\"" +
         detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(H - mb) + "\" stroke=\"black\"/>\n";
    auto tick = [&](double v, bool xaxis) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        if (xaxis)
            s += "<text x=\"" + detail::svg_num(px(v)) + "\" y=\"" + detail::svg_num(H - mb + 18) +
                 "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + buf + "</text>\n";
        else
            s += "<text x=\"" + detail::svg_num(ml - 6) + "\" y=\"" + detail::svg_num(py(v) + 4) +
                 "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + buf + "</text>\n";
    };
    tick(xmin, true);
    tick((xmin + xmax) / 2, true);
    tick(xmax, true);
    tick(ymin + pad, false);
    tick((ymin + ymax) / 2, false);
    tick(ymax - pad, false);
    s += "<text x=\"" + detail::svg_num((ml + W - mr) / 2) + "\" y=\"" + detail::svg_num(H - 14) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xlabel + "</text>\n";
    s += "<text x=\"18\" y=\"" + detail::svg_num((mt + H - mb) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
         detail::svg_num((mt + H - mb) / 2) + ")\">" + ylabel + "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* col = palette[i % 8];
        std::string pts;
        for (auto& [x, y] : series[i].pts) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            pts += detail::svg_num(px(x)) + "," + detail::svg_num(py(y)) + " ";
            s += "<circle cx=\"" + detail::svg_num(px(x)) + "\" cy=\"" + detail::svg_num(py(y)) +
                 "\" r=\"2.5\" fill=\"" + col + "\"/>\n";
        }
        if (!pts.empty())
            s += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + col + "\" stroke-width=\"1.5\"/>\n";
        double ly = mt + 16 + 18 * (double)i;
        s += "<line x1=\"" + detail::svg_num(W - mr + 10) + "\" y1=\"" + detail::svg_num(ly - 4) + "\" x2=\"" +
             detail::svg_num(W - mr + 30) + "\" y2=\"" + detail::svg_num(ly - 4) + "\" stroke=\"" + col +
             "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + detail::svg_num(W - mr + 36) + "\" y=\"" + detail::svg_num(ly) +
             "\" font-family=\"sans-serif\" font-size=\"12\">" + series[i].label + "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<PlotSeries>& series, const std::string& xlabel,
                           const std::string& ylabel) {
    write_text_atomic(path, render_svg_plot(title, series, xlabel, ylabel));
}

} // namespace rcslab

#include "robinlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace rml {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

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

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v, bool log) {
    char buf[32];
    if (log)
        std::snprintf(buf, sizeof buf, "1e%d", static_cast<int>(std::lround(v)));
    else
        std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Axis {
    bool log = false;
    double lo = 0.0, hi = 1.0;  // in transformed units

    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }
    double tf(double v) const { return log ? std::log10(v) : v; }

    void fit(const std::vector<PlotSeries>& series, bool use_x) {
        double mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (const auto& s : series) {
            const auto& vals = use_x ? s.x : s.y;
            for (double v : vals)
                if (usable(v)) {
                    mn = std::min(mn, tf(v));
                    mx = std::max(mx, tf(v));
                }
        }
        if (!std::isfinite(mn)) {
            mn = 0.0;
            mx = 1.0;
        }
        if (log) {
            mn = std::floor(mn);
            mx = std::ceil(mx);
            if (mx <= mn) mx = mn + 1.0;
        } else {
            double pad = mx > mn ? 0.05 * (mx - mn) : std::max(1.0, std::abs(mn)) * 0.1;
            mn -= pad;
            mx += pad;
        }
        lo = mn;
        hi = mx;
    }

    std::vector<double> ticks() const {
        std::vector<double> t;
        if (log) {
            int step = std::max(1, static_cast<int>(std::ceil((hi - lo) / 8.0)));
            for (double v = lo; v <= hi + 1e-9; v += step) t.push_back(v);
            return t;
        }
        double raw = (hi - lo) / 6.0;
        double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) {
                step = m * mag;
                break;
            }
        for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12; v += step) t.push_back(v);
        return t;
    }
};

}  // namespace

std::string render_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series) {
    const double W = spec.width, H = spec.height;
    const double left = 80, right = 160, top = 40, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;
    Axis ax, ay;
    ax.log = spec.log_x;
    ay.log = spec.log_y;
    ax.fit(series, true);
    ay.fit(series, false);
    auto px = [&](double v) { return left + (ax.tf(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto py = [&](double v) { return top + ph - (ay.tf(v) - ay.lo) / (ay.hi - ay.lo) * ph; };

    std::ostringstream o;
    o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << spec.width << "\" height=\""
      << spec.height << "\" viewBox=\"0 0 " << spec.width << ' ' << spec.height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(spec.title) << "</text>\n";
    o << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ax.ticks()) {
        double x = left + (t - ax.lo) / (ax.hi - ax.lo) * pw;
        o << "<line x1=\"" << num(x) << "\" y1=\"" << num(top) << "\" x2=\"" << num(x) << "\" y2=\"" << num(top + ph)
          << "\" stroke=\"#dddddd\"/>\n"
          << "<text x=\"" << num(x) << "\" y=\"" << num(top + ph + 18) << "\" text-anchor=\"middle\">"
          << tick_label(t, ax.log) << "</text>\n";
    }
    for (double t : ay.ticks()) {
        double y = top + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
        o << "<line x1=\"" << num(left) << "\" y1=\"" << num(y) << "\" x2=\"" << num(left + pw) << "\" y2=\"" << num(y)
          << "\" stroke=\"#dddddd\"/>\n"
          << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
          << tick_label(t, ay.log) << "</text>\n";
    }
    o << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(H - 16) << "\" text-anchor=\"middle\">"
      << escape(spec.x_label) << "</text>\n";
    o << "<text x=\"18\" y=\"" << num(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << num(top + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const std::string color = s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
        const std::size_t n = std::min(s.x.size(), s.y.size());
        if (s.line) {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < n; ++i)
                if (ax.usable(s.x[i]) && ay.usable(s.y[i])) o << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
            o << "\"/>\n";
        } else {
            o << "<g fill=\"" << color << "\" fill-opacity=\"0.55\">\n";
            for (std::size_t i = 0; i < n; ++i)
                if (ax.usable(s.x[i]) && ay.usable(s.y[i]))
                    o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"2\"/>\n";
            o << "</g>\n";
        }
        const double ly = top + 14 + 18.0 * static_cast<double>(k);
        o << "<rect x=\"" << num(left + pw + 12) << "\" y=\"" << num(ly - 9) << "\" width=\"12\" height=\"10\" fill=\""
          << color << "\"/>\n"
          << "<text x=\"" << num(left + pw + 30) << "\" y=\"" << num(ly) << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</g>\n</svg>\n";
    return o.str();
}

}  // namespace rml

#pragma once

// Minimal multi-panel SVG line plots. Log axes place x = +inf one step right
// of the largest finite value, labeled "inf".

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace nsopt::svg {

enum class Scale { Linear, Log10, Log2 };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;    // NaN: no point
  std::vector<double> err;  // empty or NaN entries: no error bar
  std::string color = "#1f77b4";
  bool dashed = false;
  bool lines = true;
};

struct Panel {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  Scale xscale = Scale::Linear;
  Scale yscale = Scale::Linear;
  std::optional<std::pair<double, double>> ylim;
  std::vector<Series> series;
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return p;
}

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct Axis {
  Scale scale = Scale::Linear;
  double lo = 0.0, hi = 1.0;  // transformed coordinates
  bool has_inf = false;
  double inf_pos = 0.0;

  double transform(double v) const {
    if (std::isinf(v) && v > 0) return inf_pos;
    if (scale == Scale::Log10) return std::log10(v);
    if (scale == Scale::Log2) return std::log2(v);
    return v;
  }
  bool representable(double v) const {
    if (std::isnan(v)) return false;
    if (std::isinf(v)) return v > 0 && has_inf;
    return scale == Scale::Linear || v > 0.0;
  }
};

inline Axis make_axis(Scale scale, const std::vector<double>& values, std::optional<std::pair<double, double>> lim) {
  Axis a;
  a.scale = scale;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    if (std::isinf(v) && v > 0 && scale != Scale::Linear) {
      a.has_inf = true;
      continue;
    }
    if (!std::isfinite(v) || (scale != Scale::Linear && v <= 0.0)) continue;
    const double t = a.transform(v);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  if (lim) {
    lo = a.transform(lim->first);
    hi = a.transform(lim->second);
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  if (scale != Scale::Linear) {
    lo = std::floor(lo);
    hi = std::ceil(hi);
  }
  if (a.has_inf) {
    a.inf_pos = hi + std::max(1.0, 0.08 * (hi - lo));
    hi = a.inf_pos;
  }
  a.lo = lo;
  a.hi = hi;
  return a;
}

inline std::vector<std::pair<double, std::string>> ticks(const Axis& a) {
  std::vector<std::pair<double, std::string>> t;
  const double finite_hi = a.has_inf ? a.inf_pos - 1.0 : a.hi;
  if (a.scale == Scale::Linear) {
    const double span = a.hi - a.lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    for (double v = std::ceil(a.lo / step) * step; v <= a.hi + 1e-9 * span; v += step)
      t.emplace_back(v, tick_label(std::abs(v) < 1e-12 * span ? 0.0 : v));
    return t;
  }
  const int first = static_cast<int>(std::ceil(a.lo - 1e-9));
  const int last = static_cast<int>(std::floor(finite_hi + 1e-9));
  const int every = std::max(1, (last - first) / 8 + ((last - first) % 8 ? 1 : 0));
  for (int e = first; e <= last; e += every) {
    const double v = a.scale == Scale::Log10 ? std::pow(10.0, e) : std::pow(2.0, e);
    t.emplace_back(static_cast<double>(e), a.scale == Scale::Log10 ? "1e" + std::to_string(e) : tick_label(v));
  }
  if (a.has_inf) t.emplace_back(a.inf_pos, "inf");
  return t;
}

}  // namespace detail

/// Panels laid out row-major in `columns` columns.
inline std::string render(const std::vector<Panel>& panels, int columns = 2, double panel_w = 440.0,
                          double panel_h = 320.0) {
  using namespace detail;
  columns = std::max(1, std::min<int>(columns, static_cast<int>(std::max<std::size_t>(1, panels.size()))));
  const int rows = static_cast<int>((panels.size() + columns - 1) / columns);
  const double W = columns * panel_w, H = std::max(1, rows) * panel_h;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W) + "\" height=\"" + num(H) +
                    "\" viewBox=\"0 0 " + num(W) + " " + num(H) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const double ml = 62, mr = 14, mt = 26, mb = 64;
  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& p = panels[pi];
    const double ox = (pi % columns) * panel_w, oy = (pi / columns) * panel_h;
    const double x0 = ox + ml, x1 = ox + panel_w - mr, y0 = oy + panel_h - mb, y1 = oy + mt;
    std::vector<double> xs, ys;
    for (const Series& s : p.series) {
      xs.insert(xs.end(), s.x.begin(), s.x.end());
      for (std::size_t i = 0; i < s.y.size(); ++i) {
        ys.push_back(s.y[i]);
        if (i < s.err.size() && std::isfinite(s.err[i]) && std::isfinite(s.y[i])) {
          ys.push_back(s.y[i] - s.err[i]);
          ys.push_back(s.y[i] + s.err[i]);
        }
      }
    }
    const Axis ax = make_axis(p.xscale, xs, std::nullopt);
    const Axis ay = make_axis(p.yscale, ys, p.ylim);
    auto px = [&](double v) { return x0 + (ax.transform(v) - ax.lo) / (ax.hi - ax.lo) * (x1 - x0); };
    auto py = [&](double v) {
      const double t = std::clamp((ay.transform(v) - ay.lo) / (ay.hi - ay.lo), -0.02, 1.02);
      return y0 - t * (y0 - y1);
    };
    out += "<g>\n<rect x=\"" + num(x0) + "\" y=\"" + num(y1) + "\" width=\"" + num(x1 - x0) + "\" height=\"" +
           num(y0 - y1) + "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(oy + 16) + "\" text-anchor=\"middle\" font-size=\"13\">" +
           escape(p.title) + "</text>\n";
    for (const auto& [t, lab] : ticks(ax)) {
      const double X = x0 + (t - ax.lo) / (ax.hi - ax.lo) * (x1 - x0);
      out += "<line x1=\"" + num(X) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(X) + "\" y2=\"" + num(y1) +
             "\" stroke=\"#e0e0e0\"/>\n";
      out += "<text x=\"" + num(X) + "\" y=\"" + num(y0 + 14) + "\" text-anchor=\"middle\">" + escape(lab) + "</text>\n";
    }
    for (const auto& [t, lab] : ticks(ay)) {
      const double Y = y0 - (t - ay.lo) / (ay.hi - ay.lo) * (y0 - y1);
      out += "<line x1=\"" + num(x0) + "\" y1=\"" + num(Y) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(Y) +
             "\" stroke=\"#e0e0e0\"/>\n";
      out += "<text x=\"" + num(x0 - 4) + "\" y=\"" + num(Y + 4) + "\" text-anchor=\"end\">" + escape(lab) + "</text>\n";
    }
    out += "<text x=\"" + num((x0 + x1) / 2) + "\" y=\"" + num(y0 + 30) + "\" text-anchor=\"middle\">" +
           escape(p.xlabel) + "</text>\n";
    out += "<text transform=\"translate(" + num(ox + 14) + "," + num((y0 + y1) / 2) +
           ") rotate(-90)\" text-anchor=\"middle\">" + escape(p.ylabel) + "</text>\n";
    for (std::size_t si = 0; si < p.series.size(); ++si) {
      const Series& s = p.series[si];
      std::string path;
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        if (!ax.representable(s.x[i]) || !ay.representable(s.y[i])) continue;
        const double X = px(s.x[i]), Y = py(s.y[i]);
        path += (path.empty() ? "M" : " L") + num(X) + " " + num(Y);
        out += "<circle cx=\"" + num(X) + "\" cy=\"" + num(Y) + "\" r=\"2.2\" fill=\"" + s.color + "\"/>\n";
        if (i < s.err.size() && std::isfinite(s.err[i]) && s.err[i] > 0.0) {
          const double lo = s.y[i] - s.err[i], hi = s.y[i] + s.err[i];
          const double Ylo = ay.representable(lo) ? py(lo) : y0;
          out += "<line x1=\"" + num(X) + "\" y1=\"" + num(Ylo) + "\" x2=\"" + num(X) + "\" y2=\"" + num(py(hi)) +
                 "\" stroke=\"" + s.color + "\"/>\n";
        }
      }
      if (s.lines && !path.empty())
        out += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.4\"" +
               (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
      const double ly = y0 + 44 + 12 * static_cast<double>(si / 2);
      const double lx = x0 + (si % 2) * (x1 - x0) / 2;
      out += "<line x1=\"" + num(lx) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(lx + 18) + "\" y2=\"" +
             num(ly - 4) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
             (s.dashed ? " stroke-dasharray=\"5,3\"" : "") + "/>\n";
      out += "<text x=\"" + num(lx + 22) + "\" y=\"" + num(ly) + "\">" + escape(s.label) + "</text>\n";
    }
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace nsopt::svg

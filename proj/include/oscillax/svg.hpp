#pragma once

// Minimal static line plots as standalone SVG 1.1.

#include <oscillax/error.hpp>
#include <oscillax/report.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace oscillax {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotOptions {
  std::string title;
  std::string x_label = "x";
  std::string y_label = "y";
  bool log_x = false;
  bool log_y = false;
  int width = 800;
  int height = 500;
  std::size_t max_points = 2000;  // per series, after min/max decimation
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
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

inline std::string svg_number(double v) {
  // Pixel coordinates need no more than two decimals.
  return format_double(std::round(v * 100.0) / 100.0);
}

inline std::string tick_label(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 4);
  return std::string(buf.data(), end);
}

/// Keeps the first, last, and per-bucket min and max so oscillations survive.
inline std::vector<std::size_t> decimate(const std::vector<double>& y, std::size_t max_points) {
  std::vector<std::size_t> keep;
  const std::size_t n = y.size();
  if (n <= max_points || max_points < 4) {
    for (std::size_t i = 0; i < n; ++i) keep.push_back(i);
    return keep;
  }
  const std::size_t buckets = max_points / 2;
  for (std::size_t b = 0; b < buckets; ++b) {
    std::size_t lo = b * n / buckets;
    std::size_t hi = (b + 1) * n / buckets;
    if (lo >= hi) continue;
    auto [mn, mx] = std::minmax_element(y.begin() + static_cast<std::ptrdiff_t>(lo), y.begin() + static_cast<std::ptrdiff_t>(hi));
    auto i = static_cast<std::size_t>(mn - y.begin());
    auto j = static_cast<std::size_t>(mx - y.begin());
    keep.push_back(std::min(i, j));
    if (i != j) keep.push_back(std::max(i, j));
  }
  if (keep.front() != 0) keep.insert(keep.begin(), 0);
  if (keep.back() != n - 1) keep.push_back(n - 1);
  return keep;
}

}  // namespace detail

inline std::string render_svg(const std::vector<Series>& series, const PlotOptions& opt = {}) {
  if (series.empty()) throw std::invalid_argument("emit_plot: no series");
  for (const auto& s : series) {
    if (s.x.empty() || s.x.size() != s.y.size()) {
      throw std::invalid_argument("emit_plot: series '" + s.name + "' is empty or has unequal x/y lengths");
    }
  }
  auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((opt.log_x && !(s.x[i] > 0)) || (opt.log_y && !(s.y[i] > 0))) {
        throw std::invalid_argument("emit_plot: nonpositive value on a log axis in '" + s.name + "'");
      }
      double a = tx(s.x[i]), b = ty(s.y[i]);
      if (!std::isfinite(a) || !std::isfinite(b)) continue;
      x0 = std::min(x0, a), x1 = std::max(x1, a), y0 = std::min(y0, b), y1 = std::max(y1, b);
    }
  }
  if (!(x1 >= x0) || !(y1 >= y0)) throw std::invalid_argument("emit_plot: no finite points");
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  double pad = 0.05 * (y1 - y0);
  y0 -= pad, y1 += pad;

  const double left = 80, right = 20, top = 40, bottom = 60;
  const double pw = opt.width - left - right, ph = opt.height - top - bottom;
  auto px = [&](double v) { return left + (tx(v) - x0) / (x1 - x0) * pw; };
  auto py = [&](double v) { return top + (1.0 - (ty(v) - y0) / (y1 - y0)) * ph; };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(opt.width) +
         "\" height=\"" + std::to_string(opt.height) + "\" viewBox=\"0 0 " + std::to_string(opt.width) + ' ' +
         std::to_string(opt.height) + "\">\n";
  out += "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::svg_number(left + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         detail::xml_escape(opt.title) + "</text>\n";
  out += "<rect x=\"" + detail::svg_number(left) + "\" y=\"" + detail::svg_number(top) + "\" width=\"" +
         detail::svg_number(pw) + "\" height=\"" + detail::svg_number(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  // Five ticks per axis, labelled in data units.
  for (int k = 0; k <= 4; ++k) {
    double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    double sx = left + pw * k / 4.0, sy = top + ph * (1.0 - k / 4.0);
    double lx = opt.log_x ? std::pow(10.0, fx) : fx, ly = opt.log_y ? std::pow(10.0, fy) : fy;
    std::string bx = detail::tick_label(lx), by = detail::tick_label(ly);
    out += "<line x1=\"" + detail::svg_number(sx) + "\" y1=\"" + detail::svg_number(top + ph) + "\" x2=\"" +
           detail::svg_number(sx) + "\" y2=\"" + detail::svg_number(top + ph + 5) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + detail::svg_number(sx) + "\" y=\"" + detail::svg_number(top + ph + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + bx + "</text>\n";
    out += "<line x1=\"" + detail::svg_number(left - 5) + "\" y1=\"" + detail::svg_number(sy) + "\" x2=\"" +
           detail::svg_number(left) + "\" y2=\"" + detail::svg_number(sy) + "\" stroke=\"black\"/>\n";
    out += "<text x=\"" + detail::svg_number(left - 8) + "\" y=\"" + detail::svg_number(sy + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + by + "</text>\n";
  }
  out += "<text x=\"" + detail::svg_number(left + pw / 2) + "\" y=\"" + detail::svg_number(opt.height - 15.0) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" +
         detail::xml_escape(opt.x_label + (opt.log_x ? " (log)" : "")) + "</text>\n";
  out += "<text x=\"18\" y=\"" + detail::svg_number(top + ph / 2) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 " +
         detail::svg_number(top + ph / 2) + ")\">" + detail::xml_escape(opt.y_label + (opt.log_y ? " (log)" : "")) +
         "</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = palette[k % std::size(palette)];
    out += "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" + std::string(color) + "\" points=\"";
    bool first = true;
    for (std::size_t i : detail::decimate(s.y, opt.max_points)) {
      if (!std::isfinite(tx(s.x[i])) || !std::isfinite(ty(s.y[i]))) continue;
      if (!first) out += ' ';
      first = false;
      out += detail::svg_number(px(s.x[i])) + ',' + detail::svg_number(py(s.y[i]));
    }
    out += "\"/>\n";
    double ly = top + 16 + 18.0 * static_cast<double>(k);
    out += "<line x1=\"" + detail::svg_number(left + pw - 150) + "\" y1=\"" + detail::svg_number(ly) + "\" x2=\"" +
           detail::svg_number(left + pw - 125) + "\" y2=\"" + detail::svg_number(ly) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + detail::svg_number(left + pw - 118) + "\" y=\"" + detail::svg_number(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + detail::xml_escape(s.name) + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

/// Renders first, so a bad input never leaves a partial file behind.
inline void emit_plot(const std::vector<Series>& series, const std::filesystem::path& path, const PlotOptions& opt = {}) {
  write_text(path, render_svg(series, opt));
}

}  // namespace oscillax

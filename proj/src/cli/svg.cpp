#include "infocnf/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace infocnf {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
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

struct Frame {
  double x0, x1, y0, y1;

  double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void pad(double& lo, double& hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    lo = 0.0;
    hi = 1.0;
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double m = 0.04 * (hi - lo);
  lo -= m;
  hi += m;
}

std::string header(const PlotLabels& l) {
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      kWidth, kHeight);
  s += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
                   (kLeft + kWidth - kRight) / 2, escape(l.title));
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (kLeft + kWidth - kRight) / 2,
                   kHeight - 12, escape(l.x));
  s += fmt::format("<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">{1}</text>\n",
                   (kTop + kHeight - kBottom) / 2, escape(l.y));
  return s;
}

std::string axes(const Frame& f) {
  std::string s = fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444\"/>\n",
                              kLeft, kTop, kWidth - kLeft - kRight, kHeight - kTop - kBottom);
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\" fill=\"#444\">{:.3g}</text>\n", f.px(xv),
                     kHeight - kBottom + 16, xv);
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\" fill=\"#444\">{:.3g}</text>\n", kLeft - 6,
                     f.py(yv) + 4, yv);
  }
  return s;
}

std::string legend(const std::vector<std::string>& names) {
  std::string s;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = kTop + 14 + 18.0 * static_cast<double>(i);
    const char* color = kPalette[i % std::size(kPalette)];
    s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", kWidth - kRight + 12,
                     y - 10, color);
    s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kWidth - kRight + 30, y, escape(names[i]));
  }
  return s;
}

}  // namespace

std::string svg_line_plot(const PlotLabels& labels, const std::vector<Series>& series, bool equal_aspect) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  pad(x0, x1);
  pad(y0, y1);
  if (equal_aspect) {
    const double sx = (x1 - x0) / (kWidth - kLeft - kRight), sy = (y1 - y0) / (kHeight - kTop - kBottom);
    if (sx > sy) {
      const double c = 0.5 * (y0 + y1), h = 0.5 * sx * (kHeight - kTop - kBottom);
      y0 = c - h;
      y1 = c + h;
    } else {
      const double c = 0.5 * (x0 + x1), h = 0.5 * sy * (kWidth - kLeft - kRight);
      x0 = c - h;
      x1 = c + h;
    }
  }
  const Frame f{x0, x1, y0, y1};
  std::string out = header(labels) + axes(f);
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    names.push_back(s.label);
    std::string pts;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (s.markers) {
        out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.6\" fill=\"{}\"/>\n", f.px(s.x[i]), f.py(s.y[i]),
                           color);
      } else {
        pts += fmt::format("{:.2f},{:.2f} ", f.px(s.x[i]), f.py(s.y[i]));
      }
    }
    if (!s.markers && !pts.empty()) {
      out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"{}\"/>\n", color, pts);
    }
  }
  return out + legend(names) + "</svg>\n";
}

std::string svg_histogram(const PlotLabels& labels, const std::vector<HistogramGroup>& groups, double lo, double hi,
                          std::size_t bins) {
  bins = std::max<std::size_t>(bins, 1);
  std::vector<std::vector<double>> counts(groups.size(), std::vector<double>(bins, 0.0));
  double top = 0.0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (double v : groups[g].values) {
      if (!std::isfinite(v)) continue;
      auto b = static_cast<long>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
      b = std::clamp<long>(b, 0, static_cast<long>(bins) - 1);
      top = std::max(top, ++counts[g][static_cast<std::size_t>(b)]);
    }
  }
  const Frame f{lo, hi, 0.0, top > 0 ? top * 1.05 : 1.0};
  std::string out = header(labels) + axes(f);
  std::vector<std::string> names;
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    names.push_back(groups[g].label);
    std::string pts = fmt::format("{:.2f},{:.2f} ", f.px(lo), f.py(0.0));
    for (std::size_t b = 0; b < bins; ++b) {
      const double xa = lo + w * static_cast<double>(b);
      pts += fmt::format("{:.2f},{:.2f} {:.2f},{:.2f} ", f.px(xa), f.py(counts[g][b]), f.px(xa + w),
                         f.py(counts[g][b]));
    }
    pts += fmt::format("{:.2f},{:.2f}", f.px(hi), f.py(0.0));
    out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\" points=\"{}\"/>\n",
                       kPalette[g % std::size(kPalette)], pts);
  }
  return out + legend(names) + "</svg>\n";
}

}  // namespace infocnf

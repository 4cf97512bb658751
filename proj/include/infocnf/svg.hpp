#pragma once

#include <string>
#include <vector>

namespace infocnf {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;  // points instead of a polyline
};

struct PlotLabels {
  std::string title;
  std::string x;
  std::string y;
};

/// Standalone SVG document with one polyline (or point cloud) per series.
/// Non-finite points are dropped.
std::string svg_line_plot(const PlotLabels& labels, const std::vector<Series>& series, bool equal_aspect = false);

struct HistogramGroup {
  std::string label;
  std::vector<double> values;
};

/// Overlaid step histograms on a shared binning of [lo, hi].
std::string svg_histogram(const PlotLabels& labels, const std::vector<HistogramGroup>& groups, double lo, double hi,
                          std::size_t bins);

}  // namespace infocnf

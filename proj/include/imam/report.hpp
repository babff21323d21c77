#pragma once

#include <array>
#include <string>
#include <vector>

#include "imam/io.hpp"

namespace imam {

struct Series {
  std::string name;
  std::vector<std::array<double, 2>> points;  // (x, y)
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_y = false;
};

struct BarSeries {
  std::string name;
  std::vector<double> values;
  std::vector<double> err;  // optional whiskers; empty or same length as values
};

struct BarChart {
  std::string title;
  std::string y_label;
  std::vector<std::string> labels;
  std::vector<BarSeries> series;
};

// Deterministic standalone SVG documents (fixed canvas, fixed palette,
// fixed number formatting; no timestamps).
std::string svg_line_chart(const LineChart& chart);
std::string svg_bar_chart(const BarChart& chart);

// Renders plots and a markdown index for one run record produced by a
// command. Dispatches on the record's "command" field. Returns a summary
// of the files written.
json cmd_report(const std::string& in_path, const std::string& out_dir);

}  // namespace imam

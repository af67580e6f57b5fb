#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace privet {

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

// Filled region between lower and upper over x.
struct PlotBand {
  std::string label;
  std::vector<double> x, lower, upper;
  std::string color = "#1f77b4";
  double opacity = 0.25;
};

struct PlotSpec {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false, log_y = false;  // log10 axes; non-positive points are dropped
  std::optional<std::pair<double, double>> x_range, y_range;
  int width = 640, height = 480;
};

// Each series becomes one <polyline>; axes and ticks use <line>, bands use
// <polygon>.
std::string render_line_plot(const PlotSpec& spec, const std::vector<PlotSeries>& series,
                             const std::vector<PlotBand>& bands = {});

// Cells indexed [row * cols.size() + col]; missing values are drawn white.
void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const std::vector<double>& cols, const std::vector<double>& rows,
                       const std::vector<std::optional<double>>& values,
                       const std::string& col_label, const std::string& row_label);

void write_text_file(const std::filesystem::path& path, const std::string& text);

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite.
std::string format_double(double v);

}  // namespace privet

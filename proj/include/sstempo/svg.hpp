#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sstempo::svg {

struct Series {
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  int row = 0;
  int col = 0;
  Series series;
};

struct GridLayout {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  std::string x_label = "tempo (BPM)";
  std::string y_label = "model output";
  bool log_x = true;
};

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Union of all panel data, padded so a constant series still has extent.
AxisRange shared_range(const std::vector<Panel>& panels, bool x_axis);

/// Panel grid with one shared x range and one shared y range.
std::string render_grid(const std::vector<Panel>& panels, const GridLayout& layout);
void write_grid(const std::filesystem::path& path, const std::vector<Panel>& panels, const GridLayout& layout);

}  // namespace sstempo::svg

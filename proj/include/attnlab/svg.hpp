#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace attnlab {

// Minimal dependency-free SVG emitters for the --svg output option.

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          std::span<const SvgSeries> series, bool log_y = false);

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const Eigen::MatrixXd& values);

}  // namespace attnlab

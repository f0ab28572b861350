#include "attnlab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace attnlab {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMargin = 56;

const char* series_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  return palette[i % 5];
}

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

}  // namespace

void write_line_chart_svg(const std::filesystem::path& path, const std::string& title,
                          std::span<const SvgSeries> series, bool log_y) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_line_chart_svg: cannot open " + path.string());
  double xmin = std::numeric_limits<double>::max(), xmax = std::numeric_limits<double>::lowest();
  double ymin = xmin, ymax = xmax;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double yv = log_y ? std::log10(std::max(s.y[i], 1e-300)) : s.y[i];
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
  }
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const auto px = [&](double x) {
    return kMargin + (x - xmin) / (xmax - xmin) * (kWidth - 2 * kMargin);
  };
  const auto py = [&](double y) {
    const double v = log_y ? std::log10(std::max(y, 1e-300)) : y;
    return kHeight - kMargin - (v - ymin) / (ymax - ymin) * (kHeight - 2 * kMargin);
  };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\""
      << kWidth - kMargin << "\" y2=\"" << kHeight - kMargin
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  const double yaxis_lo = log_y ? std::pow(10.0, ymin) : ymin;
  const double yaxis_hi = log_y ? std::pow(10.0, ymax) : ymax;
  out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kHeight - kMargin
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yaxis_lo) << "</text>\n";
  out << "<text x=\"" << kMargin - 6 << "\" y=\"" << kMargin + 4
      << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(yaxis_hi) << "</text>\n";
  out << "<text x=\"" << kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xmin) << "</text>\n";
  out << "<text x=\"" << kWidth - kMargin << "\" y=\"" << kHeight - kMargin + 16
      << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(xmax) << "</text>\n";
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    out << "<polyline fill=\"none\" stroke=\"" << series_color(si)
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      out << fmt(px(s.x[i])) << "," << fmt(py(s.y[i])) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << kWidth - kMargin + 4 << "\" y=\"" << kMargin + 16 * si + 12
        << "\" font-size=\"11\" fill=\"" << series_color(si) << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

void write_heatmap_svg(const std::filesystem::path& path, const std::string& title,
                       const Eigen::MatrixXd& values) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_heatmap_svg: cannot open " + path.string());
  const auto rows = values.rows();
  const auto cols = values.cols();
  const double lo = values.minCoeff();
  const double hi = std::max(values.maxCoeff(), lo + 1e-12);
  const int cell = std::max<int>(8, std::min<int>(48, 400 / std::max<Eigen::Index>(rows, 1)));
  const int w = kMargin + static_cast<int>(cols) * cell + kMargin;
  const int h = kMargin + static_cast<int>(rows) * cell + kMargin / 2;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title
      << "</text>\n";
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double t = (values(r, c) - lo) / (hi - lo);
      const int red = static_cast<int>(255 * t);
      const int blue = static_cast<int>(255 * (1.0 - t));
      out << "<rect x=\"" << kMargin + c * cell << "\" y=\"" << kMargin / 2 + 16 + r * cell
          << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << red << ",48,"
          << blue << ")\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace attnlab

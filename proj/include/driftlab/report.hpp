#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "driftlab/pbss.hpp"
#include "driftlab/tsne.hpp"

namespace driftlab {

// A figure and the data it was drawn from. Rendering from `csv` alone
// reproduces `svg` byte for byte.
struct Figure {
  std::string svg;
  std::string csv;
};

enum class HeatmapSource { RawSimilarity, GlobalZ, RowZ };

std::string_view to_string(HeatmapSource source);

struct HeatmapSpec {
  HeatmapSource source = HeatmapSource::RawSimilarity;
  bool cell_labels = false;
  std::string encoder_id;
  std::string title;
};

// Diverging blue-white-red ramp over t in [-1, 1] (clamped), as "#rrggbb".
std::string diverging_color(double t);

// Color of one matrix value under the heatmap's scale. Similarity uses [0, 1]
// with low similarity red; z modes clamp to +-3 with high z red.
std::string heatmap_color(double value, HeatmapSource source);

Figure render_heatmap(const Eigen::MatrixXd& matrix, const std::vector<std::string>& ids,
                      const HeatmapSpec& spec);
std::string render_heatmap_from_csv(std::string_view csv, const HeatmapSpec& spec);

struct CdfCurve {
  std::string label;
  std::vector<EmpiricalCdf<double>::Knot> knots;
};

Figure render_cdf(const std::vector<std::pair<std::string, EmpiricalCdf<double>>>& curves,
                  const std::string& title = {});
std::vector<CdfCurve> cdf_curves_from_csv(std::string_view csv);
std::string render_cdf_from_csv(std::string_view csv, const std::string& title = {});

enum class ScatterColoring { ByModel, ByOrigin };

std::string projection_csv(const std::vector<ProjectedPoint>& points);
std::vector<ProjectedPoint> projection_from_csv(std::string_view csv);
std::string render_scatter(const std::vector<ProjectedPoint>& points, ScatterColoring coloring,
                           const std::string& title = {});

}  // namespace driftlab

#include "driftlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "driftlab/error.hpp"
#include "driftlab/format.hpp"

namespace driftlab {

namespace {

constexpr std::array<int, 3> kBlue{33, 102, 172};
constexpr std::array<int, 3> kWhite{247, 247, 247};
constexpr std::array<int, 3> kRed{178, 24, 43};
constexpr const char* kMaskColor = "#bdbdbd";

constexpr std::array<const char*, 10> kPalette{"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string hex_color(const std::array<int, 3>& rgb) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string num(double v) { return format_fixed(v, 2); }

double parse_number(const std::string& s) {
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParameterError("bad number in CSV: " + s);
  return v;
}

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::string svg_open(int width, int height) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " +
         std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n" +
         "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
}

}  // namespace

std::string_view to_string(HeatmapSource source) {
  switch (source) {
    case HeatmapSource::RawSimilarity: return "raw-similarity";
    case HeatmapSource::GlobalZ: return "global-z";
    case HeatmapSource::RowZ: return "row-z";
  }
  return "unknown";
}

std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const auto& end = t < 0 ? kBlue : kRed;
  const double a = std::abs(t);
  std::array<int, 3> rgb{};
  for (int k = 0; k < 3; ++k) {
    rgb[k] = static_cast<int>(std::lround(kWhite[k] + a * (end[k] - kWhite[k])));
  }
  return hex_color(rgb);
}

std::string heatmap_color(double value, HeatmapSource source) {
  if (source == HeatmapSource::RawSimilarity) {
    return diverging_color(1.0 - 2.0 * std::clamp(value, 0.0, 1.0));
  }
  return diverging_color(std::clamp(value, -3.0, 3.0) / 3.0);
}

std::string render_heatmap_from_csv(std::string_view csv, const HeatmapSpec& spec) {
  const auto m = matrix_from_csv(csv);
  const Eigen::Index n = m.values.rows();
  if (n == 0) throw ParameterError("heatmap of an empty matrix");
  if (spec.cell_labels && n > 200) throw ParameterError("cell labels need n <= 200");

  const int cell = n <= 20 ? 32 : (n <= 60 ? 12 : 4);
  const int margin_left = 90;
  const int margin_top = 110;
  const int legend_h = 60;
  const int width = margin_left + static_cast<int>(n) * cell + 20;
  const int height = margin_top + static_cast<int>(n) * cell + legend_h;
  const bool z_mode = spec.source != HeatmapSource::RawSimilarity;

  std::string svg = svg_open(width, height);
  if (!spec.title.empty()) {
    svg += "<text class=\"title\" x=\"10\" y=\"18\" font-size=\"13\">" + xml_escape(spec.title) + "</text>\n";
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& id = m.ids[static_cast<std::size_t>(i)];
    const int pos = static_cast<int>(i) * cell + cell / 2;
    svg += "<text class=\"row-label\" x=\"" + std::to_string(margin_left - 4) + "\" y=\"" +
           std::to_string(margin_top + pos + 4) + "\" text-anchor=\"end\">" + xml_escape(id) + "</text>\n";
    svg += "<text class=\"col-label\" transform=\"translate(" + std::to_string(margin_left + pos + 4) + "," +
           std::to_string(margin_top - 4) + ") rotate(-60)\">" + xml_escape(id) + "</text>\n";
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = m.values(i, j);
      const bool masked = z_mode && i == j;
      const std::string fill = masked ? kMaskColor : heatmap_color(v, spec.source);
      const int x = margin_left + static_cast<int>(j) * cell;
      const int y = margin_top + static_cast<int>(i) * cell;
      svg += "<rect class=\"cell\" x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" +
             fill + "\"/>\n";
      if (spec.cell_labels && !masked) {
        svg += "<text class=\"cell-label\" x=\"" + std::to_string(x + cell / 2) + "\" y=\"" +
               std::to_string(y + cell / 2 + 4) + "\" text-anchor=\"middle\" font-size=\"9\">" +
               format_fixed(v, 2) + "</text>\n";
      }
    }
  }
  // Legend: color ramp with its clamped range, plus mode and encoder.
  const int ly = margin_top + static_cast<int>(n) * cell + 16;
  const double lo = z_mode ? -3.0 : 0.0;
  const double hi = z_mode ? 3.0 : 1.0;
  for (int k = 0; k < 11; ++k) {
    const double v = lo + (hi - lo) * k / 10.0;
    svg += "<rect class=\"legend-swatch\" x=\"" + std::to_string(margin_left + k * 14) + "\" y=\"" +
           std::to_string(ly) + "\" width=\"14\" height=\"10\" fill=\"" + heatmap_color(v, spec.source) +
           "\"/>\n";
  }
  svg += "<text class=\"legend\" x=\"" + std::to_string(margin_left) + "\" y=\"" + std::to_string(ly + 24) +
         "\">mode: " + std::string(to_string(spec.source)) + " | encoder: " + xml_escape(spec.encoder_id) +
         " | scale: [" + num(lo) + ", " + num(hi) + "]</text>\n";
  svg += "</svg>\n";
  return svg;
}

Figure render_heatmap(const Eigen::MatrixXd& matrix, const std::vector<std::string>& ids,
                      const HeatmapSpec& spec) {
  if (matrix.rows() == 0 || matrix.cols() == 0) throw ParameterError("heatmap of an empty matrix");
  if (matrix.rows() != matrix.cols()) throw ParameterError("heatmap matrix must be square");
  Figure f;
  f.csv = matrix_to_csv(matrix, ids);
  f.svg = render_heatmap_from_csv(f.csv, spec);
  return f;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kPlotW = 520;
constexpr int kPlotH = 320;
constexpr int kPlotLeft = 60;
constexpr int kPlotTop = 40;

std::string plot_axes(const std::string& title, const std::string& x_label, const std::string& y_label,
                      double x_lo, double x_hi, double y_lo, double y_hi) {
  std::string svg;
  if (!title.empty()) {
    svg += "<text class=\"title\" x=\"10\" y=\"18\" font-size=\"13\">" + xml_escape(title) + "</text>\n";
  }
  const int x0 = kPlotLeft;
  const int y0 = kPlotTop + kPlotH;
  svg += "<line class=\"axis\" x1=\"" + std::to_string(x0) + "\" y1=\"" + std::to_string(y0) + "\" x2=\"" +
         std::to_string(x0 + kPlotW) + "\" y2=\"" + std::to_string(y0) + "\" stroke=\"#000\"/>\n";
  svg += "<line class=\"axis\" x1=\"" + std::to_string(x0) + "\" y1=\"" + std::to_string(kPlotTop) +
         "\" x2=\"" + std::to_string(x0) + "\" y2=\"" + std::to_string(y0) + "\" stroke=\"#000\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x_lo + (x_hi - x_lo) * k / 4.0;
    const double yv = y_lo + (y_hi - y_lo) * k / 4.0;
    svg += "<text class=\"tick\" x=\"" + std::to_string(x0 + kPlotW * k / 4) + "\" y=\"" +
           std::to_string(y0 + 14) + "\" text-anchor=\"middle\">" + num(xv) + "</text>\n";
    svg += "<text class=\"tick\" x=\"" + std::to_string(x0 - 6) + "\" y=\"" +
           std::to_string(y0 - kPlotH * k / 4 + 4) + "\" text-anchor=\"end\">" + num(yv) + "</text>\n";
  }
  svg += "<text class=\"axis-label\" x=\"" + std::to_string(x0 + kPlotW / 2) + "\" y=\"" +
         std::to_string(y0 + 32) + "\" text-anchor=\"middle\">" + xml_escape(x_label) + "</text>\n";
  svg += "<text class=\"axis-label\" transform=\"translate(16," + std::to_string(kPlotTop + kPlotH / 2) +
         ") rotate(-90)\" text-anchor=\"middle\">" + xml_escape(y_label) + "</text>\n";
  return svg;
}

}  // namespace

std::string render_cdf_from_csv(std::string_view csv, const std::string& title) {
  const auto curves = cdf_curves_from_csv(csv);
  if (curves.empty()) throw ParameterError("CDF plot needs at least one curve");
  const int height = kPlotTop + kPlotH + 50 + 16 * static_cast<int>(curves.size());
  std::string svg = svg_open(kPlotLeft + kPlotW + 30, height);
  svg += plot_axes(title, "drift threshold", "F(threshold)", 0.0, 2.0, 0.0, 1.0);
  auto px = [](double d) { return num(kPlotLeft + kPlotW * d / 2.0); };
  auto py = [](double f) { return num(kPlotTop + kPlotH * (1.0 - f)); };
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& knots = curves[c].knots;
    const char* color = kPalette[c % kPalette.size()];
    std::string points = px(0.0) + "," + py(0.0);
    double level = 0.0;
    for (const auto& k : knots) {
      points += " " + px(k.delta) + "," + py(level);
      level = k.value;
      points += " " + px(k.delta) + "," + py(level);
    }
    svg += "<polyline class=\"cdf-curve\" data-label=\"" + xml_escape(curves[c].label) +
           "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
    const int ly = kPlotTop + kPlotH + 50 + 16 * static_cast<int>(c);
    svg += "<rect class=\"legend-swatch\" x=\"" + std::to_string(kPlotLeft) + "\" y=\"" + std::to_string(ly - 9) +
           "\" width=\"12\" height=\"3\" fill=\"" + color + "\"/>\n";
    svg += "<text class=\"legend\" x=\"" + std::to_string(kPlotLeft + 18) + "\" y=\"" + std::to_string(ly) +
           "\">" + xml_escape(curves[c].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

Figure render_cdf(const std::vector<std::pair<std::string, EmpiricalCdf<double>>>& curves,
                  const std::string& title) {
  if (curves.empty()) throw ParameterError("CDF plot needs at least one curve");
  Figure f;
  f.csv = csv_row({"label", "delta", "F"});
  for (const auto& [label, cdf] : curves) {
    for (const auto& k : cdf.knots()) {
      f.csv += csv_row({label, format_double(k.delta), format_double(k.value)});
    }
  }
  f.svg = render_cdf_from_csv(f.csv, title);
  return f;
}

std::vector<CdfCurve> cdf_curves_from_csv(std::string_view csv) {
  const auto lines = lines_of(csv);
  std::vector<CdfCurve> curves;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = csv_split(lines[i]);
    if (cells.size() != 3) throw ParameterError("CDF CSV row needs 3 fields");
    if (curves.empty() || curves.back().label != cells[0]) curves.push_back({cells[0], {}});
    curves.back().knots.push_back({parse_number(cells[1]), parse_number(cells[2])});
  }
  return curves;
}

// ---------------------------------------------------------------------------

std::string projection_csv(const std::vector<ProjectedPoint>& points) {
  std::string out = csv_row({"record_ref", "model_label", "origin_label", "x", "y"});
  for (const auto& p : points) {
    out += csv_row({p.record_ref, p.model_label, p.origin_label, format_double(p.x), format_double(p.y)});
  }
  return out;
}

std::vector<ProjectedPoint> projection_from_csv(std::string_view csv) {
  const auto lines = lines_of(csv);
  std::vector<ProjectedPoint> points;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = csv_split(lines[i]);
    if (cells.size() != 5) throw ParameterError("projection CSV row needs 5 fields");
    points.push_back({parse_number(cells[3]), parse_number(cells[4]), cells[0], cells[1], cells[2]});
  }
  return points;
}

std::string render_scatter(const std::vector<ProjectedPoint>& points, ScatterColoring coloring,
                           const std::string& title) {
  if (points.empty()) throw ParameterError("scatter plot needs at least one point");
  auto label_of = [&](const ProjectedPoint& p) -> const std::string& {
    return coloring == ScatterColoring::ByModel ? p.model_label : p.origin_label;
  };
  std::map<std::string, std::size_t> labels;
  for (const auto& p : points) labels.emplace(label_of(p), 0);
  std::size_t idx = 0;
  for (auto& [label, i] : labels) i = idx++;

  double x_lo = points[0].x, x_hi = points[0].x, y_lo = points[0].y, y_hi = points[0].y;
  for (const auto& p : points) {
    x_lo = std::min(x_lo, p.x);
    x_hi = std::max(x_hi, p.x);
    y_lo = std::min(y_lo, p.y);
    y_hi = std::max(y_hi, p.y);
  }
  if (x_hi - x_lo < 1e-12) x_hi = x_lo + 1.0;
  if (y_hi - y_lo < 1e-12) y_hi = y_lo + 1.0;

  const int height = kPlotTop + kPlotH + 50 + 16 * static_cast<int>(labels.size());
  std::string svg = svg_open(kPlotLeft + kPlotW + 30, height);
  svg += plot_axes(title, "t-SNE 1", "t-SNE 2", x_lo, x_hi, y_lo, y_hi);
  for (const auto& p : points) {
    const double cx = kPlotLeft + kPlotW * (p.x - x_lo) / (x_hi - x_lo);
    const double cy = kPlotTop + kPlotH * (1.0 - (p.y - y_lo) / (y_hi - y_lo));
    svg += "<circle class=\"point\" cx=\"" + num(cx) + "\" cy=\"" + num(cy) + "\" r=\"3\" fill=\"" +
           kPalette[labels.at(label_of(p)) % kPalette.size()] + "\"/>\n";
  }
  for (const auto& [label, i] : labels) {
    const int ly = kPlotTop + kPlotH + 50 + 16 * static_cast<int>(i);
    svg += "<circle class=\"legend-swatch\" cx=\"" + std::to_string(kPlotLeft + 5) + "\" cy=\"" +
           std::to_string(ly - 4) + "\" r=\"4\" fill=\"" + kPalette[i % kPalette.size()] + "\"/>\n";
    svg += "<text class=\"legend\" x=\"" + std::to_string(kPlotLeft + 14) + "\" y=\"" + std::to_string(ly) +
           "\">" + xml_escape(label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace driftlab

#include <charconv>
#include <sstream>

#include "driftlab/format.hpp"
#include "driftlab/pbss.hpp"
#include "json.hpp"

namespace driftlab {

std::string matrix_to_csv(const Eigen::MatrixXd& values, const std::vector<std::string>& ids) {
  if (values.rows() != values.cols() || static_cast<std::size_t>(values.rows()) != ids.size()) {
    throw ParameterError("matrix_to_csv: shape does not match ids");
  }
  std::string out = csv_row(ids);
  std::vector<std::string> cells(ids.size());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) cells[static_cast<std::size_t>(j)] = format_double(values(i, j));
    out += csv_row(cells);
  }
  return out;
}

LabeledMatrix matrix_from_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("matrix CSV is empty");
  LabeledMatrix out;
  out.ids = csv_split(line);
  const auto n = static_cast<Eigen::Index>(out.ids.size());
  out.values = Eigen::MatrixXd::Zero(n, n);
  Eigen::Index row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= n) throw ParameterError("matrix CSV has more rows than columns");
    const auto cells = csv_split(line);
    if (static_cast<Eigen::Index>(cells.size()) != n) throw ParameterError("matrix CSV row has wrong width");
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& c = cells[static_cast<std::size_t>(j)];
      double v = 0;
      auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc{} || p != c.data() + c.size()) throw ParameterError("bad number in matrix CSV: " + c);
      out.values(row, j) = v;
    }
    ++row;
  }
  if (row != n) throw ParameterError("matrix CSV has fewer rows than columns");
  return out;
}

std::string to_json(const DriftMatrix& m) {
  nlohmann::ordered_json doc;
  doc["encoder_id"] = m.encoder_id;
  doc["prompt_ids"] = m.prompt_ids;
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m.scores.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < m.scores.cols(); ++j) row.push_back(m.scores(i, j));
    rows.push_back(std::move(row));
  }
  doc["scores"] = std::move(rows);
  return doc.dump();
}

}  // namespace driftlab

#pragma once

// Feature tables: the n x d matrices every scorer consumes, plus CSV I/O,
// standardization and average pooling.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ssdl/core.hpp"

namespace ssdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rows are observations. Invariants are enforced by the constructor; an empty
// table (n = 0) is legal and keeps its dimension.
class FeatureTable {
 public:
  FeatureTable() = default;

  FeatureTable(std::vector<std::string> ids, Matrix features,
               std::optional<std::vector<int>> labels = std::nullopt)
      : ids_(std::move(ids)), features_(std::move(features)), labels_(std::move(labels)) {
    validate();
  }

  std::size_t n() const noexcept { return ids_.size(); }
  std::size_t d() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  bool empty() const noexcept { return ids_.empty(); }
  bool has_labels() const noexcept { return labels_.has_value(); }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const {
    if (!labels_) throw DataError("table has no labels");
    return *labels_;
  }
  const std::optional<std::vector<int>>& maybe_labels() const noexcept { return labels_; }

  Vector row(std::size_t i) const { return features_.row(static_cast<Eigen::Index>(i)).transpose(); }

  // Number of classes implied by the labels (max label + 1).
  int num_classes() const {
    const auto& y = labels();
    if (y.empty()) return 0;
    return *std::max_element(y.begin(), y.end()) + 1;
  }

  // Rows at the given indices, in the given order.
  FeatureTable select(std::span<const std::size_t> rows) const {
    std::vector<std::string> ids;
    ids.reserve(rows.size());
    Matrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    std::optional<std::vector<int>> y;
    if (labels_) y.emplace();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto r = rows[k];
      if (r >= n()) throw DataError("row index out of range");
      ids.push_back(ids_[r]);
      x.row(static_cast<Eigen::Index>(k)) = features_.row(static_cast<Eigen::Index>(r));
      if (y) y->push_back((*labels_)[r]);
    }
    return FeatureTable(std::move(ids), std::move(x), std::move(y));
  }

  FeatureTable with_features(Matrix x) const { return FeatureTable(ids_, std::move(x), labels_); }

  FeatureTable without_labels() const { return FeatureTable(ids_, features_, std::nullopt); }

 private:
  void validate() const {
    if (features_.cols() < 1) throw DataError("feature dimension must be >= 1");
    if (static_cast<std::size_t>(features_.rows()) != ids_.size()) {
      throw DataError("id count does not match feature rows");
    }
    if (!features_.allFinite()) {
      for (Eigen::Index i = 0; i < features_.rows(); ++i) {
        for (Eigen::Index j = 0; j < features_.cols(); ++j) {
          if (!std::isfinite(features_(i, j))) {
            throw DataError("non-finite feature at row " + std::to_string(i) + ", column f" +
                            std::to_string(j));
          }
        }
      }
    }
    std::unordered_set<std::string> seen;
    for (const auto& id : ids_) {
      if (!seen.insert(id).second) throw DataError("duplicate id '" + id + "'");
    }
    if (labels_) {
      if (labels_->size() != ids_.size()) throw DataError("label count does not match rows");
      for (int y : *labels_) {
        if (y < 0) throw DataError("labels must be non-negative class indices");
      }
    }
  }

  std::vector<std::string> ids_;
  Matrix features_;
  std::optional<std::vector<int>> labels_;
};

// Vertical concatenation. Labels are kept only when both sides carry them.
inline FeatureTable concat(const FeatureTable& a, const FeatureTable& b) {
  if (a.d() != b.d()) throw DataError("cannot concatenate tables of different dimension");
  std::vector<std::string> ids = a.ids();
  ids.insert(ids.end(), b.ids().begin(), b.ids().end());
  Matrix x(a.features().rows() + b.features().rows(), a.features().cols());
  x << a.features(), b.features();
  std::optional<std::vector<int>> y;
  if (a.has_labels() && b.has_labels()) {
    y = a.labels();
    y->insert(y->end(), b.labels().begin(), b.labels().end());
  }
  return FeatureTable(std::move(ids), std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// Text formatting

inline std::string format_real(double v, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_real(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature CSV: header `id,f0,...,f{d-1}[,label]`, one observation per row.

inline FeatureTable read_feature_csv(std::istream& in, bool expect_labels) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty dataset", 1);
  ++line_no;
  const auto header = detail::split_csv_line(detail::trim(line));
  if (header.empty() || detail::trim(header[0]) != "id") {
    throw ParseError("header must start with 'id'", line_no);
  }
  const bool has_label = header.size() >= 2 && detail::trim(header.back()) == "label";
  const std::size_t d = header.size() - 1 - (has_label ? 1 : 0);
  if (d == 0) throw ParseError("header declares no feature columns", line_no);
  for (std::size_t j = 0; j < d; ++j) {
    if (detail::trim(header[j + 1]) != "f" + std::to_string(j)) {
      throw ParseError("expected column 'f" + std::to_string(j) + "' in header", line_no);
    }
  }
  if (expect_labels && !has_label) throw ParseError("missing label column", line_no);
  const std::size_t n_columns = header.size();

  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<int> labels;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split_csv_line(trimmed);
    if (cells.size() != n_columns) {
      throw ParseError("malformed row: expected " + std::to_string(n_columns) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    std::string id(detail::trim(cells[0]));
    if (id.empty()) throw ParseError("empty id", line_no);
    if (!seen.insert(id).second) throw ParseError("duplicate id '" + id + "'", line_no);
    for (std::size_t j = 0; j < d; ++j) {
      const auto v = detail::parse_real(cells[j + 1]);
      if (!v) {
        throw ParseError("non-numeric cell in column f" + std::to_string(j), line_no);
      }
      if (!std::isfinite(*v)) {
        throw ParseError("non-finite value in column f" + std::to_string(j), line_no);
      }
      values.push_back(*v);
    }
    if (has_label) {
      const auto y = detail::parse_int(cells.back());
      if (!y || *y < 0) throw ParseError("label must be a non-negative integer", line_no);
      labels.push_back(*y);
    }
    ids.push_back(std::move(id));
  }
  if (ids.empty()) throw ParseError("empty dataset", line_no);

  Matrix x(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * d + j];
    }
  }
  std::optional<std::vector<int>> y;
  if (has_label) y = std::move(labels);
  return FeatureTable(std::move(ids), std::move(x), std::move(y));
}

inline FeatureTable load_feature_table(const std::string& path, bool expect_labels) {
  auto in = detail::open_input(path);
  return read_feature_csv(in, expect_labels);
}

inline void write_feature_csv(std::ostream& out, const FeatureTable& table) {
  out << "id";
  for (std::size_t j = 0; j < table.d(); ++j) out << ",f" << j;
  if (table.has_labels()) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < table.n(); ++i) {
    out << table.ids()[i];
    for (std::size_t j = 0; j < table.d(); ++j) {
      out << ',' << format_real(table.features()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    if (table.has_labels()) out << ',' << table.labels()[i];
    out << '\n';
  }
}

inline void save_feature_table(const std::string& path, const FeatureTable& table) {
  auto out = detail::open_output(path);
  write_feature_csv(out, table);
}

// ---------------------------------------------------------------------------
// Score CSV: header `id,harm`, rows sorted by descending harm (stable).

struct ScoredId {
  std::string id;
  double harm = 0.0;
};

inline std::vector<ScoredId> attach_ids(const FeatureTable& table, std::span<const double> scores) {
  if (scores.size() != table.n()) throw DataError("score count does not match table rows");
  std::vector<ScoredId> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({table.ids()[i], scores[i]});
  return out;
}

inline void write_score_csv(std::ostream& out, std::vector<ScoredId> scores) {
  std::stable_sort(scores.begin(), scores.end(),
                   [](const ScoredId& a, const ScoredId& b) { return a.harm > b.harm; });
  out << "id,harm\n";
  for (const auto& s : scores) out << s.id << ',' << format_real(s.harm) << '\n';
}

inline void save_score_csv(const std::string& path, std::vector<ScoredId> scores) {
  auto out = detail::open_output(path);
  write_score_csv(out, std::move(scores));
}

inline std::vector<ScoredId> read_score_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty score file", 1);
  const auto header = detail::split_csv_line(detail::trim(line));
  if (header.size() != 2 || detail::trim(header[0]) != "id" || detail::trim(header[1]) != "harm") {
    throw ParseError("score header must be 'id,harm'", line_no);
  }
  std::vector<ScoredId> out;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = detail::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = detail::split_csv_line(trimmed);
    if (cells.size() != 2) throw ParseError("malformed score row", line_no);
    const auto v = detail::parse_real(cells[1]);
    if (!v || !std::isfinite(*v)) throw ParseError("harm must be a finite number", line_no);
    std::string id(detail::trim(cells[0]));
    if (!seen.insert(id).second) throw ParseError("duplicate id '" + id + "'", line_no);
    out.push_back({std::move(id), *v});
  }
  return out;
}

inline std::vector<ScoredId> load_score_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return read_score_csv(in);
}

// ---------------------------------------------------------------------------
// Standardization

inline constexpr double kStddevFloor = 1e-8;

struct StandardizationStats {
  Vector means;
  Vector stddevs;

  std::size_t d() const noexcept { return static_cast<std::size_t>(means.size()); }
};

inline StandardizationStats fit_standardizer(const FeatureTable& table) {
  if (table.n() < 2) throw DataError("standardization needs at least 2 rows");
  const Matrix& x = table.features();
  StandardizationStats stats;
  stats.means = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - stats.means.transpose();
  stats.stddevs = (centered.colwise().squaredNorm().transpose() / static_cast<double>(table.n() - 1))
                      .array()
                      .sqrt()
                      .max(kStddevFloor);
  return stats;
}

inline FeatureTable apply_standardizer(const FeatureTable& table, const StandardizationStats& stats) {
  if (table.d() != stats.d()) {
    throw DataError("standardizer dimension " + std::to_string(stats.d()) + " does not match table dimension " +
                    std::to_string(table.d()));
  }
  Matrix x = (table.features().rowwise() - stats.means.transpose()).array().rowwise() /
             stats.stddevs.transpose().array();
  return table.with_features(std::move(x));
}

inline void write_standardizer(std::ostream& out, const StandardizationStats& stats) {
  out << "standardizer " << stats.d() << '\n' << "means";
  for (Eigen::Index j = 0; j < stats.means.size(); ++j) out << ' ' << format_real(stats.means(j));
  out << '\n' << "stddevs";
  for (Eigen::Index j = 0; j < stats.stddevs.size(); ++j) out << ' ' << format_real(stats.stddevs(j));
  out << '\n';
}

// Whitespace-token reader for the structured text model files.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw DataError("unexpected end of model file");
    return w;
  }

  void expect(std::string_view keyword) {
    const auto w = word();
    if (w != keyword) throw DataError("model file: expected '" + std::string(keyword) + "', found '" + w + "'");
  }

  double real() {
    const auto w = word();
    const auto v = detail::parse_real(w);
    if (!v) throw DataError("model file: expected a number, found '" + w + "'");
    return *v;
  }

  std::size_t count() {
    const auto w = word();
    const auto v = detail::parse_int(w);
    if (!v || *v < 0) throw DataError("model file: expected a count, found '" + w + "'");
    return static_cast<std::size_t>(*v);
  }

  bool at_end() {
    in_ >> std::ws;
    return in_.peek() == std::char_traits<char>::eof();
  }

 private:
  std::istream& in_;
};

inline StandardizationStats read_standardizer(TokenReader& in) {
  in.expect("standardizer");
  const auto d = static_cast<Eigen::Index>(in.count());
  StandardizationStats stats{Vector(d), Vector(d)};
  in.expect("means");
  for (Eigen::Index j = 0; j < d; ++j) stats.means(j) = in.real();
  in.expect("stddevs");
  for (Eigen::Index j = 0; j < d; ++j) stats.stddevs(j) = in.real();
  return stats;
}

// ---------------------------------------------------------------------------
// Average pooling: consecutive blocks of size d / target_dim are averaged.

inline std::vector<double> average_pool_features(std::span<const double> v, std::size_t target_dim) {
  if (target_dim == 0) throw DataError("pooling target dimension must be >= 1");
  if (v.size() % target_dim != 0) {
    throw DataError("cannot pool " + std::to_string(v.size()) + " features into " + std::to_string(target_dim) +
                    " blocks");
  }
  const std::size_t block = v.size() / target_dim;
  std::vector<double> out(target_dim, 0.0);
  for (std::size_t k = 0; k < target_dim; ++k) {
    double sum = 0.0;
    for (std::size_t j = 0; j < block; ++j) sum += v[k * block + j];
    out[k] = sum / static_cast<double>(block);
  }
  return out;
}

inline FeatureTable average_pool_table(const FeatureTable& table, std::size_t target_dim) {
  if (target_dim == 0 || table.d() % target_dim != 0) {
    throw DataError("cannot pool " + std::to_string(table.d()) + " features into " + std::to_string(target_dim) +
                    " blocks");
  }
  Matrix x(table.features().rows(), static_cast<Eigen::Index>(target_dim));
  std::vector<double> row(table.d());
  for (Eigen::Index i = 0; i < table.features().rows(); ++i) {
    for (std::size_t j = 0; j < table.d(); ++j) row[j] = table.features()(i, static_cast<Eigen::Index>(j));
    const auto pooled = average_pool_features(row, target_dim);
    for (std::size_t k = 0; k < target_dim; ++k) x(i, static_cast<Eigen::Index>(k)) = pooled[k];
  }
  return table.with_features(std::move(x));
}

}  // namespace ssdl

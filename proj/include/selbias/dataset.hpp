#ifndef SELBIAS_DATASET_HPP_
#define SELBIAS_DATASET_HPP_

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "selbias/error.hpp"
#include "selbias/graph.hpp"

namespace selbias {

struct Column {
  std::string id;
  NodeRole role = NodeRole::System;
  bool discrete = false;
};

/// Immutable table of observations. Rows are samples; columns are System or
/// Context variables (selection is never observed).
class Dataset {
 public:
  Dataset() = default;

  Dataset(std::vector<Column> columns, Eigen::MatrixXd values) : columns_(std::move(columns)), values_(std::move(values)) {
    if (static_cast<Eigen::Index>(columns_.size()) != values_.cols())
      fail(ErrorCode::InvalidArgument, "column count does not match data width");
    int contexts = 0;
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (columns_[j].role == NodeRole::Selection)
        fail(ErrorCode::InvalidArgument, "selection column '" + columns_[j].id + "' cannot be observed");
      if (columns_[j].role == NodeRole::Context) ++contexts;
      for (std::size_t k = 0; k < j; ++k)
        if (columns_[k].id == columns_[j].id) fail(ErrorCode::InvalidArgument, "duplicate column '" + columns_[j].id + "'");
    }
    if (contexts > 1) fail(ErrorCode::InvalidArgument, "at most one context column is supported");
    if (!values_.allFinite()) fail(ErrorCode::InvalidArgument, "dataset contains missing or non-finite values");
  }

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return columns_.size(); }
  const std::vector<Column>& columns() const { return columns_; }
  const Column& column(int j) const { return columns_.at(static_cast<std::size_t>(j)); }
  const Eigen::MatrixXd& values() const { return values_; }
  auto col(int j) const { return values_.col(j); }

  int index_of(std::string_view id) const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j].id == id) return static_cast<int>(j);
    fail(ErrorCode::UnknownNode, "unknown column '" + std::string(id) + "'");
  }

  std::optional<int> context_index() const {
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j].role == NodeRole::Context) return static_cast<int>(j);
    return std::nullopt;
  }

  std::vector<int> system_columns() const {
    std::vector<int> out;
    for (std::size_t j = 0; j < columns_.size(); ++j)
      if (columns_[j].role == NodeRole::System) out.push_back(static_cast<int>(j));
    return out;
  }

  Dataset select_rows(std::span<const std::size_t> rows) const {
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = values_.row(static_cast<Eigen::Index>(rows[i]));
    return Dataset(columns_, std::move(sub));
  }

  /// Copy with column j replaced by 1{x > mean(x)} and flagged discrete.
  Dataset binarized_at_mean(int j) const {
    Dataset out = *this;
    const double mean = values_.col(j).mean();
    out.values_.col(j) = (values_.col(j).array() > mean).cast<double>();
    out.columns_.at(static_cast<std::size_t>(j)).discrete = true;
    return out;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    if (a.columns_.size() != b.columns_.size() || a.values_.rows() != b.values_.rows()) return false;
    for (std::size_t j = 0; j < a.columns_.size(); ++j) {
      const auto &x = a.columns_[j], &y = b.columns_[j];
      if (x.id != y.id || x.role != y.role || x.discrete != y.discrete) return false;
    }
    return a.values_ == b.values_;
  }

 private:
  std::vector<Column> columns_;
  Eigen::MatrixXd values_;
};

// ---------------------------------------------------------------------------
// CSV: header of column ids, one numeric row per sample. Roles come from an
// optional sidecar JSON {"context": [...], "discrete": [...]}.

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

struct DatasetMeta {
  std::vector<std::string> context;
  std::vector<std::string> discrete;
};

inline DatasetMeta parse_dataset_meta(const std::string& text) {
  DatasetMeta meta;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.contains("context")) meta.context = j.at("context").get<std::vector<std::string>>();
    if (j.contains("discrete")) meta.discrete = j.at("discrete").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, std::string("invalid dataset sidecar: ") + e.what());
  }
  return meta;
}

inline std::string format_dataset_meta(const Dataset& d) {
  nlohmann::json j;
  j["context"] = nlohmann::json::array();
  j["discrete"] = nlohmann::json::array();
  for (const auto& c : d.columns()) {
    if (c.role == NodeRole::Context) j["context"].push_back(c.id);
    if (c.discrete) j["discrete"].push_back(c.id);
  }
  return j.dump();
}

inline Dataset parse_dataset_csv(std::istream& in, const DatasetMeta& meta = {}) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::Format, "dataset CSV is empty");
  const auto header = detail::split_csv_line(line);
  std::vector<Column> cols;
  for (const auto& h : header) {
    if (h.empty()) fail(ErrorCode::Format, "empty column id in CSV header");
    cols.push_back({h, NodeRole::System, false});
  }
  auto find = [&](const std::string& id) -> Column& {
    for (auto& c : cols)
      if (c.id == id) return c;
    fail(ErrorCode::Format, "sidecar references unknown column '" + id + "'");
  };
  for (const auto& id : meta.context) find(id).role = NodeRole::Context;
  for (const auto& id : meta.discrete) find(id).discrete = true;

  std::vector<double> flat;
  std::size_t nrows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != cols.size())
      fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": expected " + std::to_string(cols.size()) + " fields");
    for (const auto& cell : cells) {
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
        fail(ErrorCode::Format, "line " + std::to_string(lineno) + ": bad numeric value '" + cell + "'");
      flat.push_back(v);
    }
    ++nrows;
  }
  Eigen::MatrixXd values(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < nrows; ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[i * cols.size() + j];
  try {
    return Dataset(std::move(cols), std::move(values));
  } catch (const Error& e) {
    fail(ErrorCode::Format, e.what());
  }
}

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  for (std::size_t j = 0; j < d.cols(); ++j) out << (j ? "," : "") << d.columns()[j].id;
  out << '\n';
  for (std::size_t i = 0; i < d.rows(); ++i) {
    for (std::size_t j = 0; j < d.cols(); ++j)
      out << (j ? "," : "") << format_double(d.values()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
}

inline std::string sidecar_path(const std::string& csv_path) { return csv_path + ".json"; }

/// Reads `path`; roles come from `meta_path` if given, else from `<path>.json` when it exists.
inline Dataset read_dataset(const std::string& path, const std::optional<std::string>& meta_path = std::nullopt) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open dataset '" + path + "'");
  DatasetMeta meta;
  const std::string mp = meta_path.value_or(sidecar_path(path));
  if (std::ifstream side(mp); side) {
    std::stringstream ss;
    ss << side.rdbuf();
    meta = parse_dataset_meta(ss.str());
  } else if (meta_path) {
    fail(ErrorCode::Io, "cannot open dataset sidecar '" + mp + "'");
  }
  return parse_dataset_csv(in, meta);
}

inline void write_dataset(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write dataset '" + path + "'");
  write_dataset_csv(out, d);
  std::ofstream side(sidecar_path(path));
  if (!side) fail(ErrorCode::Io, "cannot write dataset sidecar for '" + path + "'");
  side << format_dataset_meta(d) << '\n';
}

}  // namespace selbias

#endif  // SELBIAS_DATASET_HPP_

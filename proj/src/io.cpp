#include "aghqmm/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace aghqmm {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace and CR
    size_t a = cell.find_first_not_of(" \t\r");
    size_t b = cell.find_last_not_of(" \t\r");
    cells.push_back(a == std::string::npos ? "" : cell.substr(a, b - a + 1));
  }
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

}  // namespace

int CsvTable::column_index(const std::string& name) const {
  for (int j = 0; j < ncol(); ++j)
    if (columns[static_cast<size_t>(j)] == name) return j;
  throw std::invalid_argument("column not found: " + name);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  table.columns = split_line(line);
  if (table.columns.empty()) throw std::runtime_error("empty header: " + path);

  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_line(line);
    if (cells.size() != table.columns.size())
      throw std::runtime_error(path + ": row " + std::to_string(table.raw.size() + 2) +
                               " has " + std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(table.columns.size()));
    std::vector<double> vals(cells.size());
    for (size_t j = 0; j < cells.size(); ++j) {
      try {
        size_t pos = 0;
        vals[j] = std::stod(cells[j], &pos);
        if (pos != cells[j].size()) vals[j] = std::numeric_limits<double>::quiet_NaN();
      } catch (...) {
        vals[j] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    table.raw.push_back(std::move(cells));
    table.rows.push_back(std::move(vals));
  }
  if (table.rows.empty()) throw std::runtime_error("no data rows: " + path);
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.precision(17);
  for (size_t j = 0; j < columns.size(); ++j) out << (j ? "," : "") << columns[j];
  out << "\n";
  for (const auto& row : rows) {
    if (row.size() != columns.size())
      throw std::invalid_argument("write_csv: row width does not match header");
    for (size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset build_dataset(const CsvTable& table, const ModelSpec& spec) {
  const int yj = table.column_index(spec.response);
  const int gj = table.column_index(spec.group);
  std::vector<int> xj, vj;
  for (const std::string& name : spec.fixed) xj.push_back(table.column_index(name));
  for (const std::string& name : spec.random) vj.push_back(table.column_index(name));

  const int q = static_cast<int>(xj.size()) + (spec.fixed_intercept ? 1 : 0);
  const int d = static_cast<int>(vj.size()) + (spec.random_intercept ? 1 : 0);
  if (q == 0) throw std::invalid_argument("model has no fixed-effect columns");
  if (d == 0) throw std::invalid_argument("model has no random-effect columns");

  // rows per group, keyed by cell text, ordered by first appearance
  std::map<std::string, int> index;
  std::vector<std::vector<int>> members;
  for (int i = 0; i < table.nrow(); ++i) {
    const std::string& key = table.raw[static_cast<size_t>(i)][static_cast<size_t>(gj)];
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, static_cast<int>(members.size())).first;
      members.emplace_back();
    }
    members[static_cast<size_t>(it->second)].push_back(i);
  }

  Dataset data;
  data.family = spec.family;
  data.q = q;
  data.d = d;
  data.groups.reserve(members.size());
  for (const std::vector<int>& rows : members) {
    GroupData g;
    const int n = static_cast<int>(rows.size());
    g.y.resize(n);
    g.X.resize(n, q);
    g.V.resize(n, d);
    for (int r = 0; r < n; ++r) {
      const std::vector<double>& cells = table.rows[static_cast<size_t>(rows[static_cast<size_t>(r)])];
      const double y = cells[static_cast<size_t>(yj)];
      if (!std::isfinite(y))
        throw std::runtime_error("non-numeric response in column " + spec.response);
      if (spec.family.kind == Family::Kind::BernoulliLogit && y != 0.0 && y != 1.0)
        throw std::runtime_error("bernoulli response must be 0 or 1, got " + std::to_string(y));
      g.y(r) = y;
      int c = 0;
      if (spec.fixed_intercept) g.X(r, c++) = 1.0;
      for (int col : xj) {
        const double v = cells[static_cast<size_t>(col)];
        if (!std::isfinite(v))
          throw std::runtime_error("non-numeric covariate in column " +
                                   table.columns[static_cast<size_t>(col)]);
        g.X(r, c++) = v;
      }
      c = 0;
      if (spec.random_intercept) g.V(r, c++) = 1.0;
      for (int col : vj) {
        const double v = cells[static_cast<size_t>(col)];
        if (!std::isfinite(v))
          throw std::runtime_error("non-numeric covariate in column " +
                                   table.columns[static_cast<size_t>(col)]);
        g.V(r, c++) = v;
      }
    }
    data.groups.push_back(std::move(g));
  }
  return data;
}

}  // namespace aghqmm

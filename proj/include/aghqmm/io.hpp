#pragma once

#include <string>
#include <vector>

#include "aghqmm/model.hpp"

namespace aghqmm {

/// Header + rows of a rectangular CSV file.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;          // numeric cells, NaN for group column ok
  std::vector<std::vector<std::string>> raw;      // original cell text

  int ncol() const { return static_cast<int>(columns.size()); }
  int nrow() const { return static_cast<int>(rows.size()); }
  int column_index(const std::string& name) const;  // throws if missing
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

struct ModelSpec {
  std::string response;
  std::string group;
  std::vector<std::string> fixed;    // covariate columns for X
  std::vector<std::string> random;   // covariate columns for V
  bool fixed_intercept = true;
  bool random_intercept = true;
  Family family = Family::bernoulli();
};

/// Assemble per-group design matrices. Groups are keyed by the raw text of the
/// group column and ordered by first appearance. Bernoulli responses must be
/// 0 or 1.
Dataset build_dataset(const CsvTable& table, const ModelSpec& spec);

}  // namespace aghqmm

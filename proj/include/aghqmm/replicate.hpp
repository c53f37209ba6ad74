#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aghqmm/inference.hpp"
#include "aghqmm/sim.hpp"

namespace aghqmm {

struct ReplicateSpec {
  Design design = Design::Eq5;
  int m = 200;
  int n = 5;
  int reps = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  double alpha = 0.05;
  FitOptions fit;  // fit.k is the quadrature size
};

/// One tracked parameter across replications. `rel` is the mean of
/// estimate / truth, `coverage` the fraction of intervals containing the
/// truth with `coverage_band` = 2 sqrt(coverage (1 - coverage) / B).
struct ParamSummary {
  std::string label;
  double truth = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double rel = 0.0;
  double coverage = 0.0;
  double coverage_band = 0.0;
  double mean_length = 0.0;
};

struct RepRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  bool converged = false;
  int outer_iters = 0;
  long inner_iters = 0;
  double nll = 0.0;
  std::vector<Interval> beta;   // fixed effects
  std::vector<Interval> sigma;  // lower triangle of Sigma, column-major
};

struct ReplicateResult {
  std::vector<RepRecord> records;        // in replicate order
  std::vector<ParamSummary> summaries;   // betas then sigma entries
  int failures = 0;
};

ReplicateResult replicate_study(const ReplicateSpec& spec);

/// Per-replicate rows followed by nothing; summaries go to a separate table.
void write_replicate_csv(const std::string& path, const ReplicateResult& result);
void write_summary_csv(const std::string& path, const ReplicateResult& result);

}  // namespace aghqmm

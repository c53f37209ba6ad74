#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "aghqmm/model.hpp"

namespace aghqmm {

/// mt19937_64 with explicit uniform and Box-Muller normal draws, so streams
/// are identical across standard libraries for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double normal();

  /// Decorrelated seed for stream `index`, splitmix64 on seed + index.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

enum class Design { Eq5, Eq6 };

/// Binary-response designs used throughout: Eq5 has a random intercept and
/// slope over n time points in [-3, 3] with a group-level binary covariate on
/// the second half of the groups; Eq6 is the random-intercept version.
struct SimSpec {
  Design design = Design::Eq5;
  int m = 200;                  // groups
  int n = 5;                    // observations per group
  Eigen::VectorXd beta;         // empty = design default
  Eigen::MatrixXd sigma;        // empty = design default; must be SPD
  std::uint64_t seed = 1;
};

struct SimResult {
  Dataset data;
  Eigen::VectorXd beta;                    // truth used
  Eigen::MatrixXd sigma;                   // truth used
  std::vector<std::string> columns;        // CSV layout of the draw
  std::vector<std::vector<double>> rows;
};

Eigen::VectorXd design_default_beta(Design design);
Eigen::MatrixXd design_default_sigma(Design design);

SimResult simulate(const SimSpec& spec);

}  // namespace aghqmm

#include "aghqmm/replicate.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "aghqmm/io.hpp"
#include "aghqmm/optimizer.hpp"

namespace aghqmm {

namespace {

RepRecord run_one(const ReplicateSpec& spec, int rep) {
  RepRecord rec;
  rec.rep = rep;
  rec.seed = Rng::derive_seed(spec.seed, static_cast<std::uint64_t>(rep));
  try {
    SimSpec sim;
    sim.design = spec.design;
    sim.m = spec.m;
    sim.n = spec.n;
    sim.seed = rec.seed;
    const SimResult draw = simulate(sim);

    const FitResult fitres = fit(draw.data, spec.fit);
    rec.converged = fitres.converged;
    rec.outer_iters = fitres.outer_iters;
    rec.inner_iters = fitres.total_inner_iters;
    rec.nll = fitres.nll;

    const int q = draw.data.q;
    const int d = draw.data.d;
    const int nvc = d + d * (d - 1) / 2;
    const std::vector<Interval> all =
        wald_intervals(fitres.theta_hat, fitres.vcov, spec.alpha);
    rec.beta.assign(all.begin(), all.begin() + q);
    rec.sigma = sigma_intervals(fitres.theta_hat.repar,
                                fitres.vcov.block(q, q, nvc, nvc), spec.alpha);
    for (const Interval& iv : rec.beta)
      if (!std::isfinite(iv.lower) || !std::isfinite(iv.upper))
        throw std::runtime_error("non-finite interval for " + iv.label);
    for (const Interval& iv : rec.sigma)
      if (!std::isfinite(iv.lower) || !std::isfinite(iv.upper))
        throw std::runtime_error("non-finite interval for " + iv.label);
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

void summarize(const ReplicateSpec& spec, ReplicateResult& result) {
  const Eigen::VectorXd beta = design_default_beta(spec.design);
  const Eigen::MatrixXd sigma = design_default_sigma(spec.design);
  const int d = static_cast<int>(sigma.rows());

  std::vector<std::pair<std::string, double>> targets;
  for (int j = 0; j < beta.size(); ++j)
    targets.emplace_back("beta" + std::to_string(j + 1), beta(j));
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i)
      targets.emplace_back("sigma" + std::to_string(i + 1) + std::to_string(j + 1),
                           sigma(i, j));

  auto interval_at = [&](const RepRecord& rec, size_t idx) -> const Interval& {
    const size_t nb = rec.beta.size();
    return idx < nb ? rec.beta[idx] : rec.sigma[idx - nb];
  };

  for (size_t t = 0; t < targets.size(); ++t) {
    ParamSummary s;
    s.label = targets[t].first;
    s.truth = targets[t].second;
    int n_ok = 0, n_cover = 0;
    double sum_est = 0.0, sum_rel = 0.0, sum_len = 0.0;
    for (const RepRecord& rec : result.records) {
      if (!rec.ok) continue;
      const Interval& iv = interval_at(rec, t);
      ++n_ok;
      sum_est += iv.estimate;
      sum_rel += iv.estimate / s.truth;
      sum_len += iv.upper - iv.lower;
      if (iv.lower <= s.truth && s.truth <= iv.upper) ++n_cover;
    }
    if (n_ok > 0) {
      s.mean_estimate = sum_est / n_ok;
      s.bias = s.mean_estimate - s.truth;
      s.rel = sum_rel / n_ok;
      s.coverage = static_cast<double>(n_cover) / n_ok;
      s.coverage_band = 2.0 * std::sqrt(s.coverage * (1.0 - s.coverage) / n_ok);
      s.mean_length = sum_len / n_ok;
    }
    result.summaries.push_back(std::move(s));
  }
}

}  // namespace

ReplicateResult replicate_study(const ReplicateSpec& spec) {
  if (spec.reps < 1) throw std::invalid_argument("replicate_study: reps must be >= 1");
  ReplicateResult result;
  result.records.resize(static_cast<size_t>(spec.reps));

  const int nthreads = std::max(1, std::min(spec.threads, spec.reps));
  if (nthreads == 1) {
    for (int rep = 0; rep < spec.reps; ++rep)
      result.records[static_cast<size_t>(rep)] = run_one(spec, rep);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int rep = next.fetch_add(1);
        if (rep >= spec.reps) break;
        result.records[static_cast<size_t>(rep)] = run_one(spec, rep);
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (const RepRecord& rec : result.records)
    if (!rec.ok) ++result.failures;
  summarize(spec, result);
  return result;
}

void write_replicate_csv(const std::string& path, const ReplicateResult& result) {
  std::vector<std::string> columns = {"rep",  "seed",       "ok",        "converged",
                                      "nll",  "outer_iters", "inner_iters"};
  if (result.records.empty()) throw std::invalid_argument("no records to write");
  const RepRecord* first = nullptr;
  for (const RepRecord& rec : result.records)
    if (rec.ok) { first = &rec; break; }
  std::vector<const Interval*> layout;  // of the first successful record, for labels
  if (first) {
    for (const Interval& iv : first->beta) {
      columns.push_back(iv.label);
      columns.push_back(iv.label + "_lo");
      columns.push_back(iv.label + "_hi");
    }
    for (const Interval& iv : first->sigma) {
      columns.push_back(iv.label);
      columns.push_back(iv.label + "_lo");
      columns.push_back(iv.label + "_hi");
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> rows;
  for (const RepRecord& rec : result.records) {
    std::vector<double> row = {static_cast<double>(rec.rep),
                               static_cast<double>(rec.seed),
                               rec.ok ? 1.0 : 0.0,
                               rec.converged ? 1.0 : 0.0,
                               rec.nll,
                               static_cast<double>(rec.outer_iters),
                               static_cast<double>(rec.inner_iters)};
    auto push_all = [&](const std::vector<Interval>& ivs) {
      for (const Interval& iv : ivs) {
        row.push_back(iv.estimate);
        row.push_back(iv.lower);
        row.push_back(iv.upper);
      }
    };
    if (rec.ok) {
      push_all(rec.beta);
      push_all(rec.sigma);
    } else {
      while (row.size() < columns.size()) row.push_back(nan);
    }
    rows.push_back(std::move(row));
  }
  write_csv(path, columns, rows);
}

void write_summary_csv(const std::string& path, const ReplicateResult& result) {
  std::vector<std::string> columns = {"truth",    "mean_estimate", "bias",       "rel",
                                      "coverage", "coverage_band", "mean_length"};
  std::vector<std::string> full = {"parameter"};
  full.insert(full.end(), columns.begin(), columns.end());

  // parameter labels are text, so assemble the file directly
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.precision(17);
  for (size_t j = 0; j < full.size(); ++j) out << (j ? "," : "") << full[j];
  out << "\n";
  for (const ParamSummary& s : result.summaries) {
    out << s.label << "," << s.truth << "," << s.mean_estimate << "," << s.bias << ","
        << s.rel << "," << s.coverage << "," << s.coverage_band << "," << s.mean_length
        << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace aghqmm

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aghqmm/inference.hpp"
#include "aghqmm/io.hpp"
#include "aghqmm/optimizer.hpp"
#include "aghqmm/replicate.hpp"
#include "aghqmm/sim.hpp"

using nlohmann::json;

namespace {

json number_or_null(double x, const char* reason) {
  if (std::isfinite(x)) return x;
  return json{{"value", nullptr}, {"reason", reason}};
}

json interval_json(const aghqmm::Interval& iv) {
  return json{{"label", iv.label},
              {"estimate", number_or_null(iv.estimate, "non-finite estimate")},
              {"se", number_or_null(iv.se, "non-finite standard error")},
              {"lower", number_or_null(iv.lower, "non-finite bound")},
              {"upper", number_or_null(iv.upper, "non-finite bound")}};
}

aghqmm::Family parse_family(const std::string& name) {
  if (name == "bernoulli") return aghqmm::Family::bernoulli();
  if (name == "gaussian") return aghqmm::Family::gaussian();
  throw CLI::ValidationError("--family", "unknown family: " + name);
}

aghqmm::Design parse_design(const std::string& name) {
  if (name == "eq5") return aghqmm::Design::Eq5;
  if (name == "eq6") return aghqmm::Design::Eq6;
  throw CLI::ValidationError("--design", "unknown design: " + name);
}

struct ModelArgs {
  std::string data, family = "bernoulli", response, group;
  std::vector<std::string> fixed, random;
  bool no_intercept = false, no_random_intercept = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "input CSV file")->required();
    cmd->add_option("--family", family, "response family (bernoulli|gaussian)");
    cmd->add_option("--response", response, "response column")->required();
    cmd->add_option("--group", group, "grouping column")->required();
    cmd->add_option("--fixed", fixed, "fixed-effect covariate columns")->delimiter(',');
    cmd->add_option("--random", random, "random-effect covariate columns")->delimiter(',');
    cmd->add_flag("--no-intercept", no_intercept, "drop the fixed intercept");
    cmd->add_flag("--no-random-intercept", no_random_intercept, "drop the random intercept");
  }

  aghqmm::Dataset load() const {
    aghqmm::ModelSpec spec;
    spec.response = response;
    spec.group = group;
    spec.fixed = fixed;
    spec.random = random;
    spec.fixed_intercept = !no_intercept;
    spec.random_intercept = !no_random_intercept;
    spec.family = parse_family(family);
    return aghqmm::build_dataset(aghqmm::read_csv(data), spec);
  }
};

int run_fit(const ModelArgs& margs, int k, double alpha, const std::string& out_path) {
  const aghqmm::Dataset data = margs.load();
  aghqmm::FitOptions opts;
  opts.k = k;
  const aghqmm::FitResult res = aghqmm::fit(data, opts);

  const int q = data.q, d = data.d;
  const int nvc = d + d * (d - 1) / 2;
  const std::vector<aghqmm::Interval> wald =
      aghqmm::wald_intervals(res.theta_hat, res.vcov, alpha);

  json j;
  j["schema"] = "aghqmm-fit/1";
  j["k"] = k;
  j["alpha"] = alpha;
  j["m"] = data.m();
  j["converged"] = res.converged;
  j["polished"] = res.polished;
  j["nll"] = number_or_null(res.nll, "evaluation failed at the returned point");
  j["grad_norm"] = number_or_null(res.grad_norm, "gradient not available");
  j["outer_iters"] = res.outer_iters;
  j["inner_iters"] = res.total_inner_iters;
  for (int i = 0; i < q; ++i) j["coefficients"].push_back(interval_json(wald[i]));
  for (size_t i = q; i < wald.size(); ++i) j["varpar"].push_back(interval_json(wald[i]));
  if (res.vcov.allFinite()) {
    for (const aghqmm::Interval& iv : aghqmm::sigma_intervals(
             res.theta_hat.repar, res.vcov.block(q, q, nvc, nvc), alpha))
      j["sigma"].push_back(interval_json(iv));
  } else {
    j["sigma"] = json{{"value", nullptr}, {"reason", "covariance matrix not positive definite"}};
  }

  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + out_path);
    out << j.dump(2) << "\n";
  }
  return res.converged ? 0 : 2;
}

int run_gradcheck(const ModelArgs& margs, int k, double h) {
  const aghqmm::Dataset data = margs.load();
  aghqmm::ParamVector start;
  start.beta = aghqmm::glm_start(data);
  start.repar = aghqmm::RePar::identity(data.d);
  const Eigen::VectorXd theta = start.flatten();
  const int p = static_cast<int>(theta.size());

  aghqmm::MarginalNll nll(data, k, /*use_warm=*/false, /*force_general=*/false, {});
  Eigen::VectorXd exact(p), dummy(p);
  const double f0 = nll(theta, exact);
  (void)f0;

  double max_rel = 0.0;
  std::printf("%4s %22s %22s %12s\n", "j", "exact", "central_fd", "rel_err");
  Eigen::VectorXd tp = theta;
  for (int j = 0; j < p; ++j) {
    tp(j) = theta(j) + h;
    const double fp = nll(tp, dummy);
    tp(j) = theta(j) - h;
    const double fm = nll(tp, dummy);
    tp(j) = theta(j);
    const double fd = (fp - fm) / (2.0 * h);
    const double rel = std::abs(fd - exact(j)) / std::max(1.0, std::abs(exact(j)));
    max_rel = std::max(max_rel, rel);
    std::printf("%4d %22.15e %22.15e %12.3e\n", j, exact(j), fd, rel);
  }
  std::printf("max relative error: %.3e\n", max_rel);
  return max_rel > 1e-5 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AGHQ fitting for two-level generalized linear mixed models"};
  app.set_help_flag("--help", "print usage");  // free up -h/--h for the gradcheck step
  app.require_subcommand(1);

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit a model and report intervals");
  ModelArgs fit_args;
  fit_args.attach(fit_cmd);
  int fit_k = 25;
  double fit_alpha = 0.05;
  std::string fit_out;
  fit_cmd->add_option("--k", fit_k, "quadrature points per axis")->required();
  fit_cmd->add_option("--alpha", fit_alpha, "interval level is 1 - alpha");
  fit_cmd->add_option("--out", fit_out, "write the JSON report here instead of stdout");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "draw one dataset from a test design");
  std::string sim_design = "eq5", sim_out;
  int sim_m = 200, sim_n = 5;
  std::uint64_t sim_seed = 1;
  std::vector<double> sim_beta, sim_sigma;
  sim_cmd->add_option("--design", sim_design, "eq5 (random slope) or eq6 (random intercept)")
      ->required();
  sim_cmd->add_option("--m", sim_m, "number of groups")->required();
  sim_cmd->add_option("--n", sim_n, "observations per group")->required();
  sim_cmd->add_option("--beta", sim_beta, "fixed effects, comma separated")->delimiter(',');
  sim_cmd->add_option("--sigma", sim_sigma, "covariance, row-major, comma separated")
      ->delimiter(',');
  sim_cmd->add_option("--seed", sim_seed, "RNG seed")->required();
  sim_cmd->add_option("--out", sim_out, "output CSV file")->required();

  // gradcheck
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare the gradient to central differences");
  grad_cmd->set_help_flag("--help", "print usage");
  ModelArgs grad_args;
  grad_args.attach(grad_cmd);
  int grad_k = 25;
  double grad_h = 1e-6;
  grad_cmd->add_option("--k", grad_k, "quadrature points per axis")->required();
  grad_cmd->add_option("--h", grad_h, "finite-difference step");

  // replicate
  auto* rep_cmd = app.add_subcommand("replicate", "repeated simulate-and-fit study");
  std::string rep_design = "eq5", rep_out;
  int rep_m = 200, rep_n = 5, rep_k = 25, rep_reps = 200, rep_threads = 1;
  std::uint64_t rep_seed = 1;
  rep_cmd->add_option("--design", rep_design, "eq5 or eq6")->required();
  rep_cmd->add_option("--m", rep_m, "number of groups")->required();
  rep_cmd->add_option("--n", rep_n, "observations per group")->required();
  rep_cmd->add_option("--k", rep_k, "quadrature points per axis")->required();
  rep_cmd->add_option("--reps", rep_reps, "number of replications")->required();
  rep_cmd->add_option("--seed", rep_seed, "base RNG seed")->required();
  rep_cmd->add_option("--out", rep_out, "per-replicate CSV; summary goes to <out>.summary.csv")
      ->required();
  rep_cmd->add_option("--threads", rep_threads, "worker threads");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args, fit_k, fit_alpha, fit_out);

    if (sim_cmd->parsed()) {
      aghqmm::SimSpec spec;
      spec.design = parse_design(sim_design);
      spec.m = sim_m;
      spec.n = sim_n;
      spec.seed = sim_seed;
      if (!sim_beta.empty())
        spec.beta = Eigen::Map<const Eigen::VectorXd>(sim_beta.data(),
                                                      static_cast<long>(sim_beta.size()));
      if (!sim_sigma.empty()) {
        const int d = spec.design == aghqmm::Design::Eq5 ? 2 : 1;
        if (static_cast<int>(sim_sigma.size()) != d * d)
          throw std::invalid_argument("--sigma needs " + std::to_string(d * d) + " values");
        spec.sigma = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                    Eigen::RowMajor>>(sim_sigma.data(), d, d);
      }
      const aghqmm::SimResult res = aghqmm::simulate(spec);
      aghqmm::write_csv(sim_out, res.columns, res.rows);
      std::cout << "wrote " << res.rows.size() << " rows to " << sim_out << "\n";
      return 0;
    }

    if (grad_cmd->parsed()) return run_gradcheck(grad_args, grad_k, grad_h);

    if (rep_cmd->parsed()) {
      aghqmm::ReplicateSpec spec;
      spec.design = parse_design(rep_design);
      spec.m = rep_m;
      spec.n = rep_n;
      spec.reps = rep_reps;
      spec.seed = rep_seed;
      spec.threads = rep_threads;
      spec.fit.k = rep_k;
      const aghqmm::ReplicateResult res = aghqmm::replicate_study(spec);
      aghqmm::write_replicate_csv(rep_out, res);
      aghqmm::write_summary_csv(rep_out + ".summary.csv", res);
      std::cout << res.records.size() - static_cast<size_t>(res.failures) << "/"
                << res.records.size() << " replications succeeded\n";
      for (const aghqmm::ParamSummary& s : res.summaries)
        std::printf("%-8s truth %8.4f mean %8.4f coverage %.3f +/- %.3f\n", s.label.c_str(),
                    s.truth, s.mean_estimate, s.coverage, s.coverage_band);
      return static_cast<size_t>(res.failures) == res.records.size() ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

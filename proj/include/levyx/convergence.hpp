#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "levyx/limit_model.hpp"
#include "levyx/prelimit.hpp"
#include "levyx/scenario.hpp"

namespace levyx {

struct KsResult {
  double d = 0.0;
  double p_value = 1.0;
};

// Classical two-sample Kolmogorov-Smirnov statistic with the asymptotic
// p-value. Both samples must have >= 100 points unless exact_small is set
// (used by the frozen-oracle unit tests).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b,
                       bool exact_small = false);

struct SweepOptions {
  std::vector<double> eps_list{0.4, 0.2, 0.1, 0.05};  // strictly decreasing
  int n_paths = 10000;
  std::vector<double> times{1.0};
  SigmaVariant variant = SigmaVariant::FullSource;
  int grid = 50;
  double ks_threshold = 0.05;  // calibration choice, not a paper value
  int threads = 0;             // 0 -> auto
};

struct CellStats {
  double eps = 0.0, time = 0.0;
  int coord = 0;
  double ks = 0.0, p_value = 1.0;
  double mean_gap = 0.0, mean_se = 0.0;
  double var_gap = 0.0, var_se = 0.0;
  int n_paths = 0;
};

struct LemmaDiagnostics {
  std::vector<double> eps;
  std::vector<double> k_T;        // E sup |xi|^2 per eps
  std::vector<double> inc_slope;  // fitted k of E|dxi|^2 vs |t-s|
  std::vector<double> inc_r2;
  std::vector<double> ccc_tail;   // P(sup |xi| > 10 sqrt(k_T)) per eps
  double k_T_spread = 0.0;        // max/min - 1 over the eps grid
};

struct VariantScore {
  std::string name;
  double sigma2 = 0.0;
  double z = 0.0;
  bool accepted = false;
};

struct AdjudicationBlock {
  double eps = 0.0, T = 1.0;
  int n_paths = 0;
  double empirical_rate = 0.0;  // Var xi(T) / T (first coordinate norm)
  double se = 0.0;
  double allowance = 0.0;  // finite-eps bias allowance folded into z
  std::vector<VariantScore> scores;
};

struct ConvergenceReport {
  std::string scenario_name;
  std::uint64_t scenario_hash = 0;
  std::uint64_t seed = 0;
  std::string variant;
  std::vector<double> eps_list, times;
  int n_paths = 0;
  double ks_threshold = 0.05;
  std::vector<CellStats> cells;
  bool ks_pass = false;
  bool monotone_pass = false;
  LemmaDiagnostics lemmas;
  std::vector<double> residual_eps, residual_vals;  // empty if unavailable
  std::vector<VariantScore> adjudication;           // empty if not run

  bool pass() const { return ks_pass && monotone_pass; }
  nlohmann::json to_json() const;
  std::string summary_csv() const;
};

ConvergenceReport sweep(const Scenario& scenario, const SweepOptions& opts);

AdjudicationBlock adjudicate_sigma(const Scenario& scenario, double eps,
                                   int n_paths, double T, int threads = 0);

// Limit-vs-limit control: fraction of (eps, time) cells whose two-seed KS
// p-value falls below 0.05.
double self_test_low_p_fraction(const Scenario& scenario,
                                const SweepOptions& opts);

}  // namespace levyx

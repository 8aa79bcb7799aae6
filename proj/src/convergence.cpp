#include "levyx/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "levyx/errors.hpp"
#include "levyx/limit_sim.hpp"
#include "levyx/parallel.hpp"

namespace levyx {

namespace {

double ks_asymptotic_p(double d, double n_eff) {
  if (d <= 0.0) return 1.0;
  const double sq = std::sqrt(n_eff);
  const double lambda = (sq + 0.12 + 0.11 / sq) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    p += sign * term;
    sign = -sign;
    if (term < 1e-12) break;
  }
  return std::clamp(2.0 * p, 0.0, 1.0);
}

struct Moments {
  double mean = 0.0, se = 0.0, var = 0.0, var_se = 0.0;
};

Moments sample_moments(const std::vector<double>& xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  double s1 = 0.0;
  for (double x : xs) s1 += x;
  m.mean = s1 / n;
  double s2 = 0.0, s4 = 0.0;
  for (double x : xs) {
    const double c = x - m.mean;
    s2 += c * c;
    s4 += c * c * c * c;
  }
  m.var = s2 / std::max(n - 1.0, 1.0);
  m.se = std::sqrt(m.var / n);
  const double m4 = s4 / n;
  m.var_se = std::sqrt(std::max(m4 - m.var * m.var, 0.0) / n);
  return m;
}

}  // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b,
                       bool exact_small) {
  if (!exact_small && (a.size() < 100 || b.size() < 100))
    fail("insufficient-sample", "ks_two_sample requires >= 100 points each");
  if (a.empty() || b.empty())
    fail("insufficient-sample", "empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  KsResult r;
  r.d = d;
  r.p_value = ks_asymptotic_p(d, na * nb / (na + nb));
  return r;
}

namespace {

// stream tags
constexpr std::uint64_t kTagPrelimit = 100;   // + eps index
constexpr std::uint64_t kTagLimit = 200;
constexpr std::uint64_t kTagSelfTest = 300;   // + cell index
constexpr std::uint64_t kTagAdjudicate = 400;

std::vector<PrelimitPath> prelimit_ensemble(const Scenario& sc, double eps,
                                            double horizon, int grid,
                                            int n_paths, std::uint64_t tag,
                                            int threads) {
  std::vector<PrelimitPath> paths(n_paths);
  SimulateOptions opts;
  opts.grid = grid;
  opts.guard = sc.guards.path_guard;
  parallel_for(
      n_paths,
      [&](std::size_t i) {
        RngStream rng = make_stream(sc.seed, tag, i);
        paths[i] = simulate_prelimit(sc.switching, sc.impulse, eps, sc.xi0,
                                     sc.x0, horizon, opts, rng);
      },
      threads > 0 ? threads : thread_count());
  return paths;
}

struct LimitEnsemble {
  std::vector<std::vector<Eigen::VectorXd>> values;  // [path][time index]
  std::vector<long> jump_counts;
};

LimitEnsemble limit_ensemble(const Scenario& sc, const LimitTriplet& triplet,
                             double horizon, int grid,
                             const std::vector<int>& time_idx, int n_paths,
                             std::uint64_t tag, int threads) {
  LimitEnsemble ens;
  ens.values.resize(n_paths);
  ens.jump_counts.resize(n_paths);
  parallel_for(
      n_paths,
      [&](std::size_t i) {
        RngStream rng = make_stream(sc.seed, tag, i);
        const LimitPath p =
            simulate_limit_exact(triplet, sc.xi0, horizon, grid, rng);
        for (int idx : time_idx) ens.values[i].push_back(p.values[idx]);
        ens.jump_counts[i] = p.jump_count;
      },
      threads > 0 ? threads : thread_count());
  return ens;
}

}  // namespace

ConvergenceReport sweep(const Scenario& scenario, const SweepOptions& opts) {
  if (opts.eps_list.empty() ||
      !std::is_sorted(opts.eps_list.rbegin(), opts.eps_list.rend()))
    fail("invalid-argument", "eps_list must be strictly decreasing");
  if (opts.times.empty())
    fail("invalid-argument", "at least one comparison time required");

  const ResidualReport validation = validate_conditions(
      scenario.impulse, stationary(scenario.switching),
      scenario.default_u_grid(), opts.eps_list);
  if (!validation.pass())
    fail("validation-failed",
         std::string("scenario fails conditions: ") +
             (!validation.pass_l4 ? "L4 " : "") +
             (!validation.pass_c3 ? "C3 " : "") +
             (!validation.pass_theta ? "L2/L3" : ""));

  const StationaryPair sp = stationary(scenario.switching);
  const PotentialOperator pot = potential(scenario.switching, sp);
  const double horizon = *std::max_element(opts.times.begin(), opts.times.end());

  // impulse-draw budget
  double projected = 0.0;
  for (double eps : opts.eps_list)
    projected += opts.n_paths * sp.q_bar * horizon / (eps * eps);
  if (projected > scenario.guards.budget)
    fail("budget-exceeded", "projected impulse draws " +
                                std::to_string(projected) + " exceed budget");

  const int grid = opts.grid;
  std::vector<int> time_idx;
  for (double t : opts.times)
    time_idx.push_back(
        static_cast<int>(std::lround(t / horizon * grid)));

  const LimitTriplet triplet = limit_triplet(
      scenario.switching, scenario.impulse, sp, pot, scenario.xi0, opts.variant);
  const LimitEnsemble lim = limit_ensemble(scenario, triplet, horizon, grid,
                                           time_idx, opts.n_paths, kTagLimit,
                                           opts.threads);

  ConvergenceReport rep;
  rep.scenario_name = scenario.name;
  rep.scenario_hash = scenario.hash();
  rep.seed = scenario.seed;
  rep.variant = to_string(opts.variant);
  rep.eps_list = opts.eps_list;
  rep.times = opts.times;
  rep.n_paths = opts.n_paths;
  rep.ks_threshold = opts.ks_threshold;

  const int d = scenario.dimension;
  for (std::size_t e = 0; e < opts.eps_list.size(); ++e) {
    const double eps = opts.eps_list[e];
    const std::vector<PrelimitPath> pre = prelimit_ensemble(
        scenario, eps, horizon, grid, opts.n_paths, kTagPrelimit + e,
        opts.threads);

    for (std::size_t ti = 0; ti < opts.times.size(); ++ti) {
      for (int c = 0; c < d; ++c) {
        std::vector<double> xs, ys;
        xs.reserve(pre.size());
        for (const auto& p : pre) {
          if (p.diverged) continue;
          xs.push_back(p.xi[time_idx[ti]](c));
        }
        ys.reserve(lim.values.size());
        for (const auto& v : lim.values) ys.push_back(v[ti](c));
        const KsResult ks = ks_two_sample(xs, ys);
        const Moments mx = sample_moments(xs);
        const Moments my = sample_moments(ys);
        CellStats cell;
        cell.eps = eps;
        cell.time = opts.times[ti];
        cell.coord = c;
        cell.ks = ks.d;
        cell.p_value = ks.p_value;
        cell.mean_gap = mx.mean - my.mean;
        cell.mean_se = std::sqrt(mx.se * mx.se + my.se * my.se);
        cell.var_gap = mx.var - my.var;
        cell.var_se = std::sqrt(mx.var_se * mx.var_se + my.var_se * my.var_se);
        cell.n_paths = static_cast<int>(xs.size());
        rep.cells.push_back(cell);
      }
    }

    // Lemma 1/2 and CCC diagnostics from the same ensemble
    std::vector<double> lags;
    for (int k = 1; k <= 5; ++k) lags.push_back(horizon * k / 10.0);
    const PathEnsembleStats st = ensemble_stats(pre, lags, {});
    rep.lemmas.eps.push_back(eps);
    rep.lemmas.k_T.push_back(st.k_T);
    rep.lemmas.inc_slope.push_back(st.inc_slope);
    rep.lemmas.inc_r2.push_back(st.inc_r2);
    const double c_tail = 10.0 * std::sqrt(std::max(st.k_T, 1e-300));
    long hits = 0;
    long alive = 0;
    for (const auto& p : pre) {
      if (p.diverged) continue;
      ++alive;
      double sup = 0.0;
      for (const auto& v : p.xi) sup = std::max(sup, v.norm());
      if (sup > c_tail) ++hits;
    }
    rep.lemmas.ccc_tail.push_back(static_cast<double>(hits) / alive);
  }
  {
    const double kmax =
        *std::max_element(rep.lemmas.k_T.begin(), rep.lemmas.k_T.end());
    const double kmin =
        *std::min_element(rep.lemmas.k_T.begin(), rep.lemmas.k_T.end());
    rep.lemmas.k_T_spread = kmin > 1e-300 ? kmax / kmin - 1.0 : 0.0;
  }

  // verdicts
  const double n = static_cast<double>(opts.n_paths);
  const double noise = std::sqrt(2.0 / n);  // two-sample D fluctuation scale
  rep.ks_pass = true;
  for (const auto& cell : rep.cells)
    if (cell.eps == opts.eps_list.back() && cell.ks >= opts.ks_threshold)
      rep.ks_pass = false;
  rep.monotone_pass = true;
  for (std::size_t ti = 0; ti < opts.times.size(); ++ti) {
    for (int c = 0; c < d; ++c) {
      double prev = -1.0;
      for (double eps : opts.eps_list) {
        for (const auto& cell : rep.cells) {
          if (cell.eps == eps && cell.time == opts.times[ti] &&
              cell.coord == c) {
            if (prev >= 0.0 && cell.ks > prev + 1.5 * noise)
              rep.monotone_pass = false;
            prev = cell.ks;
          }
        }
      }
    }
  }

  // generator-residual curve when the constant-coefficient machinery applies
  if (scenario.impulse.u_independent()) {
    try {
      QuadraticTestFn phi;
      phi.H = Eigen::MatrixXd::Identity(d, d);
      phi.h = Eigen::VectorXd::Zero(d);
      rep.residual_vals = perturbation_residual(
          scenario.switching, scenario.impulse, sp, pot, phi, opts.variant,
          opts.eps_list, scenario.default_u_grid());
      rep.residual_eps = opts.eps_list;
    } catch (const Error&) {
      rep.residual_eps.clear();
      rep.residual_vals.clear();
    }
  }
  return rep;
}

AdjudicationBlock adjudicate_sigma(const Scenario& scenario, double eps,
                                   int n_paths, double T, int threads) {
  if (scenario.impulse.max_lambda0() > 0.0)
    fail("invalid-argument",
         "sigma adjudication requires lambda0 == 0 (diffusion isolated)");
  const StationaryPair sp = stationary(scenario.switching);
  const PotentialOperator pot = potential(scenario.switching, sp);

  AdjudicationBlock block;
  block.eps = eps;
  block.T = T;
  block.n_paths = n_paths;

  const std::vector<PrelimitPath> pre =
      prelimit_ensemble(scenario, eps, T, 10, n_paths, kTagAdjudicate, threads);
  const int d = scenario.dimension;
  std::vector<Moments> per_coord(d);
  for (int c = 0; c < d; ++c) {
    std::vector<double> xs;
    xs.reserve(pre.size());
    for (const auto& p : pre)
      if (!p.diverged) xs.push_back(p.xi.back()(c));
    per_coord[c] = sample_moments(xs);
  }
  double rate = 0.0, se2 = 0.0;
  for (int c = 0; c < d; ++c) {
    rate += per_coord[c].var / T;
    se2 += per_coord[c].var_se * per_coord[c].var_se / (T * T);
  }
  block.empirical_rate = rate;
  block.se = std::sqrt(se2);

  const std::vector<SigmaVariant> variants = {SigmaVariant::PaperLiteral,
                                              SigmaVariant::FullSource,
                                              SigmaVariant::FullDestination};
  double sigma_ref = 1.0;
  std::vector<double> predicted;
  for (SigmaVariant v : variants) {
    const double s2 =
        sigma2(scenario.switching, scenario.impulse, sp, pot, scenario.xi0, v)
            .trace();
    predicted.push_back(s2);
    sigma_ref = std::max(sigma_ref, std::abs(s2));
  }
  // Finite-eps discretization bias is O(eps); fold an eps * scale allowance
  // into the score so an O(eps^2) empirical variance is not rejected
  // against a zero prediction on statistical noise alone.
  block.allowance = eps * sigma_ref;
  const double den =
      std::sqrt(block.se * block.se + block.allowance * block.allowance);
  for (std::size_t i = 0; i < variants.size(); ++i) {
    VariantScore score;
    score.name = to_string(variants[i]);
    score.sigma2 = predicted[i];
    score.z = (block.empirical_rate - predicted[i]) / den;
    score.accepted = std::abs(score.z) < 3.0;
    block.scores.push_back(score);
  }
  return block;
}

double self_test_low_p_fraction(const Scenario& scenario,
                                const SweepOptions& opts) {
  const StationaryPair sp = stationary(scenario.switching);
  const PotentialOperator pot = potential(scenario.switching, sp);
  const double horizon = *std::max_element(opts.times.begin(), opts.times.end());
  const LimitTriplet triplet = limit_triplet(
      scenario.switching, scenario.impulse, sp, pot, scenario.xi0, opts.variant);
  std::vector<int> time_idx;
  for (double t : opts.times)
    time_idx.push_back(static_cast<int>(std::lround(t / horizon * opts.grid)));

  long low = 0, total = 0;
  for (std::size_t e = 0; e < opts.eps_list.size(); ++e) {
    for (std::size_t ti = 0; ti < opts.times.size(); ++ti) {
      const std::uint64_t cell = e * 1000 + ti;
      const LimitEnsemble a =
          limit_ensemble(scenario, triplet, horizon, opts.grid, time_idx,
                         opts.n_paths, kTagSelfTest + 2 * cell, opts.threads);
      const LimitEnsemble b =
          limit_ensemble(scenario, triplet, horizon, opts.grid, time_idx,
                         opts.n_paths, kTagSelfTest + 2 * cell + 1,
                         opts.threads);
      for (int c = 0; c < scenario.dimension; ++c) {
        std::vector<double> xs, ys;
        for (const auto& v : a.values) xs.push_back(v[ti](c));
        for (const auto& v : b.values) ys.push_back(v[ti](c));
        const KsResult ks = ks_two_sample(xs, ys);
        if (ks.p_value < 0.05) ++low;
        ++total;
      }
    }
  }
  return static_cast<double>(low) / total;
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario_name;
  j["scenario_hash"] = scenario_hash;
  j["seed"] = seed;
  j["variant"] = variant;
  j["eps_list"] = eps_list;
  j["times"] = times;
  j["n_paths"] = n_paths;
  j["ks_threshold"] = ks_threshold;
  j["verdict"] = {{"ks_pass", ks_pass},
                  {"monotone_pass", monotone_pass},
                  {"pass", pass()}};
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    cells_json.push_back({{"eps", c.eps},
                          {"time", c.time},
                          {"coord", c.coord},
                          {"ks", c.ks},
                          {"p_value", c.p_value},
                          {"mean_gap", c.mean_gap},
                          {"mean_se", c.mean_se},
                          {"var_gap", c.var_gap},
                          {"var_se", c.var_se},
                          {"n_paths", c.n_paths}});
  }
  j["cells"] = cells_json;
  j["lemma_diagnostics"] = {{"eps", lemmas.eps},
                            {"k_T", lemmas.k_T},
                            {"inc_slope", lemmas.inc_slope},
                            {"inc_r2", lemmas.inc_r2},
                            {"ccc_tail", lemmas.ccc_tail},
                            {"k_T_spread", lemmas.k_T_spread}};
  if (!residual_eps.empty())
    j["residual"] = {{"eps", residual_eps}, {"values", residual_vals}};
  if (!adjudication.empty()) {
    nlohmann::json adj = nlohmann::json::array();
    for (const auto& s : adjudication)
      adj.push_back({{"variant", s.name},
                     {"sigma2", s.sigma2},
                     {"z", s.z},
                     {"accepted", s.accepted}});
    j["adjudication"] = adj;
  }
  return j;
}

std::string ConvergenceReport::summary_csv() const {
  std::string out = "eps,time,coord,ks,p_value,mean_gap,mean_se,var_gap,var_se,n_paths\n";
  char buf[256];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf,
                  "%.12g,%.12g,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n",
                  c.eps, c.time, c.coord, c.ks, c.p_value, c.mean_gap,
                  c.mean_se, c.var_gap, c.var_se, c.n_paths);
    out += buf;
  }
  return out;
}

}  // namespace levyx

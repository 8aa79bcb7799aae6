// End-to-end acceptance run: one line per criterion, non-zero exit if any
// criterion fails. argv[1] is the path to the CLI binary (used by the
// determinism criterion).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "levyx/convergence.hpp"
#include "levyx/errors.hpp"
#include "levyx/limit_sim.hpp"
#include "levyx/parallel.hpp"
#include "levyx/prelimit.hpp"

namespace fs = std::filesystem;
using namespace levyx;

namespace {

bool all_ok = true;

void report(int n, bool ok, const std::string& what) {
  std::printf("criterion %2d [%s] %s\n", n, ok ? "PASS" : "FAIL", what.c_str());
  std::fflush(stdout);
  all_ok = all_ok && ok;
}

Eigen::VectorXd vec1(double v) { return Eigen::VectorXd::Constant(1, v); }

std::vector<PrelimitPath> ensemble(const Scenario& sc, double eps, int n,
                                   double horizon, bool record_jumps,
                                   std::uint64_t tag) {
  SimulateOptions opts;
  opts.record_jumps = record_jumps;
  std::vector<PrelimitPath> paths(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng = make_stream(sc.seed, tag, i);
    paths[i] = simulate_prelimit(sc.switching, sc.impulse, eps, sc.xi0, sc.x0,
                                 horizon, opts, rng);
  });
  return paths;
}

// ------------------------------------------------------------ criterion 1

void criterion_1() {
  std::mt19937_64 gen(20260823);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  std::uniform_int_distribution<int> size(2, 20);
  bool ok = true;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = size(gen);
    SwitchingModel m;
    m.q.resize(n);
    for (int i = 0; i < n; ++i) m.q(i) = 0.1 + 4.0 * unif(gen);
    m.P = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      double row = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        m.P(i, j) = unif(gen);
        row += m.P(i, j);
      }
      m.P.row(i) /= row;
    }
    m.validate();
    const StationaryPair sp = stationary(m);
    const PotentialOperator pot = potential(m, sp);
    const Eigen::MatrixXd Q = build_generator(m).Q;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const double r1 =
        (sp.rho.transpose() * m.P - sp.rho.transpose()).lpNorm<Eigen::Infinity>();
    const double r2 = (sp.pi.transpose() * Q).lpNorm<Eigen::Infinity>();
    const double r3 = (pot.R0 * Q - (pot.Pi - I)).lpNorm<Eigen::Infinity>();
    const double r4 =
        (sp.pi.cwiseProduct(m.q) - sp.q_bar * sp.rho).lpNorm<Eigen::Infinity>();
    worst = std::max({worst, r1, r2, r4, r3 / 10.0});
    ok = ok && r1 < 1e-10 && r2 < 1e-10 && r3 < 1e-9 && r4 < 1e-10;
  }
  report(1, ok, "stationarity and potential identities on 100 random models "
                "(worst scaled residual " + std::to_string(worst) + ")");
}

// ------------------------------------------------------------ criterion 2

void criterion_2() {
  bool ok = true;
  const std::vector<double> eps_grid = {0.4, 0.2, 0.1, 0.05};
  for (const auto& name : {"alt2", "iid2"}) {
    const Scenario sc = Scenario::load(name);
    const StationaryPair sp = stationary(sc.switching);
    const ResidualReport rep = validate_conditions(
        sc.impulse, sp, sc.default_u_grid(), eps_grid);
    ok = ok && rep.balance_residual == 0.0 && rep.pass();

    Scenario bad = sc;
    bad.impulse.a1c = VectorCoeff::table({vec1(1.5), vec1(-1.0)});
    const ResidualReport broken = validate_conditions(
        bad.impulse, sp, sc.default_u_grid(), eps_grid);
    ok = ok && !broken.pass_l4 &&
         std::abs(broken.balance_residual - 0.25) < 1e-14;
  }
  // a family where all three residual curves are non-degenerate: balanced
  // +-1 drift with a big jump at rate 1/2 and Gaussian small noise
  {
    ImpulseFamily f;
    f.dimension = 1;
    f.n_states = 2;
    f.a1c = VectorCoeff::table({vec1(1.0), vec1(-1.0)});
    f.bc = VectorCoeff::constant(vec1(0.25));
    f.lambda0c = ScalarCoeff::constant(0.5);
    f.small.resize(1);
    f.small[0].kind = SmallLaw::Kind::Deterministic;
    BigLaw big;
    big.kind = BigLaw::Kind::Atoms;
    big.atoms = {{1.0, vec1(1.0)}};
    f.big = {big};
    StationaryPair sp;
    sp.pi = Eigen::Vector2d(0.5, 0.5);
    sp.rho = Eigen::Vector2d(0.5, 0.5);
    sp.q_bar = 1.0;
    const ResidualReport rep =
        validate_conditions(f, sp, {vec1(0.0)}, eps_grid);
    ok = ok && rep.pass_theta && rep.slope_a >= 0.9 && rep.slope_c >= 0.9 &&
         rep.slope_g >= 0.9;
  }
  report(2, ok, "condition validator: exact balance, exact perturbation "
                "residual, residual-curve slopes >= 0.9");
}

// ------------------------------------------------------------ criterion 3

void criterion_3() {
  bool ok = true;
  std::string detail;
  for (const auto& name : builtin_scenario_names()) {
    const Scenario sc = Scenario::load(name);
    const int n = 10000;
    const auto paths = ensemble(sc, 0.1, n, 1.0, true, 301);
    double max_resid = 0.0, sm = 0.0, sm2 = 0.0, sm4 = 0.0, sqc = 0.0,
           sqc2 = 0.0;
    std::vector<double> m_end(n), qc_end(n), resid(n);
    parallel_for(n, [&](std::size_t i) {
      const SemimartingaleDecomp dec =
          decompose(sc.switching, paths[i], sc.impulse, 0.1);
      resid[i] = dec.identity_residual;
      m_end[i] = dec.M.back()(0);
      qc_end[i] = dec.QC.back()(0, 0);
    });
    for (int i = 0; i < n; ++i) {
      max_resid = std::max(max_resid, resid[i]);
      sm += m_end[i];
      sm2 += m_end[i] * m_end[i];
      sqc += qc_end[i];
      sqc2 += qc_end[i] * qc_end[i];
    }
    const double mean_m = sm / n;
    const double var_m = sm2 / n - mean_m * mean_m;
    for (int i = 0; i < n; ++i) {
      const double c = m_end[i] - mean_m;
      sm4 += (c * c - var_m) * (c * c - var_m);
    }
    const double se_mean = std::sqrt(var_m / n);
    const double se_var = std::sqrt(sm4 / n / n);
    const double mean_qc = sqc / n;
    const double se_qc =
        std::sqrt((sqc2 / n - mean_qc * mean_qc) / n);
    const double se_diff = std::sqrt(se_var * se_var + se_qc * se_qc);
    const bool mean_ok = std::abs(mean_m) <= 3 * se_mean + 1e-12;
    const bool var_ok = std::abs(var_m - mean_qc) <= 4 * se_diff + 1e-12;
    if (!(max_resid <= 1e-12 && mean_ok && var_ok))
      detail += std::string(" FAIL:") + name;
    ok = ok && max_resid <= 1e-12 && mean_ok && var_ok;
  }
  report(3, ok, "semimartingale identity <= 1e-12 and martingale moment tests "
                "on all fixtures" + detail);
}

// ------------------------------------------------------------ criterion 4

void criterion_4() {
  const Scenario sc = Scenario::load("m2q");
  const int n = 10000;
  const auto paths = ensemble(sc, 0.05, n, 1.0, false, 304);
  double s1 = 0.0, s2 = 0.0;
  for (const auto& p : paths) {
    s1 += p.xi.back()(0);
    s2 += p.xi.back()(0) * p.xi.back()(0);
  }
  const double mean = s1 / n;
  const double se = std::sqrt((s2 / n - mean * mean) / n);
  const bool ok = std::abs(mean - 1.0 / 3.0) <= 3 * se;
  report(4, ok, "drift fixture mean " + std::to_string(mean) + " vs 1/3 (se " +
                    std::to_string(se) + ")");
}

// ------------------------------------------------------------ criterion 5

void criterion_5() {
  const Scenario sc = Scenario::load("poisson2");
  const StationaryPair sp = stationary(sc.switching);
  const PotentialOperator pot = potential(sc.switching, sp);
  const LimitTriplet triplet =
      limit_triplet(sc.switching, sc.impulse, sp, pot, sc.xi0,
                    SigmaVariant::FullSource);
  const int n = 10000;
  const auto pre = ensemble(sc, 0.05, n, 1.0, true, 305);
  std::vector<double> xs(n), lim(n);
  long big_jumps = 0;
  for (int i = 0; i < n; ++i) {
    xs[i] = pre[i].xi.back()(0);
    for (const auto& jr : pre[i].jumps)
      if (jr.impulse.lpNorm<Eigen::Infinity>() > 1e-12) ++big_jumps;
  }
  parallel_for(n, [&](std::size_t i) {
    RngStream rng = make_stream(sc.seed, 306, i);
    lim[i] = simulate_limit_exact(triplet, sc.xi0, 1.0, 50, rng)
                 .values.back()(0);
  });
  const KsResult ks = ks_two_sample(xs, lim);
  const double rate = sp.q_bar * 0.5;  // q_bar * lambda0 * T
  const double mean_counts = static_cast<double>(big_jumps) / n;
  const double se = std::sqrt(rate / n);  // Poisson variance = rate
  const bool ok = ks.d < 0.05 && std::abs(mean_counts - rate) <= 3 * se;
  report(5, ok, "pure-jump fixture: KS " + std::to_string(ks.d) +
                    " vs compound-Poisson limit; big-jump mean " +
                    std::to_string(mean_counts) + " vs " + std::to_string(rate));
}

// ------------------------------------------------------------ criterion 6

void criterion_6() {
  bool ok = true;
  std::string detail;
  {
    const AdjudicationBlock b =
        adjudicate_sigma(Scenario::load("iid2"), 0.05, 20000, 1.0, 0);
    for (const auto& s : b.scores) {
      if (s.name == "paper_literal")
        ok = ok && !s.accepted && std::abs(s.z) > 5.0;
      else
        ok = ok && s.accepted && std::abs(s.z) < 3.0;
    }
    detail += "iid2 rate " + std::to_string(b.empirical_rate);
  }
  {
    const AdjudicationBlock b =
        adjudicate_sigma(Scenario::load("alt2"), 0.05, 20000, 1.0, 0);
    for (const auto& s : b.scores) {
      if (s.name == "paper_literal")
        ok = ok && !s.accepted;
      else
        ok = ok && s.accepted;
    }
    detail += "; alt2 rate " + std::to_string(b.empirical_rate);
  }
  report(6, ok, "sigma^2 adjudication resolves the factor-2 gap (" + detail +
                    ")");
}

// ------------------------------------------------------------ criterion 7

void criterion_7() {
  const std::vector<double> eps_grid = {0.4, 0.2, 0.1, 0.05};
  QuadraticTestFn phi;
  phi.H = Eigen::MatrixXd::Identity(1, 1);
  phi.h = Eigen::VectorXd::Zero(1);
  bool ok = true;
  for (const auto& name : {"m2q", "driftonly"}) {
    const Scenario sc = Scenario::load(name);
    const StationaryPair sp = stationary(sc.switching);
    const PotentialOperator pot = potential(sc.switching, sp);
    const std::vector<double> res = perturbation_residual(
        sc.switching, sc.impulse, sp, pot, phi, SigmaVariant::FullSource,
        eps_grid, sc.default_u_grid());
    ok = ok && loglog_slope(eps_grid, res) >= 0.9;
  }
  const Scenario iid = Scenario::load("iid2");
  const StationaryPair sp = stationary(iid.switching);
  const PotentialOperator pot = potential(iid.switching, sp);
  const std::vector<double> res = perturbation_residual(
      iid.switching, iid.impulse, sp, pot, phi, SigmaVariant::PaperLiteral,
      eps_grid, iid.default_u_grid());
  // predicted plateau 0.5 * |sigma2_paper - sigma2_full| * phi'' = 1
  for (double r : res) ok = ok && std::abs(r - 1.0) <= 0.1;
  report(7, ok, "generator residual: slope >= 0.9 with the full variant, "
                "plateau at 0.5*|gap|*phi'' with the literal one");
}

// ------------------------------------------------------------ criterion 8

void criterion_8() {
  bool ok = true;
  std::string detail;
  for (const auto& name : {"driftonly", "poisson2", "iid2"}) {
    SweepOptions opts;
    opts.n_paths = 10000;
    const ConvergenceReport rep = sweep(Scenario::load(name), opts);
    if (!rep.pass()) detail += std::string(" FAIL:") + name;
    ok = ok && rep.pass();
  }
  SweepOptions st;
  st.n_paths = 4000;
  st.eps_list = {0.4, 0.2, 0.1, 0.05};
  st.times = {0.25, 0.5, 0.75, 1.0};
  const double frac =
      self_test_low_p_fraction(Scenario::load("driftonly"), st);
  ok = ok && frac < 0.10;
  report(8, ok, "weak-convergence sweeps pass; self-test low-p fraction " +
                    std::to_string(frac) + detail);
}

// ------------------------------------------------------------ criterion 9

void criterion_9() {
  bool ok = true;
  std::string detail;
  for (const auto& name : {"iid2", "driftonly"}) {
    SweepOptions opts;
    opts.n_paths = 4000;
    opts.eps_list = {0.2, 0.1, 0.05};
    const ConvergenceReport rep = sweep(Scenario::load(name), opts);
    const LemmaDiagnostics& lem = rep.lemmas;
    const bool spread_ok = lem.k_T_spread < 0.20;
    bool r2_ok = true, ccc_ok = true;
    for (double r2 : lem.inc_r2) r2_ok = r2_ok && r2 > 0.98;
    for (double tail : lem.ccc_tail) ccc_ok = ccc_ok && tail < 0.01;
    if (!(spread_ok && r2_ok && ccc_ok))
      detail += std::string(" FAIL:") + name + " spread " +
                std::to_string(lem.k_T_spread);
    ok = ok && spread_ok && r2_ok && ccc_ok;
  }
  report(9, ok, "lemma diagnostics: k_T stable, increment fit R^2 > 0.98, "
                "tail probability < 0.01" + detail);
}

// ------------------------------------------------------------ criterion 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_10(const std::string& cli_arg) {
  const std::string cli = fs::absolute(cli_arg).string();
  const fs::path dir = fs::temp_directory_path() / "levyx_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto run = [&](const std::string& env, const std::string& out) {
    const std::string cmd = "cd " + dir.string() + " && " + env + " " + cli +
                            " converge iid2 --paths 2000 -o " + out +
                            " >/dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  bool ok = run("", "a") && run("", "b") && run("LEVYX_THREADS=1", "c") &&
            run("LEVYX_THREADS=3", "d");
  const std::string a = slurp(dir / "a/summary.csv");
  ok = ok && !a.empty() && a == slurp(dir / "b/summary.csv") &&
       a == slurp(dir / "c/summary.csv") && a == slurp(dir / "d/summary.csv");
  report(10, ok, "repeated and cross-thread-count converge runs are "
                 "byte-identical");
}

}  // namespace

int main(int argc, char** argv) {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  if (argc > 1) {
    criterion_10(argv[1]);
  } else {
    report(10, false, "CLI path not supplied");
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("acceptance %s in %.1f s\n", all_ok ? "PASSED" : "FAILED", secs);
  return all_ok ? 0 : 1;
}

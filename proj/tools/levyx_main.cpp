// levyx command-line surface: validate / characterize / simulate / converge /
// residual. Every run appends one JSON line to runs.log; outputs are written
// to a temp file and renamed into place.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
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

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof buf, "%FT%TZ", std::gmtime(&tt));
  return buf;
}

void write_atomic(const std::string& path, const std::string& content) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("io-error", "cannot open " + tmp.string());
    out << content;
  }
  fs::rename(tmp, target);
}

struct RunArtifact {
  std::uint64_t scenario_hash = 0;
  std::string scenario;
  std::string command;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::string started, finished;
  std::string verdict;

  void append_log() const {
    nlohmann::json j = {{"scenario_hash", scenario_hash},
                        {"scenario", scenario},
                        {"command", command},
                        {"seed", seed},
                        {"outputs", outputs},
                        {"started", started},
                        {"finished", finished},
                        {"verdict", verdict}};
    std::ofstream log("runs.log", std::ios::app);
    log << j.dump() << "\n";
  }
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(std::stod(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (out.empty()) fail("invalid-argument", "empty list: " + s);
  return out;
}

std::vector<SigmaVariant> parse_variants(const std::string& s) {
  std::vector<SigmaVariant> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    out.push_back(sigma_variant_from_string(s.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// exit-code classification: 1 = condition/validation failure, 2 = numeric
int exit_code_for(const std::string& code) {
  static const std::vector<std::string> validation = {
      "validation-failed", "balance-violated", "schema-error",
      "parse-error",       "invalid-model",    "invalid-law",
      "invalid-family",    "invalid-argument", "mismatched-family",
      "eps-too-large"};
  for (const auto& v : validation)
    if (code == v) return 1;
  return 2;
}

std::string g0_descriptor(const LimitTriplet& t) {
  if (t.lambda <= 0.0 || t.jump_law.empty()) return "none";
  switch (t.jump_law.front().kind) {
    case BigLaw::Kind::Atoms: return "atoms";
    case BigLaw::Kind::Gaussian: return "gaussian";
    case BigLaw::Kind::TwoSidedExp: return "two_sided_exp";
  }
  return "unknown";
}

// ---------------------------------------------------------------- validate

int cmd_validate(const Scenario& sc) {
  const StationaryPair sp = stationary(sc.switching);
  bool all_ok = true;
  auto line = [&](const std::string& name, bool ok, const std::string& detail) {
    std::printf("%-28s %s  %s\n", name.c_str(), ok ? "PASS" : "FAIL",
                detail.c_str());
    all_ok = all_ok && ok;
  };

  line("model: irreducible chain", true,
       "n=" + std::to_string(sc.switching.n_states()) +
           " q_bar=" + fmt(sp.q_bar));
  line("L1: initial value", std::isfinite(sc.xi0.norm()),
       "|xi0| = " + fmt(sc.xi0.norm()));

  const std::vector<double> eps_grid = {0.4, 0.2, 0.1, 0.05};
  const ResidualReport rep =
      validate_conditions(sc.impulse, sp, sc.default_u_grid(), eps_grid);

  auto curve_max = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
  };
  line("L2: theta_a residual", rep.pass_theta,
       "max = " + fmt(curve_max(rep.theta_a)) + " slope = " + fmt(rep.slope_a));
  line("L3: theta_c/theta_g residual", rep.pass_theta,
       "max = " + fmt(std::max(curve_max(rep.theta_c), curve_max(rep.theta_g))));
  line("L4: balance condition", rep.pass_l4,
       "|sum rho a1| = " + fmt(rep.balance_residual));
  line("C3: big-jump tail", rep.pass_c3,
       "tail at c=" + fmt(rep.c_grid.back()) + " -> " + fmt(rep.c3_tail.back()));

  bool mean_ok = true;
  std::string mean_detail;
  try {
    const PotentialOperator pot = potential(sc.switching, sp);
    const LimitTriplet t = limit_triplet(sc.switching, sc.impulse, sp, pot,
                                         sc.xi0, SigmaVariant::FullSource);
    const Eigen::VectorXd lhs = t.beta + t.lambda * t.jump_mean();
    const Eigen::VectorXd rhs = a_hat(sc.impulse, sp, sc.xi0);
    const double res = (lhs - rhs).lpNorm<Eigen::Infinity>();
    mean_ok = res < 1e-10;
    mean_detail = "|beta + lambda m0 - a_hat| = " + fmt(res);
  } catch (const Error& e) {
    mean_ok = false;
    mean_detail = std::string(e.code()) + ": " + e.what();
  }
  line("C1/C2: mean consistency", mean_ok, mean_detail);

  std::printf("verdict: %s\n", all_ok ? "PASS" : "FAIL");
  return all_ok ? 0 : 1;
}

// ------------------------------------------------------------- characterize

int cmd_characterize(const Scenario& sc, const std::string& u_grid_spec,
                     const std::vector<SigmaVariant>& variants,
                     const std::string& out, bool gnuplot,
                     RunArtifact& artifact) {
  std::vector<Eigen::VectorXd> us;
  if (u_grid_spec.empty()) {
    us.push_back(sc.xi0);
  } else {
    const std::size_t c1 = u_grid_spec.find(':');
    const std::size_t c2 = u_grid_spec.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      fail("invalid-argument", "--u-grid expects lo:hi:step");
    const double lo = std::stod(u_grid_spec.substr(0, c1));
    const double hi = std::stod(u_grid_spec.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(u_grid_spec.substr(c2 + 1));
    if (step <= 0.0 || hi < lo)
      fail("invalid-argument", "--u-grid expects lo <= hi and step > 0");
    for (double v = lo; v <= hi + 1e-12; v += step)
      us.push_back(Eigen::VectorXd::Constant(sc.dimension, v));
  }

  const StationaryPair sp = stationary(sc.switching);
  const PotentialOperator pot = potential(sc.switching, sp);

  std::string csv;
  for (int i = 0; i < sc.dimension; ++i) csv += "u_" + std::to_string(i) + ",";
  for (const SigmaVariant v : variants) {
    const std::string tag = to_string(v);
    for (int i = 0; i < sc.dimension; ++i)
      csv += tag + "_beta_" + std::to_string(i) + ",";
    for (int i = 0; i < sc.dimension; ++i)
      for (int j = 0; j < sc.dimension; ++j)
        csv += tag + "_Sigma_" + std::to_string(i) + std::to_string(j) + ",";
    csv += tag + "_lambda," + tag + "_g0,";
  }
  csv.pop_back();
  csv += "\n";

  for (const auto& u : us) {
    for (int i = 0; i < sc.dimension; ++i) csv += fmt(u(i)) + ",";
    for (const SigmaVariant v : variants) {
      const LimitTriplet t = limit_triplet(sc.switching, sc.impulse, sp, pot, u, v);
      for (int i = 0; i < sc.dimension; ++i) csv += fmt(t.beta(i)) + ",";
      for (int i = 0; i < sc.dimension; ++i)
        for (int j = 0; j < sc.dimension; ++j) csv += fmt(t.Sigma(i, j)) + ",";
      csv += fmt(t.lambda) + "," + g0_descriptor(t) + ",";
    }
    csv.pop_back();
    csv += "\n";
  }
  write_atomic(out, csv);
  artifact.outputs.push_back(out);
  if (gnuplot) {
    const std::string gp = out + ".gp";
    write_atomic(gp,
                 "set datafile separator ','\nset key autotitle columnhead\n"
                 "plot '" + out + "' using 1:" +
                     std::to_string(sc.dimension + 1) + " with lines\n");
    artifact.outputs.push_back(gp);
  }
  std::printf("wrote %s (%zu rows, %zu variants)\n", out.c_str(), us.size(),
              variants.size());
  return 0;
}

// ----------------------------------------------------------------- simulate

std::string paths_csv_header(int d) {
  std::string h = "path_id,time";
  for (int i = 0; i < d; ++i) h += ",xi_" + std::to_string(i);
  h += ",state,jump_count\n";
  return h;
}

int cmd_simulate_prelimit(const Scenario& sc, double eps, int n_paths,
                          double horizon, int grid, const std::string& out,
                          bool gnuplot, RunArtifact& artifact) {
  SimulateOptions opts;
  opts.grid = grid;
  opts.guard = sc.guards.path_guard;
  std::vector<PrelimitPath> paths(n_paths);
  parallel_for(n_paths, [&](std::size_t i) {
    RngStream rng = make_stream(sc.seed, 510, i);
    paths[i] = simulate_prelimit(sc.switching, sc.impulse, eps, sc.xi0, sc.x0,
                                 horizon, opts, rng);
  });
  std::string csv = paths_csv_header(sc.dimension);
  for (int p = 0; p < n_paths; ++p) {
    const PrelimitPath& path = paths[p];
    for (std::size_t t = 0; t < path.times.size(); ++t) {
      csv += std::to_string(p) + "," + fmt(path.times[t]);
      for (int i = 0; i < sc.dimension; ++i) csv += "," + fmt(path.xi[t](i));
      csv += "," + std::to_string(path.state[t]) + "," +
             std::to_string(path.jump_count[t]) + "\n";
    }
  }
  write_atomic(out, csv);
  artifact.outputs.push_back(out);
  if (gnuplot) {
    const std::string gp = out + ".gp";
    write_atomic(gp, "set datafile separator ','\n"
                     "plot '" + out + "' using 2:3 with lines notitle\n");
    artifact.outputs.push_back(gp);
  }
  long diverged = 0;
  for (const auto& p : paths) diverged += p.diverged ? 1 : 0;
  std::printf("wrote %s (%d paths, %ld diverged)\n", out.c_str(), n_paths,
              diverged);
  return 0;
}

int cmd_simulate_limit(const Scenario& sc, SigmaVariant variant, int n_paths,
                       double horizon, int grid, const std::string& out,
                       bool gnuplot, RunArtifact& artifact) {
  const StationaryPair sp = stationary(sc.switching);
  const PotentialOperator pot = potential(sc.switching, sp);
  std::vector<LimitPath> paths(n_paths);
  if (sc.impulse.u_independent()) {
    const LimitTriplet triplet =
        limit_triplet(sc.switching, sc.impulse, sp, pot, sc.xi0, variant);
    parallel_for(n_paths, [&](std::size_t i) {
      RngStream rng = make_stream(sc.seed, 520, i);
      paths[i] = simulate_limit_exact(triplet, sc.xi0, horizon, grid, rng);
    });
  } else {
    auto triplet_fn = [&](const Eigen::VectorXd& u) {
      return limit_triplet(sc.switching, sc.impulse, sp, pot, u, variant);
    };
    const double dt = horizon / std::max(grid * 20, 1000);
    parallel_for(n_paths, [&](std::size_t i) {
      RngStream rng = make_stream(sc.seed, 520, i);
      paths[i] = simulate_limit_euler(triplet_fn, sc.xi0, horizon, dt,
                                      sc.guards.lambda_cap, rng);
    });
  }
  std::string csv = paths_csv_header(sc.dimension);
  for (int p = 0; p < n_paths; ++p) {
    const LimitPath& path = paths[p];
    const int stride = std::max(1, static_cast<int>(path.times.size() - 1) / grid);
    for (std::size_t t = 0; t < path.times.size(); t += stride) {
      csv += std::to_string(p) + "," + fmt(path.times[t]);
      for (int i = 0; i < sc.dimension; ++i) csv += "," + fmt(path.values[t](i));
      csv += ",-1," + std::to_string(path.jump_count) + "\n";
    }
  }
  write_atomic(out, csv);
  artifact.outputs.push_back(out);
  if (gnuplot) {
    const std::string gp = out + ".gp";
    write_atomic(gp, "set datafile separator ','\n"
                     "plot '" + out + "' using 2:3 with lines notitle\n");
    artifact.outputs.push_back(gp);
  }
  std::printf("wrote %s (%d paths)\n", out.c_str(), n_paths);
  return 0;
}

// ----------------------------------------------------------------- converge

int cmd_converge(const Scenario& sc, const SweepOptions& opts,
                 const std::string& out_dir, bool gnuplot, bool adjudicate,
                 RunArtifact& artifact) {
  ConvergenceReport rep = sweep(sc, opts);
  if (adjudicate) {
    const AdjudicationBlock block = adjudicate_sigma(
        sc, opts.eps_list.back(), opts.n_paths,
        *std::max_element(opts.times.begin(), opts.times.end()), opts.threads);
    rep.adjudication = block.scores;
  }
  fs::create_directories(out_dir);
  const std::string report_path = out_dir + "/report.json";
  const std::string summary_path = out_dir + "/summary.csv";
  write_atomic(report_path, rep.to_json().dump(2) + "\n");
  write_atomic(summary_path, rep.summary_csv());
  artifact.outputs.push_back(report_path);
  artifact.outputs.push_back(summary_path);
  if (gnuplot) {
    const std::string gp = out_dir + "/summary.gp";
    write_atomic(gp, "set datafile separator ','\nset logscale x\n"
                     "set key autotitle columnhead\n"
                     "plot 'summary.csv' using 1:4 with linespoints\n");
    artifact.outputs.push_back(gp);
  }
  std::printf("KS at smallest eps: %s | monotone: %s | verdict: %s\n",
              rep.ks_pass ? "PASS" : "FAIL",
              rep.monotone_pass ? "PASS" : "FAIL",
              rep.pass() ? "PASS" : "FAIL");
  artifact.verdict = rep.pass() ? "PASS" : "FAIL";
  return rep.pass() ? 0 : 1;
}

// ----------------------------------------------------------------- residual

int cmd_residual(const Scenario& sc, const std::vector<double>& eps_list,
                 const std::vector<SigmaVariant>& variants,
                 const std::string& out, bool gnuplot, RunArtifact& artifact) {
  const StationaryPair sp = stationary(sc.switching);
  const PotentialOperator pot = potential(sc.switching, sp);
  QuadraticTestFn phi;
  phi.H = Eigen::MatrixXd::Identity(sc.dimension, sc.dimension);
  phi.h = Eigen::VectorXd::Zero(sc.dimension);

  std::string csv = "eps";
  for (const SigmaVariant v : variants) csv += "," + to_string(v);
  csv += "\n";
  std::vector<std::vector<double>> cols;
  for (const SigmaVariant v : variants)
    cols.push_back(perturbation_residual(sc.switching, sc.impulse, sp, pot,
                                         phi, v, eps_list,
                                         sc.default_u_grid()));
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    csv += fmt(eps_list[e]);
    for (const auto& col : cols) csv += "," + fmt(col[e]);
    csv += "\n";
  }
  write_atomic(out, csv);
  artifact.outputs.push_back(out);
  if (gnuplot) {
    const std::string gp = out + ".gp";
    write_atomic(gp, "set datafile separator ','\nset logscale xy\n"
                     "set key autotitle columnhead\n"
                     "plot '" + out + "' using 1:2 with linespoints\n");
    artifact.outputs.push_back(gp);
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale lab for Levy approximation of impulsive recurrent "
               "processes with Markov switching"};
  app.require_subcommand(1);

  std::string scenario_arg, out = "", u_grid_spec, variant_spec = "full_source";
  std::string eps_spec = "0.4,0.2,0.1,0.05", times_spec = "1.0";
  double eps = 0.1, horizon = 1.0;
  int n_paths = 1000, grid = 50;
  bool gnuplot = false, adjudicate = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_arg,
                    "scenario JSON file or builtin name")->required();
    cmd->add_flag("--gnuplot", gnuplot, "also emit a gnuplot script");
  };

  CLI::App* validate = app.add_subcommand("validate", "check model conditions");
  add_common(validate);

  CLI::App* characterize =
      app.add_subcommand("characterize", "limit triplet table");
  add_common(characterize);
  characterize->add_option("--u-grid", u_grid_spec, "lo:hi:step");
  characterize->add_option("--variant", variant_spec, "comma list of variants");
  characterize->add_option("-o", out, "output CSV")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "sample paths");
  simulate->require_subcommand(1);
  CLI::App* sim_pre = simulate->add_subcommand("prelimit", "pre-limit process");
  add_common(sim_pre);
  sim_pre->add_option("--eps", eps, "series parameter")->required();
  sim_pre->add_option("--paths", n_paths, "ensemble size");
  sim_pre->add_option("--horizon", horizon, "time horizon");
  sim_pre->add_option("--grid", grid, "grid intervals");
  sim_pre->add_option("-o", out, "output CSV")->required();
  CLI::App* sim_lim = simulate->add_subcommand("limit", "limit Levy process");
  add_common(sim_lim);
  sim_lim->add_option("--variant", variant_spec, "sigma variant");
  sim_lim->add_option("--paths", n_paths, "ensemble size");
  sim_lim->add_option("--horizon", horizon, "time horizon");
  sim_lim->add_option("--grid", grid, "grid intervals");
  sim_lim->add_option("-o", out, "output CSV")->required();

  CLI::App* converge = app.add_subcommand("converge", "weak-convergence sweep");
  add_common(converge);
  converge->add_option("--eps", eps_spec, "decreasing comma list");
  converge->add_option("--paths", n_paths, "paths per ensemble");
  converge->add_option("--times", times_spec, "comparison times");
  converge->add_option("--variant", variant_spec, "sigma variant");
  converge->add_option("--grid", grid, "grid intervals");
  converge->add_flag("--adjudicate", adjudicate,
                     "also score sigma variants (lambda0 == 0 only)");
  converge->add_option("-o", out, "output directory")->required();

  CLI::App* residual = app.add_subcommand("residual", "generator residual");
  add_common(residual);
  residual->add_option("--eps", eps_spec, "comma list");
  residual->add_option("--variant", variant_spec, "comma list of variants");
  residual->add_option("-o", out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  RunArtifact artifact;
  artifact.started = iso_now();
  for (int i = 0; i < argc; ++i)
    artifact.command += (i ? " " : "") + std::string(argv[i]);

  int rc = 0;
  try {
    const Scenario sc = Scenario::load(scenario_arg);
    artifact.scenario = sc.name;
    artifact.scenario_hash = sc.hash();
    artifact.seed = sc.seed;
    artifact.verdict = "PASS";

    if (validate->parsed()) {
      rc = cmd_validate(sc);
      artifact.verdict = rc == 0 ? "PASS" : "FAIL";
    } else if (characterize->parsed()) {
      rc = cmd_characterize(sc, u_grid_spec, parse_variants(variant_spec), out,
                            gnuplot, artifact);
    } else if (sim_pre->parsed()) {
      rc = cmd_simulate_prelimit(sc, eps, n_paths, horizon, grid, out, gnuplot,
                                 artifact);
    } else if (sim_lim->parsed()) {
      rc = cmd_simulate_limit(sc, parse_variants(variant_spec).front(), n_paths,
                              horizon, grid, out, gnuplot, artifact);
    } else if (converge->parsed()) {
      SweepOptions opts;
      opts.eps_list = parse_list(eps_spec);
      opts.n_paths = n_paths;
      opts.times = parse_list(times_spec);
      opts.variant = parse_variants(variant_spec).front();
      opts.grid = grid;
      rc = cmd_converge(sc, opts, out, gnuplot, adjudicate, artifact);
    } else if (residual->parsed()) {
      rc = cmd_residual(sc, parse_list(eps_spec), parse_variants(variant_spec),
                        out, gnuplot, artifact);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "%s\n", e.what());
    rc = exit_code_for(e.code());
    artifact.verdict = std::string("ERROR:") + e.code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    rc = 2;
    artifact.verdict = "ERROR";
  }
  artifact.finished = iso_now();
  artifact.append_log();
  return rc;
}

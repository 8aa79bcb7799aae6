#pragma once

#include <Eigen/Dense>
#include <vector>

#include "levyx/impulse.hpp"
#include "levyx/switching.hpp"

namespace levyx {

struct JumpRecord {
  double t = 0.0;          // accelerated-scale epoch mapped back to [0, T]
  int pre_state = 0;       // x_{k-1}, the state being left
  int impulse_state = 0;   // state indexing the impulse (per convention)
  Eigen::VectorXd xi_prev; // xi just before the impulse
  Eigen::VectorXd impulse;
};

struct PrelimitPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> xi;
  std::vector<int> state;        // x(t/eps^2) at grid times
  std::vector<long> jump_count;  // nu(t/eps^2) at grid times
  Eigen::VectorXd xi0;
  bool diverged = false;
  std::vector<JumpRecord> jumps;  // populated when record_jumps is set
};

struct SimulateOptions {
  int grid = 50;             // number of grid intervals on [0, horizon]
  bool record_jumps = false;
  double guard = 0.0;        // 0 -> default 1e6 * (1 + |xi0|)
};

PrelimitPath simulate_prelimit(const SwitchingModel& model,
                               const ImpulseFamily& family, double eps,
                               const Eigen::VectorXd& xi0, int x0,
                               double horizon, const SimulateOptions& opts,
                               RngStream& rng);

/// Exact per-path split xi = xi0 + B + M with the quadratic characteristic
/// accumulated from the conditional impulse moments.
struct SemimartingaleDecomp {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> B;
  std::vector<Eigen::VectorXd> M;
  std::vector<Eigen::MatrixXd> QC;
  double identity_residual = 0.0;  // max |xi - xi0 - B - M| over the grid
};

SemimartingaleDecomp decompose(const SwitchingModel& model,
                               const PrelimitPath& path,
                               const ImpulseFamily& family, double eps);

struct PathEnsembleStats {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> mean, var, mean_se;
  double k_T = 0.0, k_T_se = 0.0;  // E sup_t |xi|^2
  std::vector<double> lags, inc_moment;
  double inc_slope = 0.0, inc_r2 = 0.0;
  std::vector<double> c_grid, tail_prob;
  int n_paths = 0, n_diverged = 0;
};

PathEnsembleStats ensemble_stats(const std::vector<PrelimitPath>& paths,
                                 const std::vector<double>& lags,
                                 const std::vector<double>& c_grid);

}  // namespace levyx

#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "levyx/rng.hpp"

namespace levyx {

/// Finite-state jump Markov process: per-state jump intensities q and the
/// embedded-chain transition matrix P. The continuous-time generator is
/// Q = diag(q)(P - I).
struct SwitchingModel {
  Eigen::VectorXd q;  // per-state jump intensity, > 0
  Eigen::MatrixXd P;  // row-stochastic embedded transition matrix

  int n_states() const { return static_cast<int>(q.size()); }

  // Throws Error("invalid-model", ...) naming the violated invariant:
  // positive intensities, stochastic rows, strong connectivity of P.
  void validate() const;
};

struct GeneratorMatrix {
  Eigen::MatrixXd Q;
};

/// pi: stationary law of x(t); rho: stationary law of the embedded chain;
/// q_bar: reciprocal mean sojourn under rho. They are tied together by
/// pi(x) q(x) = q_bar rho(x).
struct StationaryPair {
  Eigen::VectorXd pi;
  Eigen::VectorXd rho;
  double q_bar = 0.0;
};

/// R0 solves Poisson's equation R0 Q = Q R0 = Pi - I on the complement of
/// the stationary projector Pi (every row of Pi equals pi).
struct PotentialOperator {
  Eigen::MatrixXd R0;
  Eigen::MatrixXd Pi;
};

/// One realization of the switching chain on [0, horizon]. states[k] is the
/// state occupied on [jump_times[k], jump_times[k+1]); jump_times[0] = 0.
struct SwitchPath {
  std::vector<double> jump_times;
  std::vector<int> states;

  int state_at(double t) const;
  // nu(t): number of jumps (excluding tau_0 = 0) up to and including t.
  std::size_t count_jumps(double t) const;
};

bool is_strongly_connected(const Eigen::MatrixXd& P);

GeneratorMatrix build_generator(const SwitchingModel& model);

StationaryPair stationary(const SwitchingModel& model);

PotentialOperator potential(const SwitchingModel& model,
                            const StationaryPair& sp);

SwitchPath sample_switch_path(const SwitchingModel& model, int x0,
                              double horizon, RngStream& rng);

}  // namespace levyx

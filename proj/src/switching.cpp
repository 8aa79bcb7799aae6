#include "levyx/switching.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "levyx/errors.hpp"

namespace levyx {

namespace {
constexpr double kRowSumTol = 1e-12;
}

bool is_strongly_connected(const Eigen::MatrixXd& P) {
  const int n = static_cast<int>(P.rows());
  // Reachability via repeated boolean expansion from each node. n is small
  // (desk scale), so the O(n^3) pass is fine.
  auto reach_all = [&](const Eigen::MatrixXd& A) {
    for (int s = 0; s < n; ++s) {
      std::vector<bool> seen(n, false);
      std::vector<int> stack{s};
      seen[s] = true;
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        for (int w = 0; w < n; ++w) {
          if (!seen[w] && A(v, w) > 0.0) {
            seen[w] = true;
            stack.push_back(w);
          }
        }
      }
      if (std::find(seen.begin(), seen.end(), false) != seen.end())
        return false;
    }
    return true;
  };
  return reach_all(P);
}

void SwitchingModel::validate() const {
  const int n = n_states();
  if (n < 1) fail("invalid-model", "empty state space");
  if (P.rows() != n || P.cols() != n)
    fail("invalid-model", "P must be n_states x n_states");
  for (int i = 0; i < n; ++i) {
    if (!(q(i) > 0.0))
      fail("invalid-model", "q[" + std::to_string(i) + "] must be > 0");
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (P(i, j) < 0.0)
        fail("invalid-model", "P[" + std::to_string(i) + "][" +
                                  std::to_string(j) + "] negative");
      row += P(i, j);
    }
    if (std::abs(row - 1.0) > kRowSumTol)
      fail("invalid-model",
           "row " + std::to_string(i) + " of P sums to " + std::to_string(row));
  }
  if (n > 1 && !is_strongly_connected(P))
    fail("invalid-model", "embedded chain is reducible");
}

GeneratorMatrix build_generator(const SwitchingModel& model) {
  model.validate();
  GeneratorMatrix g;
  g.Q = model.q.asDiagonal() *
        (model.P - Eigen::MatrixXd::Identity(model.n_states(), model.n_states()));
  return g;
}

StationaryPair stationary(const SwitchingModel& model) {
  model.validate();
  const int n = model.n_states();
  StationaryPair sp;
  if (n == 1) {
    sp.rho = Eigen::VectorXd::Ones(1);
  } else {
    // Solve rho (P - I) = 0 with one equation replaced by normalization.
    Eigen::MatrixXd A = (model.P - Eigen::MatrixXd::Identity(n, n)).transpose();
    A.row(n - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    rhs(n - 1) = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
      fail("singular-solve", "stationary system is rank-deficient");
    sp.rho = lu.solve(rhs);
  }
  // pi derived from rho so that pi(x) q(x) = q_bar rho(x) holds by
  // construction; pi Q = 0 is verified independently in tests.
  Eigen::VectorXd w = sp.rho.cwiseQuotient(model.q);
  const double mean_sojourn = w.sum();
  sp.q_bar = 1.0 / mean_sojourn;
  sp.pi = w / mean_sojourn;
  return sp;
}

PotentialOperator potential(const SwitchingModel& model,
                            const StationaryPair& sp) {
  const int n = model.n_states();
  PotentialOperator pot;
  pot.Pi = Eigen::VectorXd::Ones(n) * sp.pi.transpose();
  const Eigen::MatrixXd Q = build_generator(model).Q;
  Eigen::MatrixXd A = pot.Pi - Q;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible())
    fail("singular-solve", "Pi - Q not invertible; model not irreducible?");
  // Pivot-ratio condition estimate; warn-but-return contract.
  const double cond =
      std::abs(lu.maxPivot()) /
      std::max(lu.matrixLU().diagonal().cwiseAbs().minCoeff(), 1e-300);
  pot.R0 = lu.inverse() - pot.Pi;
  if (cond > 1e12)
    std::fprintf(stderr,
                 "levyx: warning: Pi - Q ill-conditioned (estimate %.3g)\n",
                 cond);
  return pot;
}

SwitchPath sample_switch_path(const SwitchingModel& model, int x0,
                              double horizon, RngStream& rng) {
  if (horizon < 0.0) fail("invalid-argument", "horizon must be >= 0");
  if (x0 < 0 || x0 >= model.n_states())
    fail("invalid-argument", "x0 out of range");
  SwitchPath path;
  path.jump_times.push_back(0.0);
  path.states.push_back(x0);
  double t = 0.0;
  int x = x0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (true) {
    std::exponential_distribution<double> sojourn(model.q(x));
    t += sojourn(rng);
    if (t > horizon) break;
    // next state from row P(x, .)
    double uu = unif(rng);
    int y = model.n_states() - 1;
    double acc = 0.0;
    for (int j = 0; j < model.n_states(); ++j) {
      acc += model.P(x, j);
      if (uu <= acc) {
        y = j;
        break;
      }
    }
    x = y;
    path.jump_times.push_back(t);
    path.states.push_back(x);
  }
  return path;
}

int SwitchPath::state_at(double t) const {
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  auto idx = static_cast<std::size_t>(it - jump_times.begin());
  if (idx == 0) return states.front();
  return states[idx - 1];
}

std::size_t SwitchPath::count_jumps(double t) const {
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  auto idx = static_cast<std::size_t>(it - jump_times.begin());
  return idx == 0 ? 0 : idx - 1;  // tau_0 = 0 is not a jump
}

}  // namespace levyx

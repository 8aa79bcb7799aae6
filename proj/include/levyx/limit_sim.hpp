#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "levyx/limit_model.hpp"
#include "levyx/rng.hpp"

namespace levyx {

struct LimitPath {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> values;
  long jump_count = 0;
};

/// Exact Levy sampling for a constant triplet: per grid step an independent
/// Gaussian increment N(beta dt, Sigma dt) plus CompoundPoisson(lambda dt, G0).
LimitPath simulate_limit_exact(const LimitTriplet& triplet,
                               const Eigen::VectorXd& xi0, double horizon,
                               int grid, RngStream& rng);

/// Euler-Maruyama with thinning for state-dependent triplets. triplet_fn must
/// be valid on the region visited; lambda(u) must stay below lambda_cap.
LimitPath simulate_limit_euler(
    const std::function<LimitTriplet(const Eigen::VectorXd&)>& triplet_fn,
    const Eigen::VectorXd& xi0, double horizon, double dt, double lambda_cap,
    RngStream& rng);

}  // namespace levyx

#include "levyx/limit_sim.hpp"

#include <cmath>

#include "levyx/errors.hpp"

namespace levyx {

namespace {

Eigen::MatrixXd diffusion_sqrt(const Eigen::MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8)
      fail("sqrt-failed", "diffusion matrix not PSD after repair");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::VectorXd gaussian_increment(const Eigen::VectorXd& beta,
                                   const Eigen::MatrixXd& root, double dt,
                                   RngStream& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd z(beta.size());
  for (int i = 0; i < z.size(); ++i) z(i) = norm(rng);
  return beta * dt + std::sqrt(dt) * (root * z);
}

}  // namespace

LimitPath simulate_limit_exact(const LimitTriplet& triplet,
                               const Eigen::VectorXd& xi0, double horizon,
                               int grid, RngStream& rng) {
  if (horizon < 0.0) fail("invalid-argument", "horizon must be >= 0");
  grid = std::max(grid, 1);
  const Eigen::MatrixXd root = diffusion_sqrt(triplet.Sigma);
  const double dt = horizon / grid;

  LimitPath path;
  Eigen::VectorXd xi = xi0;
  path.times.push_back(0.0);
  path.values.push_back(xi);
  std::poisson_distribution<long> pois(triplet.lambda * dt);
  for (int i = 1; i <= grid; ++i) {
    xi += gaussian_increment(triplet.beta, root, dt, rng);
    if (triplet.lambda > 0.0) {
      const long nj = pois(rng);
      for (long j = 0; j < nj; ++j) xi += triplet.sample_jump(rng);
      path.jump_count += nj;
    }
    path.times.push_back(i * dt);
    path.values.push_back(xi);
  }
  return path;
}

LimitPath simulate_limit_euler(
    const std::function<LimitTriplet(const Eigen::VectorXd&)>& triplet_fn,
    const Eigen::VectorXd& xi0, double horizon, double dt, double lambda_cap,
    RngStream& rng) {
  if (dt <= 0.0 || dt > 1e-2 * horizon)
    fail("invalid-argument", "dt must satisfy 0 < dt <= horizon/100");
  LimitPath path;
  Eigen::VectorXd xi = xi0;
  double t = 0.0;
  path.times.push_back(0.0);
  path.values.push_back(xi);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (t < horizon - 1e-12) {
    const double step = std::min(dt, horizon - t);
    std::poisson_distribution<long> candidates(std::max(lambda_cap, 0.0) * step);
    const LimitTriplet tr = triplet_fn(xi);
    if (tr.lambda > lambda_cap)
      fail("cap-exceeded", "lambda(u) = " + std::to_string(tr.lambda) +
                               " exceeds lambda_cap");
    xi += gaussian_increment(tr.beta, diffusion_sqrt(tr.Sigma), step, rng);
    if (lambda_cap > 0.0) {
      const long nc = candidates(rng);
      for (long j = 0; j < nc; ++j) {
        if (unif(rng) < tr.lambda / lambda_cap) {
          xi += tr.sample_jump(rng);
          ++path.jump_count;
        }
      }
    }
    t += step;
    path.times.push_back(t);
    path.values.push_back(xi);
  }
  return path;
}

}  // namespace levyx

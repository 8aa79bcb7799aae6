#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "levyx/convergence.hpp"
#include "levyx/errors.hpp"
#include "levyx/limit_sim.hpp"
#include "levyx/parallel.hpp"

using namespace levyx;

namespace {

LimitTriplet brownian(double sigma2) {
  LimitTriplet t;
  t.beta = Eigen::VectorXd::Zero(1);
  t.Sigma = Eigen::MatrixXd::Constant(1, 1, sigma2);
  return t;
}

LimitTriplet poisson(double lambda, double atom) {
  LimitTriplet t;
  t.beta = Eigen::VectorXd::Zero(1);
  t.Sigma = Eigen::MatrixXd::Zero(1, 1);
  t.lambda = lambda;
  t.jump_weight = {1.0};
  BigLaw law;
  law.kind = BigLaw::Kind::Atoms;
  law.atoms = {{1.0, Eigen::VectorXd::Constant(1, atom)}};
  t.jump_law = {law};
  return t;
}

}  // namespace

TEST_CASE("zero triplet gives a frozen path") {
  LimitTriplet t = brownian(0.0);
  RngStream rng = make_stream(3, 9, 0);
  const Eigen::VectorXd xi0 = Eigen::VectorXd::Constant(1, 2.5);
  const LimitPath p = simulate_limit_exact(t, xi0, 1.0, 20, rng);
  REQUIRE(p.values.size() == 21);
  for (const auto& v : p.values) CHECK(v(0) == 2.5);
  CHECK(p.jump_count == 0);
}

TEST_CASE("Brownian marginal: mean zero, variance t") {
  const LimitTriplet t = brownian(1.0);
  const int n = 20000;
  std::vector<double> ends(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng = make_stream(11, 1, i);
    ends[i] = simulate_limit_exact(t, Eigen::VectorXd::Zero(1), 1.0, 50, rng)
                  .values.back()(0);
  });
  double s1 = 0.0, s2 = 0.0;
  for (double v : ends) {
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("compound Poisson: jump counts and lattice values") {
  const LimitTriplet t = poisson(2.0, 1.0);
  const int n = 20000;
  std::vector<long> counts(n);
  std::vector<double> ends(n);
  parallel_for(n, [&](std::size_t i) {
    RngStream rng = make_stream(12, 1, i);
    const LimitPath p =
        simulate_limit_exact(t, Eigen::VectorXd::Zero(1), 1.0, 50, rng);
    counts[i] = p.jump_count;
    ends[i] = p.values.back()(0);
  });
  long total = 0;
  for (int i = 0; i < n; ++i) {
    // value is exactly the number of unit jumps
    CHECK(std::abs(ends[i] - counts[i]) < 1e-12);
    total += counts[i];
  }
  const double mean = static_cast<double>(total) / n;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.03));
}

TEST_CASE("Euler scheme matches the exact sampler in distribution") {
  LimitTriplet t = brownian(0.5);
  t.beta = Eigen::VectorXd::Constant(1, 0.2);
  t.lambda = 1.0;
  t.jump_weight = {1.0};
  BigLaw law;
  law.kind = BigLaw::Kind::Atoms;
  law.atoms = {{1.0, Eigen::VectorXd::Constant(1, 1.0)}};
  t.jump_law = {law};

  const int n = 10000;
  std::vector<double> exact(n), euler(n);
  auto triplet_fn = [&](const Eigen::VectorXd&) { return t; };
  parallel_for(n, [&](std::size_t i) {
    RngStream r1 = make_stream(13, 1, i);
    exact[i] = simulate_limit_exact(t, Eigen::VectorXd::Zero(1), 1.0, 50, r1)
                   .values.back()(0);
    RngStream r2 = make_stream(13, 2, i);
    euler[i] = simulate_limit_euler(triplet_fn, Eigen::VectorXd::Zero(1), 1.0,
                                    1e-3, 4.0, r2)
                   .values.back()(0);
  });
  const KsResult ks = ks_two_sample(exact, euler);
  CHECK(ks.d < 0.02);
}

TEST_CASE("Euler scheme integrates a pure-drift ODE") {
  auto triplet_fn = [](const Eigen::VectorXd& u) {
    LimitTriplet t;
    t.beta = -u;  // dx = -x dt
    t.Sigma = Eigen::MatrixXd::Zero(1, 1);
    return t;
  };
  RngStream rng = make_stream(14, 1, 0);
  const LimitPath p = simulate_limit_euler(
      triplet_fn, Eigen::VectorXd::Constant(1, 1.0), 1.0, 1e-4, 4.0, rng);
  CHECK(p.values.back()(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-3));
}

TEST_CASE("Euler scheme guards") {
  auto hot = [](const Eigen::VectorXd&) {
    LimitTriplet t = poisson(10.0, 1.0);  // above the cap
    return t;
  };
  RngStream rng = make_stream(15, 1, 0);
  CHECK_THROWS_AS(simulate_limit_euler(hot, Eigen::VectorXd::Zero(1), 1.0, 1e-2,
                                       4.0, rng),
                  Error);
  auto fine = [](const Eigen::VectorXd&) { return poisson(1.0, 1.0); };
  RngStream rng2 = make_stream(15, 2, 0);
  CHECK_THROWS_AS(simulate_limit_euler(fine, Eigen::VectorXd::Zero(1), 1.0,
                                       0.5, 4.0, rng2),
                  Error);  // dt too coarse relative to horizon
}

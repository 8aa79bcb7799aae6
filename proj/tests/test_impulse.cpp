#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "levyx/errors.hpp"
#include "levyx/impulse.hpp"

using namespace levyx;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd u(1);
  u << v;
  return u;
}

StationaryPair uniform2() {
  StationaryPair sp;
  sp.pi = Eigen::Vector2d(0.5, 0.5);
  sp.rho = Eigen::Vector2d(0.5, 0.5);
  sp.q_bar = 1.0;
  return sp;
}

// balanced +-1 small drift plus a unit big jump at rate lambda0 = 0.5
ImpulseFamily mixed_family() {
  ImpulseFamily f;
  f.dimension = 1;
  f.n_states = 2;
  f.a1c = VectorCoeff::table({vec1(1.0), vec1(-1.0)});
  f.bc = VectorCoeff::constant(vec1(0.0));
  f.lambda0c = ScalarCoeff::constant(0.5);
  f.small.resize(1);
  f.small[0].kind = SmallLaw::Kind::Deterministic;
  BigLaw big;
  big.kind = BigLaw::Kind::Atoms;
  big.atoms = {{1.0, vec1(1.0)}};
  f.big = {big};
  f.validate();
  return f;
}

ImpulseFamily gaussian_family() {
  ImpulseFamily f;
  f.dimension = 1;
  f.n_states = 2;
  f.a1c = VectorCoeff::constant(vec1(0.0));
  f.bc = VectorCoeff::constant(vec1(0.5));
  f.lambda0c = ScalarCoeff::constant(0.0);
  f.small.resize(1);
  f.small[0].kind = SmallLaw::Kind::Gaussian;
  f.small[0].cov = Eigen::MatrixXd::Constant(1, 1, 0.25);
  f.small[0].chol = psd_sqrt(f.small[0].cov);
  BigLaw big;
  big.kind = BigLaw::Kind::Atoms;
  big.atoms = {{1.0, vec1(0.0)}};
  f.big = {big};
  f.validate();
  return f;
}

}  // namespace

TEST_CASE("closed-form mixture moments agree with Monte Carlo") {
  const ImpulseFamily f = mixed_family();
  const double eps = 0.3;
  const Eigen::VectorXd u = vec1(0.0);
  for (int x : {0, 1}) {
    RngStream rng = make_stream(99, 5, x);
    const int n = 400000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = sample_impulse(f, eps, u, x, rng)(0);
      s1 += z;
      s2 += z * z;
    }
    const double mc_mean = s1 / n;
    const double mc_m2 = s2 / n;
    const double se_mean = std::sqrt((mc_m2 - mc_mean * mc_mean) / n);
    CHECK(std::abs(mc_mean - mean_eps(f, eps, u, x)(0)) < 5 * se_mean);
    const double m2 = second_moment_eps(f, eps, u, x)(0, 0);
    CHECK(mc_m2 == doctest::Approx(m2).epsilon(0.02));
  }
}

TEST_CASE("impulse sampling is reproducible per stream") {
  const ImpulseFamily f = gaussian_family();
  RngStream a = make_stream(1, 2, 3);
  RngStream b = make_stream(1, 2, 3);
  for (int i = 0; i < 100; ++i)
    CHECK(sample_impulse(f, 0.2, vec1(0), 0, a)(0) ==
          sample_impulse(f, 0.2, vec1(0), 0, b)(0));
}

TEST_CASE("mean expansion residual decays at cubic order") {
  const ImpulseFamily f = mixed_family();
  const std::vector<double> eps_grid = {0.4, 0.2, 0.1, 0.05};
  std::vector<double> resid;
  const Eigen::VectorXd u = vec1(0.0);
  for (double eps : eps_grid) {
    double r = 0.0;
    for (int x : {0, 1}) {
      const Eigen::VectorXd expansion =
          eps * f.a1(u, x) + eps * eps * f.a(u, x);
      r = std::max(r,
                   (mean_eps(f, eps, u, x) - expansion).lpNorm<Eigen::Infinity>());
    }
    resid.push_back(r);
  }
  CHECK(loglog_slope(eps_grid, resid) >= 2.8);
}

TEST_CASE("condition validator: exact balance and exact perturbation residual") {
  ImpulseFamily f = mixed_family();
  const std::vector<Eigen::VectorXd> u_grid = {vec1(-1), vec1(0), vec1(1)};
  const std::vector<double> eps_grid = {0.4, 0.2, 0.1, 0.05};
  const ResidualReport ok = validate_conditions(f, uniform2(), u_grid, eps_grid);
  CHECK(ok.balance_residual == 0.0);
  CHECK(ok.pass_l4);
  CHECK(ok.pass_c3);
  CHECK(ok.pass_theta);
  CHECK(ok.slope_a >= 0.9);
  CHECK(ok.slope_c >= 0.9);
  CHECK(ok.slope_g >= 0.9);

  f.a1c = VectorCoeff::table({vec1(1.5), vec1(-1.0)});
  const ResidualReport bad =
      validate_conditions(f, uniform2(), u_grid, eps_grid);
  CHECK(bad.balance_residual == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_FALSE(bad.pass_l4);
}

TEST_CASE("big-jump tail check rejects mass beyond the truncation grid") {
  ImpulseFamily f = mixed_family();
  f.big[0].atoms = {{1.0, vec1(40.0)}};
  const ResidualReport rep = validate_conditions(
      f, uniform2(), {vec1(0)}, {0.4, 0.2, 0.1, 0.05});
  CHECK_FALSE(rep.pass_c3);
}

TEST_CASE("big-law moments and expectations are exact for atoms") {
  BigLaw big;
  big.kind = BigLaw::Kind::Atoms;
  big.atoms = {{0.25, vec1(2.0)}, {0.75, vec1(-1.0)}};
  CHECK(big.mean()(0) == doctest::Approx(0.25 * 2 - 0.75).epsilon(1e-14));
  CHECK(big.second_moment()(0, 0) ==
        doctest::Approx(0.25 * 4 + 0.75).epsilon(1e-14));
  CHECK(big.expect_g(c3_test_function) ==
        doctest::Approx(0.25 * (8.0 / 9.0) + 0.75 * 0.5).epsilon(1e-12));
  CHECK(big.tail_second_moment(1.5) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("psd square root") {
  Eigen::MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  const Eigen::MatrixXd s = psd_sqrt(m);
  CHECK((s * s.transpose() - m).lpNorm<Eigen::Infinity>() < 1e-12);
  m << 1, 2, 2, 1;  // eigenvalues 3, -1
  CHECK_THROWS_AS(psd_sqrt(m), Error);
}

TEST_CASE("log-log slope on an exact power law") {
  const std::vector<double> x = {0.4, 0.2, 0.1, 0.05};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * v * v);
  CHECK(loglog_slope(x, y) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::isnan(loglog_slope(x, {0.0, 0.0, 0.0, 0.0})));
}

TEST_CASE("eps guard rejects a degenerate mixture weight") {
  const ImpulseFamily f = mixed_family();
  CHECK_THROWS_AS(f.check_eps(1.5, vec1(0), 0), Error);  // eps^2 lambda0 > 1
  f.check_eps(0.4, vec1(0), 0);
}

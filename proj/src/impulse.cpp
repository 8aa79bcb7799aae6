#include "levyx/impulse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "levyx/errors.hpp"

namespace levyx {

namespace {

int pick_atom(const std::vector<Atom>& atoms, RngStream& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng), acc = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    acc += atoms[i].p;
    if (u <= acc) return static_cast<int>(i);
  }
  return static_cast<int>(atoms.size()) - 1;
}

// Simpson's rule on [lo, hi].
double simpson(const std::function<double(double)>& f, double lo, double hi,
               int n = 2000) {
  if (hi <= lo) return 0.0;
  if (n % 2) ++n;
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

double gauss_density(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

// Fixed-seed Monte Carlo expectation for multivariate laws without a usable
// one-dimensional quadrature.
template <typename Sampler>
double mc_expect(const std::function<double(const Eigen::VectorXd&)>& g,
                 Sampler&& draw, int n = 100000) {
  RngStream rng = make_stream(0x1e71a5u, 41);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += g(draw(rng));
  return acc / n;
}

}  // namespace

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-10)
      fail("invalid-law", "covariance not PSD (eigenvalue " +
                              std::to_string(ev(i)) + ")");
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// ---------------------------------------------------------------------------
// coefficients

VectorCoeff VectorCoeff::constant(Eigen::VectorXd v) {
  VectorCoeff c;
  c.kind = Kind::Const;
  c.base.push_back(std::move(v));
  return c;
}

VectorCoeff VectorCoeff::table(std::vector<Eigen::VectorXd> values) {
  VectorCoeff c;
  c.kind = Kind::Table;
  c.base = std::move(values);
  return c;
}

Eigen::VectorXd VectorCoeff::eval(const Eigen::VectorXd& u, int x) const {
  const std::size_t idx = base.size() == 1 ? 0 : static_cast<std::size_t>(x);
  if (kind != Kind::AffineClipped) return base[idx];
  const std::size_t sidx = slope.size() == 1 ? 0 : static_cast<std::size_t>(x);
  Eigen::VectorXd v = base[idx] + slope[sidx] * u;
  return v.cwiseMax(-bound).cwiseMin(bound);
}

ScalarCoeff ScalarCoeff::constant(double v) {
  ScalarCoeff c;
  c.kind = Kind::Const;
  c.base.push_back(v);
  return c;
}

ScalarCoeff ScalarCoeff::table(std::vector<double> values) {
  ScalarCoeff c;
  c.kind = Kind::Table;
  c.base = std::move(values);
  return c;
}

double ScalarCoeff::eval(const Eigen::VectorXd& u, int x) const {
  const std::size_t idx = base.size() == 1 ? 0 : static_cast<std::size_t>(x);
  if (kind != Kind::AffineClipped) return base[idx];
  const std::size_t sidx = slope.size() == 1 ? 0 : static_cast<std::size_t>(x);
  return std::clamp(base[idx] + slope[sidx].dot(u), lo, hi);
}

// ---------------------------------------------------------------------------
// small-jump law

Eigen::VectorXd SmallLaw::sample(const Eigen::VectorXd& a1,
                                 RngStream& rng) const {
  switch (kind) {
    case Kind::Deterministic:
      return a1;
    case Kind::Gaussian: {
      std::normal_distribution<double> norm(0.0, 1.0);
      Eigen::VectorXd z(a1.size());
      for (int i = 0; i < z.size(); ++i) z(i) = norm(rng);
      return a1 + chol * z;
    }
    case Kind::Atoms:
      return atoms[pick_atom(atoms, rng)].v;
  }
  fail("invalid-law", "unknown small-law kind");
}

Eigen::MatrixXd SmallLaw::second_moment(const Eigen::VectorXd& a1) const {
  switch (kind) {
    case Kind::Deterministic:
      return a1 * a1.transpose();
    case Kind::Gaussian:
      return cov + a1 * a1.transpose();
    case Kind::Atoms: {
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(a1.size(), a1.size());
      for (const auto& at : atoms) s += at.p * at.v * at.v.transpose();
      return s;
    }
  }
  fail("invalid-law", "unknown small-law kind");
}

double SmallLaw::expect_g(
    const Eigen::VectorXd& a1, const Eigen::VectorXd& b, double eps,
    const std::function<double(const Eigen::VectorXd&)>& g) const {
  const Eigen::VectorXd shift = eps * eps * b;
  switch (kind) {
    case Kind::Deterministic:
      return g(eps * a1 + shift);
    case Kind::Atoms: {
      double acc = 0.0;
      for (const auto& at : atoms) acc += at.p * g(eps * at.v + shift);
      return acc;
    }
    case Kind::Gaussian: {
      if (a1.size() == 1) {
        const double sd = std::sqrt(std::max(cov(0, 0), 0.0));
        if (sd == 0.0) return g(eps * a1 + shift);
        auto f = [&](double z) {
          Eigen::VectorXd v(1);
          v(0) = eps * (a1(0) + sd * z) + shift(0);
          return g(v) * gauss_density(z);
        };
        return simpson(f, -10.0, 10.0);
      }
      return mc_expect(g, [&](RngStream& rng) {
        std::normal_distribution<double> norm(0.0, 1.0);
        Eigen::VectorXd z(a1.size());
        for (int i = 0; i < z.size(); ++i) z(i) = norm(rng);
        return Eigen::VectorXd(eps * (a1 + chol * z) + shift);
      });
    }
  }
  fail("invalid-law", "unknown small-law kind");
}

// ---------------------------------------------------------------------------
// big-jump law

Eigen::VectorXd BigLaw::mean() const {
  switch (kind) {
    case Kind::Atoms: {
      Eigen::VectorXd m = Eigen::VectorXd::Zero(atoms.front().v.size());
      for (const auto& at : atoms) m += at.p * at.v;
      return m;
    }
    case Kind::Gaussian:
    case Kind::TwoSidedExp:
      return mu;
  }
  fail("invalid-law", "unknown big-law kind");
}

Eigen::MatrixXd BigLaw::second_moment() const {
  switch (kind) {
    case Kind::Atoms: {
      const int d = static_cast<int>(atoms.front().v.size());
      Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
      for (const auto& at : atoms) s += at.p * at.v * at.v.transpose();
      return s;
    }
    case Kind::Gaussian:
      return cov + mu * mu.transpose();
    case Kind::TwoSidedExp: {
      // independent symmetric Laplace coordinates: Var = 2 scale^2
      Eigen::MatrixXd s = mu * mu.transpose();
      for (int i = 0; i < mu.size(); ++i) s(i, i) += 2.0 * scale(i) * scale(i);
      return s;
    }
  }
  fail("invalid-law", "unknown big-law kind");
}

Eigen::VectorXd BigLaw::sample(RngStream& rng) const {
  switch (kind) {
    case Kind::Atoms:
      return atoms[pick_atom(atoms, rng)].v;
    case Kind::Gaussian: {
      std::normal_distribution<double> norm(0.0, 1.0);
      Eigen::VectorXd z(mu.size());
      for (int i = 0; i < z.size(); ++i) z(i) = norm(rng);
      return mu + chol * z;
    }
    case Kind::TwoSidedExp: {
      std::uniform_real_distribution<double> unif(-0.5, 0.5);
      Eigen::VectorXd v(mu.size());
      for (int i = 0; i < v.size(); ++i) {
        const double w = unif(rng);
        v(i) = mu(i) - scale(i) * (w < 0 ? -1.0 : 1.0) *
                           std::log(1.0 - 2.0 * std::abs(w));
      }
      return v;
    }
  }
  fail("invalid-law", "unknown big-law kind");
}

namespace {

double big_density_1d(const BigLaw& law, double v) {
  switch (law.kind) {
    case BigLaw::Kind::Gaussian: {
      const double sd = std::sqrt(std::max(law.cov(0, 0), 1e-300));
      return gauss_density((v - law.mu(0)) / sd) / sd;
    }
    case BigLaw::Kind::TwoSidedExp: {
      const double s = std::max(law.scale(0), 1e-300);
      return std::exp(-std::abs(v - law.mu(0)) / s) / (2.0 * s);
    }
    default:
      return 0.0;
  }
}

double big_spread_1d(const BigLaw& law) {
  if (law.kind == BigLaw::Kind::Gaussian)
    return std::sqrt(std::max(law.cov(0, 0), 0.0));
  return law.scale(0) * std::sqrt(2.0);
}

}  // namespace

double BigLaw::expect_g(
    const std::function<double(const Eigen::VectorXd&)>& g) const {
  if (kind == Kind::Atoms) {
    double acc = 0.0;
    for (const auto& at : atoms) acc += at.p * g(at.v);
    return acc;
  }
  if (mu.size() == 1) {
    const double spread = big_spread_1d(*this);
    const double lo = mu(0) - 14.0 * std::max(spread, 1e-8);
    const double hi = mu(0) + 14.0 * std::max(spread, 1e-8);
    auto f = [&](double v) {
      Eigen::VectorXd vv(1);
      vv(0) = v;
      return g(vv) * big_density_1d(*this, v);
    };
    return simpson(f, lo, hi, 4000);
  }
  return mc_expect(g, [&](RngStream& rng) { return sample(rng); });
}

double BigLaw::tail_second_moment(double c) const {
  auto g = [&](const Eigen::VectorXd& v) {
    return v.norm() > c ? v.squaredNorm() : 0.0;
  };
  return expect_g(g);
}

// ---------------------------------------------------------------------------
// family

Eigen::VectorXd ImpulseFamily::a(const Eigen::VectorXd& u, int x) const {
  return b(u, x) + lambda0(u, x) * big_at(x).mean();
}

Eigen::MatrixXd ImpulseFamily::c(const Eigen::VectorXd& u, int x) const {
  return c1(u, x) + lambda0(u, x) * big_at(x).second_moment();
}

double ImpulseFamily::max_lambda0() const {
  if (lambda0c.kind == ScalarCoeff::Kind::AffineClipped) return lambda0c.hi;
  return *std::max_element(lambda0c.base.begin(), lambda0c.base.end());
}

void ImpulseFamily::check_eps(double eps, const Eigen::VectorXd& u,
                              int x) const {
  if (eps * eps * lambda0(u, x) > 1.0)
    fail("eps-too-large", "eps^2 * lambda0 = " +
                              std::to_string(eps * eps * lambda0(u, x)) +
                              " exceeds 1");
}

void ImpulseFamily::validate() const {
  auto check_size = [&](std::size_t s, const char* what) {
    if (s != 1 && s != static_cast<std::size_t>(n_states))
      fail("invalid-family", std::string(what) + " must have 1 or n_states entries");
  };
  check_size(small.size(), "small_law");
  check_size(big.size(), "big_law");
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(dimension);
  for (int x = 0; x < n_states; ++x) {
    if (a1(u0, x).size() != dimension || b(u0, x).size() != dimension)
      fail("invalid-family", "coefficient dimension mismatch");
    if (lambda0(u0, x) < 0.0) fail("invalid-family", "lambda0 must be >= 0");
    const SmallLaw& sl = small_at(x);
    if (sl.kind == SmallLaw::Kind::Atoms) {
      double psum = 0.0;
      Eigen::VectorXd m = Eigen::VectorXd::Zero(dimension);
      for (const auto& at : sl.atoms) {
        if (at.p < 0.0) fail("invalid-family", "negative atom weight");
        psum += at.p;
        m += at.p * at.v;
      }
      if (std::abs(psum - 1.0) > 1e-12)
        fail("invalid-family", "small-law atom weights must sum to 1");
      if (!a1c.u_independent())
        fail("invalid-family",
             "atom small law requires u-independent a1 (mean is fixed)");
      if ((m - a1(u0, x)).lpNorm<Eigen::Infinity>() > 1e-9)
        fail("invalid-family", "small-law atom mean must equal a1 at state " +
                                   std::to_string(x));
    }
    const BigLaw& bl = big_at(x);
    if (bl.kind == BigLaw::Kind::Atoms) {
      double psum = 0.0;
      for (const auto& at : bl.atoms) {
        if (at.p < 0.0) fail("invalid-family", "negative atom weight");
        psum += at.p;
      }
      if (std::abs(psum - 1.0) > 1e-12)
        fail("invalid-family", "big-law atom weights must sum to 1");
    }
  }
}

Eigen::VectorXd sample_impulse(const ImpulseFamily& family, double eps,
                               const Eigen::VectorXd& u, int x,
                               RngStream& rng) {
  family.check_eps(eps, u, x);
  const double l0 = family.lambda0(u, x);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(rng) < eps * eps * l0) return family.big_at(x).sample(rng);
  const Eigen::VectorXd w = family.small_at(x).sample(family.a1(u, x), rng);
  return eps * w + eps * eps * family.b(u, x);
}

Eigen::VectorXd mean_eps(const ImpulseFamily& family, double eps,
                         const Eigen::VectorXd& u, int x) {
  family.check_eps(eps, u, x);
  const double l0 = family.lambda0(u, x);
  const double e2 = eps * eps;
  return (1.0 - e2 * l0) * (eps * family.a1(u, x) + e2 * family.b(u, x)) +
         e2 * l0 * family.big_at(x).mean();
}

Eigen::MatrixXd second_moment_eps(const ImpulseFamily& family, double eps,
                                  const Eigen::VectorXd& u, int x) {
  family.check_eps(eps, u, x);
  const double l0 = family.lambda0(u, x);
  const double e2 = eps * eps;
  const Eigen::VectorXd a1v = family.a1(u, x);
  const Eigen::VectorXd bv = family.b(u, x);
  const Eigen::MatrixXd cross = a1v * bv.transpose() + bv * a1v.transpose();
  Eigen::MatrixXd small = e2 * family.c1(u, x) + e2 * eps * cross +
                          e2 * e2 * bv * bv.transpose();
  return (1.0 - e2 * l0) * small + e2 * l0 * family.big_at(x).second_moment();
}

double expect_g_eps(const ImpulseFamily& family, double eps,
                    const Eigen::VectorXd& u, int x,
                    const std::function<double(const Eigen::VectorXd&)>& g) {
  family.check_eps(eps, u, x);
  const double l0 = family.lambda0(u, x);
  const double e2 = eps * eps;
  return (1.0 - e2 * l0) *
             family.small_at(x).expect_g(family.a1(u, x), family.b(u, x), eps, g) +
         e2 * l0 * family.big_at(x).expect_g(g);
}

// ---------------------------------------------------------------------------
// condition validation

double c3_test_function(const Eigen::VectorXd& v) {
  const double r3 = std::pow(v.norm(), 3);
  return r3 / (1.0 + r3);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] <= 1e-15) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ResidualReport validate_conditions(
    const ImpulseFamily& family, const StationaryPair& sp,
    const std::vector<Eigen::VectorXd>& u_grid,
    const std::vector<double>& eps_grid,
    const std::function<double(const Eigen::VectorXd&)>& g) {
  family.validate();
  ResidualReport rep;
  rep.eps_grid = eps_grid;

  // L4 balance: sup over u of |sum_x rho(x) a1(u;x)|
  rep.balance_residual = 0.0;
  for (const auto& u : u_grid) {
    Eigen::VectorXd bal = Eigen::VectorXd::Zero(family.dimension);
    for (int x = 0; x < family.n_states; ++x)
      bal += sp.rho(x) * family.a1(u, x);
    rep.balance_residual =
        std::max(rep.balance_residual, bal.lpNorm<Eigen::Infinity>());
  }
  rep.pass_l4 = rep.balance_residual < 1e-10;

  // L2/L3 expansion residuals per eps
  for (double eps : eps_grid) {
    const double e2 = eps * eps;
    double ta = 0.0, tc = 0.0, tg = 0.0;
    for (const auto& u : u_grid) {
      for (int x = 0; x < family.n_states; ++x) {
        const Eigen::VectorXd da =
            mean_eps(family, eps, u, x) - eps * family.a1(u, x) -
            e2 * family.a(u, x);
        ta = std::max(ta, da.lpNorm<Eigen::Infinity>() / e2);
        const Eigen::MatrixXd dc =
            second_moment_eps(family, eps, u, x) - e2 * family.c(u, x);
        tc = std::max(tc, dc.cwiseAbs().maxCoeff() / e2);
        const double gg = expect_g_eps(family, eps, u, x, g) / e2 -
                          family.lambda0(u, x) * family.big_at(x).expect_g(g);
        tg = std::max(tg, std::abs(gg));
      }
    }
    rep.theta_a.push_back(ta);
    rep.theta_c.push_back(tc);
    rep.theta_g.push_back(tg);
  }
  rep.slope_a = loglog_slope(eps_grid, rep.theta_a);
  rep.slope_c = loglog_slope(eps_grid, rep.theta_c);
  rep.slope_g = loglog_slope(eps_grid, rep.theta_g);
  auto curve_ok = [](const std::vector<double>& th, double slope) {
    const double mx = *std::max_element(th.begin(), th.end());
    if (mx <= 1e-12) return true;  // exact cancellation; nothing to decay
    return std::isfinite(slope) && slope >= 0.9;
  };
  rep.pass_theta = curve_ok(rep.theta_a, rep.slope_a) &&
                   curve_ok(rep.theta_c, rep.slope_c) &&
                   curve_ok(rep.theta_g, rep.slope_g);

  // C3 tail second moments on a c-grid, sup over states
  rep.c_grid = {1.0, 2.0, 4.0, 8.0, 16.0, 32.0};
  double scale = 1.0;
  for (int x = 0; x < family.n_states; ++x)
    scale = std::max(scale, family.big_at(x).second_moment().trace());
  for (double c : rep.c_grid) {
    double tail = 0.0;
    for (int x = 0; x < family.n_states; ++x)
      tail = std::max(tail, family.big_at(x).tail_second_moment(c));
    rep.c3_tail.push_back(tail);
  }
  rep.pass_c3 = rep.c3_tail.back() < 1e-3 * scale;
  return rep;
}

}  // namespace levyx

#include "levyx/limit_model.hpp"

#include <cmath>

#include "levyx/errors.hpp"

namespace levyx {

SigmaVariant sigma_variant_from_string(const std::string& s) {
  if (s == "paper_literal") return SigmaVariant::PaperLiteral;
  if (s == "full_source") return SigmaVariant::FullSource;
  if (s == "full_destination") return SigmaVariant::FullDestination;
  fail("invalid-argument", "unknown sigma variant: " + s);
}

std::string to_string(SigmaVariant v) {
  switch (v) {
    case SigmaVariant::PaperLiteral:
      return "paper_literal";
    case SigmaVariant::FullSource:
      return "full_source";
    case SigmaVariant::FullDestination:
      return "full_destination";
  }
  return "?";
}

Eigen::VectorXd LimitTriplet::jump_mean() const {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(beta.size());
  for (std::size_t i = 0; i < jump_law.size(); ++i)
    m += jump_weight[i] * jump_law[i].mean();
  return m;
}

Eigen::MatrixXd LimitTriplet::jump_second_moment() const {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(beta.size(), beta.size());
  for (std::size_t i = 0; i < jump_law.size(); ++i)
    s += jump_weight[i] * jump_law[i].second_moment();
  return s;
}

Eigen::VectorXd LimitTriplet::sample_jump(RngStream& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng), acc = 0.0;
  for (std::size_t i = 0; i < jump_law.size(); ++i) {
    acc += jump_weight[i];
    if (u <= acc) return jump_law[i].sample(rng);
  }
  return jump_law.back().sample(rng);
}

namespace {

Eigen::MatrixXd sym(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

void check_balance(const ImpulseFamily& family, const StationaryPair& sp,
                   const Eigen::VectorXd& u) {
  Eigen::VectorXd bal = Eigen::VectorXd::Zero(family.dimension);
  for (int x = 0; x < family.n_states; ++x)
    bal += sp.rho(x) * family.a1(u, x);
  if (bal.lpNorm<Eigen::Infinity>() > 1e-10)
    fail("balance-violated", "L4 balance residual " +
                                 std::to_string(bal.lpNorm<Eigen::Infinity>()));
}

Eigen::MatrixXd psd_repair(Eigen::MatrixXd m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() < -1e-6)
    fail("psd-repair-failed",
         "diffusion matrix eigenvalue " + std::to_string(ev.minCoeff()) +
             "; variant/convention mismatch likely");
  for (int i = 0; i < ev.size(); ++i) ev(i) = std::max(ev(i), 0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

Eigen::MatrixXd sigma2(const SwitchingModel& model, const ImpulseFamily& family,
                       const StationaryPair& sp, const PotentialOperator& pot,
                       const Eigen::VectorXd& u, SigmaVariant variant) {
  check_balance(family, sp, u);
  const int n = model.n_states();
  const int d = family.dimension;

  Eigen::MatrixXd A1(n, d);  // rows a1(u;x)
  for (int x = 0; x < n; ++x) A1.row(x) = family.a1(u, x).transpose();
  const Eigen::MatrixXd Atil = model.q.asDiagonal() * A1;  // a~1 = q a1

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  switch (variant) {
    case SigmaVariant::PaperLiteral: {
      const Eigen::MatrixXd R = pot.R0 * Atil;  // rows (R0 a~1)(x)
      for (int x = 0; x < n; ++x)
        out += 2.0 * sp.pi(x) *
               sym(Atil.row(x).transpose() * R.row(x));
      return sym(out);
    }
    case SigmaVariant::FullSource: {
      const Eigen::MatrixXd PR = model.P * (pot.R0 * Atil);
      for (int x = 0; x < n; ++x) {
        out += sp.q_bar * sp.rho(x) * family.c1(u, x);
        out += 2.0 * sp.pi(x) * sym(Atil.row(x).transpose() * PR.row(x));
      }
      return psd_repair(sym(out));
    }
    case SigmaVariant::FullDestination: {
      const Eigen::MatrixXd AtilD = model.q.asDiagonal() * (model.P * A1);
      const Eigen::MatrixXd R = pot.R0 * AtilD;
      for (int x = 0; x < n; ++x) {
        out += sp.q_bar * sp.rho(x) * family.c1(u, x);
        out += 2.0 * sp.q_bar * sp.rho(x) *
               sym(A1.row(x).transpose() * R.row(x));
      }
      return psd_repair(sym(out));
    }
  }
  fail("invalid-argument", "unknown sigma variant");
}

Eigen::VectorXd a_hat(const ImpulseFamily& family, const StationaryPair& sp,
                      const Eigen::VectorXd& u) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(family.dimension);
  for (int x = 0; x < family.n_states; ++x)
    v += sp.q_bar * sp.rho(x) * family.a(u, x);
  return v;
}

Eigen::VectorXd a0_hat(const ImpulseFamily& family, const StationaryPair& sp,
                       const Eigen::VectorXd& u) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(family.dimension);
  for (int x = 0; x < family.n_states; ++x)
    v += sp.q_bar * sp.rho(x) * family.lambda0(u, x) *
         family.big_at(x).mean();
  return v;
}

double lambda_paper_literal(const ImpulseFamily& family,
                            const StationaryPair& sp,
                            const Eigen::VectorXd& u) {
  double l = 0.0;
  for (int x = 0; x < family.n_states; ++x)
    l += sp.q_bar * sp.rho(x) * family.lambda0(u, x);
  return sp.q_bar * l;
}

LimitTriplet limit_triplet(const SwitchingModel& model,
                           const ImpulseFamily& family,
                           const StationaryPair& sp,
                           const PotentialOperator& pot,
                           const Eigen::VectorXd& u, SigmaVariant variant) {
  check_balance(family, sp, u);
  LimitTriplet t;
  t.beta = a_hat(family, sp, u) - a0_hat(family, sp, u);
  t.Sigma = sigma2(model, family, sp, pot, u, variant);
  double l = 0.0;
  std::vector<double> w(family.n_states, 0.0);
  for (int x = 0; x < family.n_states; ++x) {
    w[x] = sp.q_bar * sp.rho(x) * family.lambda0(u, x);
    l += w[x];
  }
  t.lambda = l;
  if (l > 0.0) {
    for (int x = 0; x < family.n_states; ++x) {
      if (w[x] > 0.0) {
        t.jump_weight.push_back(w[x] / l);
        t.jump_law.push_back(family.big_at(x));
      }
    }
  }
  return t;
}

TestFunctionBundle TestFunctionBundle::plain(QuadraticTestFn phi, int n_states,
                                             int d) {
  TestFunctionBundle b;
  b.phi = std::move(phi);
  b.r.assign(n_states, Eigen::VectorXd::Zero(d));
  b.w.assign(n_states, Eigen::VectorXd::Zero(d));
  b.s.assign(n_states, 0.0);
  return b;
}

double apply_limit_generator(const LimitTriplet& triplet,
                             const QuadraticTestFn& phi,
                             const Eigen::VectorXd& u) {
  const Eigen::VectorXd g = phi.grad(u);
  double out = triplet.beta.dot(g) + (phi.H * triplet.Sigma).trace();
  if (triplet.lambda > 0.0) {
    // E[phi(u+v) - phi(u)] = m0.grad + tr(H S0), exact for quadratic phi
    out += triplet.lambda * (triplet.jump_mean().dot(g) +
                             (phi.H * triplet.jump_second_moment()).trace());
  }
  return out;
}

double apply_prelimit_generator(const SwitchingModel& model,
                                const ImpulseFamily& family, double eps,
                                const TestFunctionBundle& bundle,
                                const Eigen::VectorXd& u, int x) {
  const int n = model.n_states();
  const Eigen::VectorXd g = bundle.phi.grad(u);
  const double phi_u = bundle.phi.value(u);

  auto phi_eps_at = [&](int y) {
    return phi_u + eps * bundle.r[y].dot(g) +
           eps * eps * (bundle.w[y].dot(g) + bundle.s[y]);
  };

  double acc = 0.0;
  for (int y = 0; y < n; ++y) {
    if (model.P(x, y) == 0.0) continue;
    const int s = family.convention == Convention::Source ? x : y;
    const Eigen::VectorXd m = mean_eps(family, eps, u, s);
    const Eigen::MatrixXd S = second_moment_eps(family, eps, u, s);
    double e = phi_u + g.dot(m) + (bundle.phi.H * S).trace();  // E phi(u+z)
    e += eps * (bundle.r[y].dot(g) + 2.0 * bundle.r[y].dot(bundle.phi.H * m));
    e += eps * eps *
         (bundle.w[y].dot(g) + 2.0 * bundle.w[y].dot(bundle.phi.H * m) +
          bundle.s[y]);
    acc += model.P(x, y) * e;
  }
  return model.q(x) / (eps * eps) * (acc - phi_eps_at(x));
}

TestFunctionBundle build_correctors(const SwitchingModel& model,
                                    const ImpulseFamily& family,
                                    const StationaryPair& sp,
                                    const PotentialOperator& pot,
                                    const QuadraticTestFn& phi) {
  if (!family.u_independent())
    fail("non-constant-coefficients",
         "correctors require u-independent impulse coefficients");
  const int n = model.n_states();
  const int d = family.dimension;
  const Eigen::VectorXd u0 = Eigen::VectorXd::Zero(d);
  check_balance(family, sp, u0);

  Eigen::MatrixXd A1(n, d), A(n, d);
  Eigen::VectorXd tr_c(n);
  for (int x = 0; x < n; ++x) {
    A1.row(x) = family.a1(u0, x).transpose();
    A.row(x) = family.a(u0, x).transpose();
    tr_c(x) = (phi.H * family.c(u0, x)).trace();
  }

  const bool src = family.convention == Convention::Source;
  // a~1 per convention; solvable since Pi a~1 = q_bar * rho a1 = 0 (L4)
  const Eigen::MatrixXd Atil =
      src ? Eigen::MatrixXd(model.q.asDiagonal() * A1)
          : Eigen::MatrixXd(model.q.asDiagonal() * (model.P * A1));
  const Eigen::MatrixXd R = pot.R0 * Atil;  // rows r(x)

  // order-eps^0 content h(x) = dvec(x).grad(u) + dsc(x) + C(x)
  Eigen::MatrixXd Dvec(n, d);
  Eigen::VectorXd hs(n);
  for (int x = 0; x < n; ++x) {
    if (src) {
      Dvec.row(x) = model.q(x) * A.row(x);
      double coupling = 0.0;
      Eigen::VectorXd pr = Eigen::VectorXd::Zero(d);
      for (int y = 0; y < n; ++y) pr += model.P(x, y) * R.row(y).transpose();
      coupling = 2.0 * model.q(x) * pr.dot(phi.H * A1.row(x).transpose());
      hs(x) = model.q(x) * tr_c(x) + coupling;
    } else {
      Eigen::VectorXd dv = Eigen::VectorXd::Zero(d);
      double dsc = 0.0, coupling = 0.0;
      for (int y = 0; y < n; ++y) {
        dv += model.P(x, y) * A.row(y).transpose();
        dsc += model.P(x, y) * tr_c(y);
        coupling += model.P(x, y) * 2.0 *
                    R.row(y).dot((phi.H * A1.row(y).transpose()).transpose());
      }
      Dvec.row(x) = model.q(x) * dv.transpose();
      hs(x) = model.q(x) * (dsc + coupling);
    }
  }

  TestFunctionBundle b;
  b.phi = phi;
  const Eigen::MatrixXd W = pot.R0 * Dvec;
  const Eigen::VectorXd S = pot.R0 * hs;
  for (int x = 0; x < n; ++x) {
    b.r.push_back(R.row(x).transpose());
    b.w.push_back(W.row(x).transpose());
    b.s.push_back(S(x));
  }
  return b;
}

std::vector<double> perturbation_residual(
    const SwitchingModel& model, const ImpulseFamily& family,
    const StationaryPair& sp, const PotentialOperator& pot,
    const QuadraticTestFn& phi, SigmaVariant variant,
    const std::vector<double>& eps_grid,
    const std::vector<Eigen::VectorXd>& u_grid) {
  const TestFunctionBundle bundle =
      build_correctors(model, family, sp, pot, phi);
  std::vector<double> out;
  out.reserve(eps_grid.size());
  for (double eps : eps_grid) {
    double r = 0.0;
    for (const auto& u : u_grid) {
      const LimitTriplet t = limit_triplet(model, family, sp, pot, u, variant);
      const double lphi = apply_limit_generator(t, phi, u);
      for (int x = 0; x < model.n_states(); ++x) {
        const double le =
            apply_prelimit_generator(model, family, eps, bundle, u, x);
        r = std::max(r, std::abs(le - lphi));
      }
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace levyx

#include "levyx/prelimit.hpp"

#include <algorithm>
#include <cmath>

#include "levyx/errors.hpp"

namespace levyx {

PrelimitPath simulate_prelimit(const SwitchingModel& model,
                               const ImpulseFamily& family, double eps,
                               const Eigen::VectorXd& xi0, int x0,
                               double horizon, const SimulateOptions& opts,
                               RngStream& rng) {
  if (eps <= 0.0) fail("invalid-argument", "eps must be > 0");
  if (horizon < 0.0) fail("invalid-argument", "horizon must be >= 0");
  const int n_grid = std::max(opts.grid, 1);
  const double guard =
      opts.guard > 0.0 ? opts.guard : 1e6 * (1.0 + xi0.lpNorm<Eigen::Infinity>());
  const double e2 = eps * eps;

  PrelimitPath path;
  path.xi0 = xi0;
  path.times.resize(n_grid + 1);
  for (int i = 0; i <= n_grid; ++i)
    path.times[i] = horizon * static_cast<double>(i) / n_grid;

  Eigen::VectorXd xi = xi0;
  int x = x0;
  long jumps = 0;
  double t = 0.0;  // original-scale clock; sojourn rates q(x)/eps^2
  int next_grid = 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto flush_grid_until = [&](double upto) {
    while (next_grid <= n_grid && path.times[next_grid] <= upto) {
      path.xi.push_back(xi);
      path.state.push_back(x);
      path.jump_count.push_back(jumps);
      ++next_grid;
    }
  };

  while (true) {
    std::exponential_distribution<double> sojourn(model.q(x) / e2);
    const double dt = sojourn(rng);
    if (t + dt > horizon) {
      flush_grid_until(horizon);
      break;
    }
    flush_grid_until(std::nextafter(t + dt, 0.0));
    t += dt;
    // next state of the embedded chain
    const double uu = unif(rng);
    int y = model.n_states() - 1;
    double acc = 0.0;
    for (int j = 0; j < model.n_states(); ++j) {
      acc += model.P(x, j);
      if (uu <= acc) {
        y = j;
        break;
      }
    }
    const int s = family.convention == Convention::Source ? x : y;
    const Eigen::VectorXd alpha = sample_impulse(family, eps, xi, s, rng);
    if (opts.record_jumps)
      path.jumps.push_back({t, x, s, xi, alpha});
    xi += alpha;
    x = y;
    ++jumps;
    if (xi.lpNorm<Eigen::Infinity>() > guard) {
      path.diverged = true;
      // freeze the path; stats exclude it with a count
      flush_grid_until(horizon);
      break;
    }
  }
  // a zero-horizon or early-exit path still records the full grid
  while (next_grid <= n_grid) {
    path.xi.push_back(xi);
    path.state.push_back(x);
    path.jump_count.push_back(jumps);
    ++next_grid;
  }
  return path;
}

SemimartingaleDecomp decompose(const SwitchingModel& model,
                               const PrelimitPath& path,
                               const ImpulseFamily& family, double eps) {
  if (path.jumps.empty() && path.jump_count.back() > 0)
    fail("mismatched-family",
         "decompose requires a path simulated with record_jumps");
  const int d = static_cast<int>(path.xi0.size());
  SemimartingaleDecomp dec;
  dec.times = path.times;

  Eigen::VectorXd B = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd QC = Eigen::MatrixXd::Zero(d, d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < path.times.size(); ++i) {
    const double t = path.times[i];
    while (k < path.jumps.size() && path.jumps[k].t <= t) {
      const JumpRecord& j = path.jumps[k];
      Eigen::VectorXd m;
      Eigen::MatrixXd S;
      if (family.convention == Convention::Source) {
        m = mean_eps(family, eps, j.xi_prev, j.pre_state);
        S = second_moment_eps(family, eps, j.xi_prev, j.pre_state);
      } else {
        // predictable moments mix over the unseen destination state
        m = Eigen::VectorXd::Zero(d);
        S = Eigen::MatrixXd::Zero(d, d);
        for (int y = 0; y < model.n_states(); ++y) {
          const double p = model.P(j.pre_state, y);
          if (p == 0.0) continue;
          m += p * mean_eps(family, eps, j.xi_prev, y);
          S += p * second_moment_eps(family, eps, j.xi_prev, y);
        }
      }
      B += m;
      QC += S - m * m.transpose();
      ++k;
    }
    dec.B.push_back(B);
    dec.M.push_back(path.xi[i] - path.xi0 - B);
    dec.QC.push_back(QC);
    const double res =
        (path.xi[i] - path.xi0 - dec.B.back() - dec.M.back())
            .lpNorm<Eigen::Infinity>();
    dec.identity_residual = std::max(dec.identity_residual, res);
  }
  return dec;
}

PathEnsembleStats ensemble_stats(const std::vector<PrelimitPath>& paths,
                                 const std::vector<double>& lags,
                                 const std::vector<double>& c_grid) {
  std::vector<const PrelimitPath*> alive;
  int diverged = 0;
  for (const auto& p : paths) {
    if (p.diverged)
      ++diverged;
    else
      alive.push_back(&p);
  }
  if (alive.size() < 100)
    fail("insufficient-paths", "ensemble_stats requires >= 100 usable paths");

  PathEnsembleStats st;
  st.n_paths = static_cast<int>(alive.size());
  st.n_diverged = diverged;
  st.times = alive.front()->times;
  const int d = static_cast<int>(alive.front()->xi0.size());
  const std::size_t nt = st.times.size();
  const double n = static_cast<double>(alive.size());

  for (std::size_t i = 0; i < nt; ++i) {
    Eigen::VectorXd s1 = Eigen::VectorXd::Zero(d), s2 = Eigen::VectorXd::Zero(d);
    for (const auto* p : alive) {
      s1 += p->xi[i];
      s2 += p->xi[i].cwiseProduct(p->xi[i]);
    }
    const Eigen::VectorXd mean = s1 / n;
    Eigen::VectorXd var =
        (s2 - n * mean.cwiseProduct(mean)) / std::max(n - 1.0, 1.0);
    var = var.cwiseMax(0.0);
    st.mean.push_back(mean);
    st.var.push_back(var);
    st.mean_se.push_back((var / n).cwiseSqrt());
  }

  // sup statistics
  double sup1 = 0.0, sup2 = 0.0;
  std::vector<double> sups;
  sups.reserve(alive.size());
  for (const auto* p : alive) {
    double s = 0.0;
    for (const auto& v : p->xi) s = std::max(s, v.squaredNorm());
    sups.push_back(s);
    sup1 += s;
    sup2 += s * s;
  }
  st.k_T = sup1 / n;
  st.k_T_se = std::sqrt(std::max(sup2 / n - st.k_T * st.k_T, 0.0) / n);

  // increment moments on the lag grid
  const double dt = nt > 1 ? st.times[1] - st.times[0] : 1.0;
  for (double lag : lags) {
    const int steps = std::max(1, static_cast<int>(std::lround(lag / dt)));
    if (static_cast<std::size_t>(steps) >= nt) continue;
    double acc = 0.0;
    long cnt = 0;
    for (const auto* p : alive) {
      for (std::size_t i = 0; i + steps < nt; ++i) {
        acc += (p->xi[i + steps] - p->xi[i]).squaredNorm();
        ++cnt;
      }
    }
    st.lags.push_back(steps * dt);
    st.inc_moment.push_back(acc / cnt);
  }
  if (st.lags.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    const int m = static_cast<int>(st.lags.size());
    for (int i = 0; i < m; ++i) {
      sx += st.lags[i];
      sy += st.inc_moment[i];
      sxx += st.lags[i] * st.lags[i];
      sxy += st.lags[i] * st.inc_moment[i];
      syy += st.inc_moment[i] * st.inc_moment[i];
    }
    const double denom = m * sxx - sx * sx;
    st.inc_slope = (m * sxy - sx * sy) / denom;
    const double r_num = m * sxy - sx * sy;
    const double r_den =
        std::sqrt(denom) * std::sqrt(std::max(m * syy - sy * sy, 1e-300));
    const double r = r_num / r_den;
    st.inc_r2 = r * r;
  }

  // compact containment curve
  st.c_grid = c_grid;
  for (double c : c_grid) {
    long hits = 0;
    for (double s : sups)
      if (std::sqrt(s) > c) ++hits;
    st.tail_prob.push_back(hits / n);
  }
  return st;
}

}  // namespace levyx

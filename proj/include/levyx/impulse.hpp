#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "levyx/rng.hpp"
#include "levyx/switching.hpp"

namespace levyx {

// Which state indexes the k-th impulse: the state being left (source) or
// the state being entered (destination).
enum class Convention { Source, Destination };

/// State- and position-dependent vector coefficient. Supported forms:
/// constant, per-state table, or affine in u clipped componentwise.
struct VectorCoeff {
  enum class Kind { Const, Table, AffineClipped };
  Kind kind = Kind::Const;
  std::vector<Eigen::VectorXd> base;   // size 1 (shared) or n_states
  std::vector<Eigen::MatrixXd> slope;  // AffineClipped only
  double bound = 1e12;                 // componentwise |value| clip

  Eigen::VectorXd eval(const Eigen::VectorXd& u, int x) const;
  bool u_independent() const { return kind != Kind::AffineClipped; }

  static VectorCoeff constant(Eigen::VectorXd v);
  static VectorCoeff table(std::vector<Eigen::VectorXd> values);
};

struct ScalarCoeff {
  enum class Kind { Const, Table, AffineClipped };
  Kind kind = Kind::Const;
  std::vector<double> base;
  std::vector<Eigen::VectorXd> slope;
  double lo = 0.0, hi = 1e12;  // clip range

  double eval(const Eigen::VectorXd& u, int x) const;
  bool u_independent() const { return kind != Kind::AffineClipped; }

  static ScalarCoeff constant(double v);
  static ScalarCoeff table(std::vector<double> values);
};

struct Atom {
  double p = 0.0;
  Eigen::VectorXd v;
};

/// Law of the small-jump variable W. Its mean is always a1(u;x): the
/// deterministic and Gaussian kinds track a1 by construction; the atom kind
/// carries a fixed mean that must match a constant a1 (validated on parse).
struct SmallLaw {
  enum class Kind { Deterministic, Gaussian, Atoms };
  Kind kind = Kind::Deterministic;
  Eigen::MatrixXd cov;    // Gaussian
  Eigen::MatrixXd chol;   // cached factor of cov
  std::vector<Atom> atoms;

  Eigen::VectorXd sample(const Eigen::VectorXd& a1, RngStream& rng) const;
  // c1 = E[W W^T]
  Eigen::MatrixXd second_moment(const Eigen::VectorXd& a1) const;
  // E[g(eps * W + eps^2 * b)], exact for atom kinds, quadrature/fixed-seed
  // MC for the Gaussian kind.
  double expect_g(const Eigen::VectorXd& a1, const Eigen::VectorXd& b,
                  double eps,
                  const std::function<double(const Eigen::VectorXd&)>& g) const;
};

/// Big-jump law G-hat with finite second moment.
struct BigLaw {
  enum class Kind { Atoms, Gaussian, TwoSidedExp };
  Kind kind = Kind::Atoms;
  std::vector<Atom> atoms;
  Eigen::VectorXd mu;     // Gaussian mean / TwoSidedExp location
  Eigen::MatrixXd cov;    // Gaussian
  Eigen::MatrixXd chol;
  Eigen::VectorXd scale;  // TwoSidedExp per-coordinate scale

  Eigen::VectorXd mean() const;             // m_J
  Eigen::MatrixXd second_moment() const;    // s_J = E[J J^T]
  Eigen::VectorXd sample(RngStream& rng) const;
  double expect_g(const std::function<double(const Eigen::VectorXd&)>& g) const;
  // trace of the second moment restricted to |v| > c (C3 tail check)
  double tail_second_moment(double c) const;
};

/// The canonical eps-indexed impulse family: with probability 1 - eps^2 *
/// lambda0 the impulse is eps*W + eps^2*b (small), otherwise a draw from the
/// big-jump law. All limit quantities are closed-form in the components.
struct ImpulseFamily {
  int dimension = 1;
  int n_states = 1;
  VectorCoeff a1c;
  VectorCoeff bc;
  ScalarCoeff lambda0c;
  std::vector<SmallLaw> small;  // size 1 or n_states
  std::vector<BigLaw> big;      // size 1 or n_states
  Convention convention = Convention::Source;

  const SmallLaw& small_at(int x) const {
    return small.size() == 1 ? small[0] : small[x];
  }
  const BigLaw& big_at(int x) const {
    return big.size() == 1 ? big[0] : big[x];
  }

  Eigen::VectorXd a1(const Eigen::VectorXd& u, int x) const {
    return a1c.eval(u, x);
  }
  Eigen::VectorXd b(const Eigen::VectorXd& u, int x) const {
    return bc.eval(u, x);
  }
  double lambda0(const Eigen::VectorXd& u, int x) const {
    return lambda0c.eval(u, x);
  }
  Eigen::MatrixXd c1(const Eigen::VectorXd& u, int x) const {
    return small_at(x).second_moment(a1(u, x));
  }
  // a(u;x) = b + lambda0 * m_J (second-order drift), c(u;x) = c1 + lambda0 * s_J
  Eigen::VectorXd a(const Eigen::VectorXd& u, int x) const;
  Eigen::MatrixXd c(const Eigen::VectorXd& u, int x) const;

  bool u_independent() const {
    return a1c.u_independent() && bc.u_independent() && lambda0c.u_independent();
  }
  double max_lambda0() const;  // over states, at u = 0 (u-independent case)
  void check_eps(double eps, const Eigen::VectorXd& u, int x) const;
  void validate() const;
};

Eigen::VectorXd sample_impulse(const ImpulseFamily& family, double eps,
                               const Eigen::VectorXd& u, int x, RngStream& rng);

Eigen::VectorXd mean_eps(const ImpulseFamily& family, double eps,
                         const Eigen::VectorXd& u, int x);

Eigen::MatrixXd second_moment_eps(const ImpulseFamily& family, double eps,
                                  const Eigen::VectorXd& u, int x);

// E[g(impulse)] for the full mixture (used by the L3 residual).
double expect_g_eps(const ImpulseFamily& family, double eps,
                    const Eigen::VectorXd& u, int x,
                    const std::function<double(const Eigen::VectorXd&)>& g);

/// Numerical check of conditions L2/L3/L4 and C3 on grids.
struct ResidualReport {
  std::vector<double> eps_grid;
  std::vector<double> theta_a, theta_c, theta_g;
  double balance_residual = 0.0;
  std::vector<double> c_grid, c3_tail;
  double slope_a = 0.0, slope_c = 0.0, slope_g = 0.0;  // NaN when curve == 0
  bool pass_l4 = false, pass_c3 = false, pass_theta = false;

  bool pass() const { return pass_l4 && pass_c3 && pass_theta; }
};

// Default C3 test function |v|^3 / (1 + |v|^3).
double c3_test_function(const Eigen::VectorXd& v);

ResidualReport validate_conditions(
    const ImpulseFamily& family, const StationaryPair& sp,
    const std::vector<Eigen::VectorXd>& u_grid,
    const std::vector<double>& eps_grid,
    const std::function<double(const Eigen::VectorXd&)>& g = c3_test_function);

// Least-squares slope of log(y) vs log(x); returns NaN when every y is ~0.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Symmetric PSD square root; throws invalid-law on materially negative
// eigenvalues. Used to cache Cholesky-like factors for the Gaussian laws.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m);

}  // namespace levyx

#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "levyx/impulse.hpp"
#include "levyx/switching.hpp"

namespace levyx {

// Diffusion-coefficient formula under adjudication. paper_literal is the
// stated form 2 sum pi(x) a~1 R0 a~1*; the full variants add the small-jump
// second-moment term and route the coupling through P, one per impulse-state
// convention.
enum class SigmaVariant { PaperLiteral, FullSource, FullDestination };

SigmaVariant sigma_variant_from_string(const std::string& s);
std::string to_string(SigmaVariant v);

/// Limit characteristics at a fixed position u: drift beta, diffusion Sigma,
/// jump intensity lambda and the normalized jump law G0 (a rho*lambda0
/// weighted mixture of the per-state big-jump laws).
struct LimitTriplet {
  Eigen::VectorXd beta;
  Eigen::MatrixXd Sigma;
  double lambda = 0.0;
  std::vector<double> jump_weight;  // per state, sums to 1 when lambda > 0
  std::vector<BigLaw> jump_law;     // aligned with jump_weight

  Eigen::VectorXd jump_mean() const;
  Eigen::MatrixXd jump_second_moment() const;
  Eigen::VectorXd sample_jump(RngStream& rng) const;
};

struct QuadraticTestFn {
  Eigen::MatrixXd H;
  Eigen::VectorXd h;

  double value(const Eigen::VectorXd& u) const {
    return u.dot(H * u) + h.dot(u);
  }
  Eigen::VectorXd grad(const Eigen::VectorXd& u) const {
    return 2.0 * H * u + h;
  }
};

/// phi^eps(u,x) = phi(u) + eps * r[x].grad(u) + eps^2 * (w[x].grad(u) + s[x]).
/// Correctors are Pi-centered in x.
struct TestFunctionBundle {
  QuadraticTestFn phi;
  std::vector<Eigen::VectorXd> r;
  std::vector<Eigen::VectorXd> w;
  std::vector<double> s;

  static TestFunctionBundle plain(QuadraticTestFn phi, int n_states, int d);
};

Eigen::MatrixXd sigma2(const SwitchingModel& model, const ImpulseFamily& family,
                       const StationaryPair& sp, const PotentialOperator& pot,
                       const Eigen::VectorXd& u, SigmaVariant variant);

LimitTriplet limit_triplet(const SwitchingModel& model,
                           const ImpulseFamily& family,
                           const StationaryPair& sp,
                           const PotentialOperator& pot,
                           const Eigen::VectorXd& u, SigmaVariant variant);

// a-hat and a0-hat averages; beta = a_hat - a0_hat.
Eigen::VectorXd a_hat(const ImpulseFamily& family, const StationaryPair& sp,
                      const Eigen::VectorXd& u);
Eigen::VectorXd a0_hat(const ImpulseFamily& family, const StationaryPair& sp,
                       const Eigen::VectorXd& u);

// The literal reading lambda = q * G_u(R^d) double-counts q relative to the
// mean-consistency identity; kept for demonstration only.
double lambda_paper_literal(const ImpulseFamily& family,
                            const StationaryPair& sp, const Eigen::VectorXd& u);

double apply_limit_generator(const LimitTriplet& triplet,
                             const QuadraticTestFn& phi,
                             const Eigen::VectorXd& u);

// Exact evaluation of the coupled-process generator applied to phi^eps at
// (u, x); expectations closed-form via the mixture moments.
double apply_prelimit_generator(const SwitchingModel& model,
                                const ImpulseFamily& family, double eps,
                                const TestFunctionBundle& bundle,
                                const Eigen::VectorXd& u, int x);

// Correctors phi1 = (R0 a~1).grad, phi2 solving the order-eps^0 Poisson
// equation; constant-coefficient families only.
TestFunctionBundle build_correctors(const SwitchingModel& model,
                                    const ImpulseFamily& family,
                                    const StationaryPair& sp,
                                    const PotentialOperator& pot,
                                    const QuadraticTestFn& phi);

// Sup over (u, x) of |L^eps phi^eps - L phi| per eps, with L built from the
// requested sigma variant.
std::vector<double> perturbation_residual(
    const SwitchingModel& model, const ImpulseFamily& family,
    const StationaryPair& sp, const PotentialOperator& pot,
    const QuadraticTestFn& phi, SigmaVariant variant,
    const std::vector<double>& eps_grid,
    const std::vector<Eigen::VectorXd>& u_grid);

}  // namespace levyx

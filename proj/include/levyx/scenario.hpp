#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "levyx/impulse.hpp"
#include "levyx/switching.hpp"

namespace levyx {

struct Guards {
  double u_box_lo = -10.0, u_box_hi = 10.0;
  double lambda_cap = 4.0;
  double path_guard = 0.0;  // 0 -> auto 1e6 * (1 + |xi0|)
  double budget = 1e9;      // projected impulse-draw cap
};

/// A fully specified experiment: switching model, impulse family, initial
/// condition, convention and guard rails. The seed is part of the scenario;
/// there is no implicit randomness anywhere.
struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  int dimension = 1;
  SwitchingModel switching;
  ImpulseFamily impulse;
  Eigen::VectorXd xi0;
  int x0 = 0;
  Guards guards;

  nlohmann::json to_json() const;
  std::string canonical() const;  // sorted-key serialization
  std::uint64_t hash() const;     // FNV-1a of canonical()

  // Midpoints of the guard u-box plus endpoints, for condition grids.
  std::vector<Eigen::VectorXd> default_u_grid(int points_per_dim = 5) const;

  static Scenario from_json(const nlohmann::json& j, const std::string& name);
  // Accepts a file path or a built-in fixture name (alt2, iid2, m2q,
  // poisson2, driftonly).
  static Scenario load(const std::string& path_or_builtin);
};

std::vector<std::string> builtin_scenario_names();
bool is_builtin_scenario(const std::string& name);
Scenario builtin_scenario(const std::string& name);
nlohmann::json builtin_scenario_json(const std::string& name);

}  // namespace levyx

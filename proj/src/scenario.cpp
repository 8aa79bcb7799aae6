#include "levyx/scenario.hpp"

#include <fstream>
#include <map>

#include "levyx/errors.hpp"

namespace levyx {

using nlohmann::json;

namespace {

[[noreturn]] void schema_fail(const std::string& ptr, const std::string& msg) {
  fail("schema-error", ptr + ": " + msg);
}

const json& field(const json& j, const std::string& ptr, const char* key) {
  if (!j.is_object() || !j.contains(key))
    schema_fail(ptr + "/" + key, "missing required field");
  return j.at(key);
}

double number_at(const json& j, const std::string& ptr) {
  if (!j.is_number()) schema_fail(ptr, "expected a number");
  return j.get<double>();
}

Eigen::VectorXd vector_at(const json& j, const std::string& ptr, int d) {
  if (!j.is_array()) schema_fail(ptr, "expected an array");
  if (d >= 0 && static_cast<int>(j.size()) != d)
    schema_fail(ptr, "expected " + std::to_string(d) + " entries, got " +
                         std::to_string(j.size()));
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<int>(i)) = number_at(j[i], ptr + "/" + std::to_string(i));
  return v;
}

Eigen::MatrixXd matrix_at(const json& j, const std::string& ptr, int rows,
                          int cols) {
  if (!j.is_array() || j.empty()) schema_fail(ptr, "expected a 2-d array");
  if (rows >= 0 && static_cast<int>(j.size()) != rows)
    schema_fail(ptr, "expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(j.size(), cols >= 0 ? cols : j[0].size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Eigen::VectorXd row =
        vector_at(j[i], ptr + "/" + std::to_string(i), static_cast<int>(m.cols()));
    m.row(static_cast<int>(i)) = row.transpose();
  }
  return m;
}

VectorCoeff parse_vector_coeff(const json& j, const std::string& ptr, int d,
                               int n_states) {
  const std::string type =
      field(j, ptr, "type").is_string() ? j.at("type").get<std::string>() : "";
  VectorCoeff c;
  if (type == "const") {
    c.kind = VectorCoeff::Kind::Const;
    c.base.push_back(vector_at(field(j, ptr, "value"), ptr + "/value", d));
  } else if (type == "table") {
    c.kind = VectorCoeff::Kind::Table;
    const json& vals = field(j, ptr, "values");
    if (!vals.is_array() || static_cast<int>(vals.size()) != n_states)
      schema_fail(ptr + "/values", "expected one vector per state");
    for (std::size_t i = 0; i < vals.size(); ++i)
      c.base.push_back(
          vector_at(vals[i], ptr + "/values/" + std::to_string(i), d));
  } else if (type == "affine_clipped") {
    c.kind = VectorCoeff::Kind::AffineClipped;
    c.base.push_back(vector_at(field(j, ptr, "base"), ptr + "/base", d));
    c.slope.push_back(matrix_at(field(j, ptr, "slope"), ptr + "/slope", d, d));
    c.bound = number_at(field(j, ptr, "bound"), ptr + "/bound");
  } else {
    schema_fail(ptr + "/type", "expected const | table | affine_clipped");
  }
  return c;
}

ScalarCoeff parse_scalar_coeff(const json& j, const std::string& ptr,
                               int d, int n_states) {
  const std::string type =
      field(j, ptr, "type").is_string() ? j.at("type").get<std::string>() : "";
  ScalarCoeff c;
  if (type == "const") {
    c.kind = ScalarCoeff::Kind::Const;
    c.base.push_back(number_at(field(j, ptr, "value"), ptr + "/value"));
  } else if (type == "table") {
    c.kind = ScalarCoeff::Kind::Table;
    const json& vals = field(j, ptr, "values");
    if (!vals.is_array() || static_cast<int>(vals.size()) != n_states)
      schema_fail(ptr + "/values", "expected one value per state");
    for (std::size_t i = 0; i < vals.size(); ++i)
      c.base.push_back(number_at(vals[i], ptr + "/values/" + std::to_string(i)));
  } else if (type == "affine_clipped") {
    c.kind = ScalarCoeff::Kind::AffineClipped;
    c.base.push_back(number_at(field(j, ptr, "base"), ptr + "/base"));
    c.slope.push_back(vector_at(field(j, ptr, "slope"), ptr + "/slope", d));
    c.lo = j.value("lo", 0.0);
    c.hi = number_at(field(j, ptr, "bound"), ptr + "/bound");
  } else {
    schema_fail(ptr + "/type", "expected const | table | affine_clipped");
  }
  return c;
}

SmallLaw parse_small_law(const json& j, const std::string& ptr, int d) {
  const std::string kind =
      field(j, ptr, "kind").is_string() ? j.at("kind").get<std::string>() : "";
  SmallLaw law;
  if (kind == "deterministic") {
    law.kind = SmallLaw::Kind::Deterministic;
  } else if (kind == "gaussian") {
    law.kind = SmallLaw::Kind::Gaussian;
    law.cov = matrix_at(field(j, ptr, "cov"), ptr + "/cov", d, d);
    law.chol = psd_sqrt(law.cov);
  } else if (kind == "atoms") {
    law.kind = SmallLaw::Kind::Atoms;
    const json& atoms = field(j, ptr, "atoms");
    if (!atoms.is_array() || atoms.empty())
      schema_fail(ptr + "/atoms", "expected a nonempty array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const std::string aptr = ptr + "/atoms/" + std::to_string(i);
      Atom a;
      a.p = number_at(field(atoms[i], aptr, "p"), aptr + "/p");
      a.v = vector_at(field(atoms[i], aptr, "v"), aptr + "/v", d);
      law.atoms.push_back(std::move(a));
    }
  } else {
    schema_fail(ptr + "/kind", "expected deterministic | gaussian | atoms");
  }
  return law;
}

BigLaw parse_big_law(const json& j, const std::string& ptr, int d) {
  const std::string kind =
      field(j, ptr, "kind").is_string() ? j.at("kind").get<std::string>() : "";
  BigLaw law;
  if (kind == "atoms") {
    law.kind = BigLaw::Kind::Atoms;
    const json& atoms = field(j, ptr, "atoms");
    if (!atoms.is_array() || atoms.empty())
      schema_fail(ptr + "/atoms", "expected a nonempty array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const std::string aptr = ptr + "/atoms/" + std::to_string(i);
      Atom a;
      a.p = number_at(field(atoms[i], aptr, "p"), aptr + "/p");
      a.v = vector_at(field(atoms[i], aptr, "v"), aptr + "/v", d);
      law.atoms.push_back(std::move(a));
    }
  } else if (kind == "gaussian") {
    law.kind = BigLaw::Kind::Gaussian;
    law.mu = vector_at(field(j, ptr, "mean"), ptr + "/mean", d);
    law.cov = matrix_at(field(j, ptr, "cov"), ptr + "/cov", d, d);
    law.chol = psd_sqrt(law.cov);
  } else if (kind == "two_sided_exp") {
    law.kind = BigLaw::Kind::TwoSidedExp;
    law.mu = vector_at(field(j, ptr, "mean"), ptr + "/mean", d);
    law.scale = vector_at(field(j, ptr, "scale"), ptr + "/scale", d);
  } else {
    schema_fail(ptr + "/kind", "expected atoms | gaussian | two_sided_exp");
  }
  return law;
}

template <typename Law, typename Parser>
std::vector<Law> parse_laws(const json& j, const std::string& ptr, int d,
                            int n_states, Parser parse) {
  std::vector<Law> laws;
  if (j.is_object() && j.contains("per_state")) {
    const json& ps = j.at("per_state");
    if (!ps.is_array() || static_cast<int>(ps.size()) != n_states)
      schema_fail(ptr + "/per_state", "expected one law per state");
    for (std::size_t i = 0; i < ps.size(); ++i)
      laws.push_back(parse(ps[i], ptr + "/per_state/" + std::to_string(i), d));
  } else {
    laws.push_back(parse(j, ptr, d));
  }
  return laws;
}

json coeff_to_json(const VectorCoeff& c) {
  json j;
  auto vec = [](const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
  };
  switch (c.kind) {
    case VectorCoeff::Kind::Const:
      j["type"] = "const";
      j["value"] = vec(c.base[0]);
      break;
    case VectorCoeff::Kind::Table: {
      j["type"] = "table";
      json vals = json::array();
      for (const auto& v : c.base) vals.push_back(vec(v));
      j["values"] = vals;
      break;
    }
    case VectorCoeff::Kind::AffineClipped: {
      j["type"] = "affine_clipped";
      j["base"] = vec(c.base[0]);
      json rows = json::array();
      for (int i = 0; i < c.slope[0].rows(); ++i)
        rows.push_back(vec(c.slope[0].row(i).transpose()));
      j["slope"] = rows;
      j["bound"] = c.bound;
      break;
    }
  }
  return j;
}

json coeff_to_json(const ScalarCoeff& c) {
  json j;
  switch (c.kind) {
    case ScalarCoeff::Kind::Const:
      j["type"] = "const";
      j["value"] = c.base[0];
      break;
    case ScalarCoeff::Kind::Table:
      j["type"] = "table";
      j["values"] = c.base;
      break;
    case ScalarCoeff::Kind::AffineClipped:
      j["type"] = "affine_clipped";
      j["base"] = c.base[0];
      j["slope"] = std::vector<double>(c.slope[0].data(),
                                       c.slope[0].data() + c.slope[0].size());
      j["lo"] = c.lo;
      j["bound"] = c.hi;
      break;
  }
  return j;
}

json law_to_json(const SmallLaw& law) {
  json j;
  auto vec = [](const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
  };
  switch (law.kind) {
    case SmallLaw::Kind::Deterministic:
      j["kind"] = "deterministic";
      break;
    case SmallLaw::Kind::Gaussian: {
      j["kind"] = "gaussian";
      json rows = json::array();
      for (int i = 0; i < law.cov.rows(); ++i)
        rows.push_back(vec(law.cov.row(i).transpose()));
      j["cov"] = rows;
      break;
    }
    case SmallLaw::Kind::Atoms: {
      j["kind"] = "atoms";
      json atoms = json::array();
      for (const auto& a : law.atoms)
        atoms.push_back(json{{"p", a.p}, {"v", vec(a.v)}});
      j["atoms"] = atoms;
      break;
    }
  }
  return j;
}

json law_to_json(const BigLaw& law) {
  json j;
  auto vec = [](const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
  };
  switch (law.kind) {
    case BigLaw::Kind::Atoms: {
      j["kind"] = "atoms";
      json atoms = json::array();
      for (const auto& a : law.atoms)
        atoms.push_back(json{{"p", a.p}, {"v", vec(a.v)}});
      j["atoms"] = atoms;
      break;
    }
    case BigLaw::Kind::Gaussian: {
      j["kind"] = "gaussian";
      j["mean"] = vec(law.mu);
      json rows = json::array();
      for (int i = 0; i < law.cov.rows(); ++i)
        rows.push_back(vec(law.cov.row(i).transpose()));
      j["cov"] = rows;
      break;
    }
    case BigLaw::Kind::TwoSidedExp:
      j["kind"] = "two_sided_exp";
      j["mean"] = vec(law.mu);
      j["scale"] = vec(law.scale);
      break;
  }
  return j;
}

template <typename Law>
json laws_to_json(const std::vector<Law>& laws) {
  if (laws.size() == 1) return law_to_json(laws[0]);
  json ps = json::array();
  for (const auto& l : laws) ps.push_back(law_to_json(l));
  return json{{"per_state", ps}};
}

}  // namespace

Scenario Scenario::from_json(const json& j, const std::string& name) {
  Scenario sc;
  sc.name = name;
  if (!j.is_object()) schema_fail("", "scenario must be a JSON object");
  if (!j.contains("seed")) schema_fail("/seed", "missing required field");
  if (!j.at("seed").is_number_integer())
    schema_fail("/seed", "expected an integer");
  sc.seed = j.at("seed").get<std::uint64_t>();

  sc.dimension =
      static_cast<int>(number_at(field(j, "", "dimension"), "/dimension"));
  if (sc.dimension < 1) schema_fail("/dimension", "must be >= 1");

  const json& sw = field(j, "", "switching");
  sc.switching.q = vector_at(field(sw, "/switching", "q"), "/switching/q", -1);
  const int n = static_cast<int>(sc.switching.q.size());
  sc.switching.P =
      matrix_at(field(sw, "/switching", "P"), "/switching/P", n, n);
  for (int i = 0; i < n; ++i) {
    const double row = sc.switching.P.row(i).sum();
    if (std::abs(row - 1.0) > 1e-12)
      schema_fail("/switching/P/" + std::to_string(i),
                  "row sums to " + std::to_string(row));
  }

  const json& imp = field(j, "", "impulse");
  sc.impulse.dimension = sc.dimension;
  sc.impulse.n_states = n;
  sc.impulse.a1c =
      parse_vector_coeff(field(imp, "/impulse", "a1"), "/impulse/a1",
                         sc.dimension, n);
  sc.impulse.bc = parse_vector_coeff(field(imp, "/impulse", "b"), "/impulse/b",
                                     sc.dimension, n);
  sc.impulse.lambda0c = parse_scalar_coeff(
      field(imp, "/impulse", "lambda0"), "/impulse/lambda0", sc.dimension, n);
  sc.impulse.small = parse_laws<SmallLaw>(
      field(imp, "/impulse", "small_law"), "/impulse/small_law", sc.dimension,
      n, [](const json& lj, const std::string& p, int d) {
        return parse_small_law(lj, p, d);
      });
  if (imp.contains("big_law")) {
    sc.impulse.big = parse_laws<BigLaw>(
        imp.at("big_law"), "/impulse/big_law", sc.dimension, n,
        [](const json& lj, const std::string& p, int d) {
          return parse_big_law(lj, p, d);
        });
  } else {
    BigLaw zero;
    zero.kind = BigLaw::Kind::Atoms;
    zero.atoms.push_back({1.0, Eigen::VectorXd::Zero(sc.dimension)});
    sc.impulse.big.push_back(zero);
  }

  const json& init = field(j, "", "initial");
  sc.xi0 = vector_at(field(init, "/initial", "xi0"), "/initial/xi0",
                     sc.dimension);
  sc.x0 = static_cast<int>(number_at(field(init, "/initial", "x0"),
                                     "/initial/x0"));
  if (sc.x0 < 0 || sc.x0 >= n) schema_fail("/initial/x0", "state out of range");

  const std::string conv = j.value("convention", std::string("source"));
  if (conv == "source")
    sc.impulse.convention = Convention::Source;
  else if (conv == "destination")
    sc.impulse.convention = Convention::Destination;
  else
    schema_fail("/convention", "expected source | destination");

  if (j.contains("guards")) {
    const json& g = j.at("guards");
    if (g.contains("u_box")) {
      const Eigen::VectorXd box = vector_at(g.at("u_box"), "/guards/u_box", 2);
      sc.guards.u_box_lo = box(0);
      sc.guards.u_box_hi = box(1);
    }
    sc.guards.lambda_cap = g.value("lambda_cap", sc.guards.lambda_cap);
    sc.guards.path_guard = g.value("path_guard", sc.guards.path_guard);
    sc.guards.budget = g.value("budget", sc.guards.budget);
  }

  sc.switching.validate();
  sc.impulse.validate();
  return sc;
}

json Scenario::to_json() const {
  json j;
  j["seed"] = seed;
  j["dimension"] = dimension;
  j["switching"] = {
      {"q", std::vector<double>(switching.q.data(),
                                switching.q.data() + switching.q.size())}};
  json rows = json::array();
  for (int i = 0; i < switching.P.rows(); ++i) {
    const Eigen::VectorXd r = switching.P.row(i).transpose();
    rows.push_back(std::vector<double>(r.data(), r.data() + r.size()));
  }
  j["switching"]["P"] = rows;
  j["impulse"] = {{"a1", coeff_to_json(impulse.a1c)},
                  {"b", coeff_to_json(impulse.bc)},
                  {"lambda0", coeff_to_json(impulse.lambda0c)},
                  {"small_law", laws_to_json(impulse.small)},
                  {"big_law", laws_to_json(impulse.big)}};
  j["initial"] = {
      {"xi0", std::vector<double>(xi0.data(), xi0.data() + xi0.size())},
      {"x0", x0}};
  j["convention"] =
      impulse.convention == Convention::Source ? "source" : "destination";
  j["guards"] = {{"u_box", std::vector<double>{guards.u_box_lo, guards.u_box_hi}},
                 {"lambda_cap", guards.lambda_cap},
                 {"path_guard", guards.path_guard},
                 {"budget", guards.budget}};
  return j;
}

std::string Scenario::canonical() const { return to_json().dump(); }

std::uint64_t Scenario::hash() const {
  // FNV-1a over the canonical serialization
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<Eigen::VectorXd> Scenario::default_u_grid(int points_per_dim) const {
  // axis-aligned grid through the guard box; full tensor grids only for d = 1
  std::vector<Eigen::VectorXd> grid;
  const double lo = guards.u_box_lo, hi = guards.u_box_hi;
  if (dimension == 1) {
    for (int i = 0; i < points_per_dim; ++i) {
      Eigen::VectorXd u(1);
      u(0) = lo + (hi - lo) * i / (points_per_dim - 1.0);
      grid.push_back(u);
    }
  } else {
    grid.push_back(Eigen::VectorXd::Zero(dimension));
    for (int k = 0; k < dimension; ++k) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(dimension);
      u(k) = lo;
      grid.push_back(u);
      u(k) = hi;
      grid.push_back(u);
    }
  }
  return grid;
}

namespace {

const std::map<std::string, const char*>& builtin_table() {
  static const std::map<std::string, const char*> table = {
      {"alt2", R"({
        "seed": 1001, "dimension": 1,
        "switching": {"q": [1.0, 1.0], "P": [[0.0, 1.0], [1.0, 0.0]]},
        "impulse": {
          "a1": {"type": "table", "values": [[1.0], [-1.0]]},
          "b": {"type": "const", "value": [0.0]},
          "lambda0": {"type": "const", "value": 0.0},
          "small_law": {"kind": "deterministic"},
          "big_law": {"kind": "atoms", "atoms": [{"p": 1.0, "v": [1.0]}]}
        },
        "initial": {"xi0": [0.0], "x0": 0},
        "convention": "source",
        "guards": {"u_box": [-4.0, 4.0], "lambda_cap": 4.0}
      })"},
      {"iid2", R"({
        "seed": 1002, "dimension": 1,
        "switching": {"q": [1.0, 1.0], "P": [[0.5, 0.5], [0.5, 0.5]]},
        "impulse": {
          "a1": {"type": "table", "values": [[1.0], [-1.0]]},
          "b": {"type": "const", "value": [0.0]},
          "lambda0": {"type": "const", "value": 0.0},
          "small_law": {"kind": "deterministic"},
          "big_law": {"kind": "atoms", "atoms": [{"p": 1.0, "v": [1.0]}]}
        },
        "initial": {"xi0": [0.0], "x0": 0},
        "convention": "source",
        "guards": {"u_box": [-4.0, 4.0], "lambda_cap": 4.0}
      })"},
      {"m2q", R"({
        "seed": 1003, "dimension": 1,
        "switching": {"q": [1.0, 2.0], "P": [[0.0, 1.0], [1.0, 0.0]]},
        "impulse": {
          "a1": {"type": "const", "value": [0.0]},
          "b": {"type": "table", "values": [[0.5], [0.0]]},
          "lambda0": {"type": "const", "value": 0.0},
          "small_law": {"kind": "deterministic"},
          "big_law": {"kind": "atoms", "atoms": [{"p": 1.0, "v": [1.0]}]}
        },
        "initial": {"xi0": [0.0], "x0": 0},
        "convention": "source",
        "guards": {"u_box": [-4.0, 4.0], "lambda_cap": 4.0}
      })"},
      {"poisson2", R"({
        "seed": 1004, "dimension": 1,
        "switching": {"q": [1.0, 1.0], "P": [[0.0, 1.0], [1.0, 0.0]]},
        "impulse": {
          "a1": {"type": "const", "value": [0.0]},
          "b": {"type": "const", "value": [0.0]},
          "lambda0": {"type": "const", "value": 0.5},
          "small_law": {"kind": "deterministic"},
          "big_law": {"kind": "atoms", "atoms": [{"p": 1.0, "v": [1.0]}]}
        },
        "initial": {"xi0": [0.0], "x0": 0},
        "convention": "source",
        "guards": {"u_box": [-4.0, 4.0], "lambda_cap": 4.0}
      })"},
      {"driftonly", R"({
        "seed": 1005, "dimension": 1,
        "switching": {"q": [1.0, 1.0], "P": [[0.0, 1.0], [1.0, 0.0]]},
        "impulse": {
          "a1": {"type": "const", "value": [0.0]},
          "b": {"type": "const", "value": [0.5]},
          "lambda0": {"type": "const", "value": 0.0},
          "small_law": {"kind": "gaussian", "cov": [[0.25]]},
          "big_law": {"kind": "atoms", "atoms": [{"p": 1.0, "v": [1.0]}]}
        },
        "initial": {"xi0": [0.0], "x0": 0},
        "convention": "source",
        "guards": {"u_box": [-4.0, 4.0], "lambda_cap": 4.0}
      })"}};
  return table;
}

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : builtin_table()) names.push_back(k);
  return names;
}

bool is_builtin_scenario(const std::string& name) {
  return builtin_table().count(name) > 0;
}

nlohmann::json builtin_scenario_json(const std::string& name) {
  auto it = builtin_table().find(name);
  if (it == builtin_table().end())
    fail("invalid-argument", "unknown built-in scenario: " + name);
  return json::parse(it->second);
}

Scenario builtin_scenario(const std::string& name) {
  return Scenario::from_json(builtin_scenario_json(name), name);
}

Scenario Scenario::load(const std::string& path_or_builtin) {
  if (is_builtin_scenario(path_or_builtin))
    return builtin_scenario(path_or_builtin);
  std::ifstream in(path_or_builtin);
  if (!in) fail("parse-error", "cannot open " + path_or_builtin);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    fail("parse-error", std::string(e.what()));
  }
  std::string stem = path_or_builtin;
  if (auto slash = stem.find_last_of('/'); slash != std::string::npos)
    stem = stem.substr(slash + 1);
  if (auto dot = stem.find_last_of('.'); dot != std::string::npos)
    stem = stem.substr(0, dot);
  return from_json(j, stem);
}

}  // namespace levyx

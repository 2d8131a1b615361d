#pragma once

// Strict JSON configuration for the command-line tools.
//
// One schema serves files and stdin:
//
//   {
//     "n": 1,
//     "interval": [0.0, 10.0],
//     "profile": {"kind": "constant", "matrix": [-1.0]},
//     "settings": {"steps": 4096, "drift_tol": 1e-6, "rank_tol": 1e-8,
//                  "mesh": 512, "lambda_margin": 1.0, "seed": 0},
//     "subcommand-params": {}
//   }
//
// Unknown keys are rejected everywhere; omitted settings take the defaults
// above.  Matrices are flat row-major arrays.  A profile of kind "preset"
// replaces n / interval / payload with a named catalog entry.

#include <cmath>
#include <initializer_list>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "maslov/errors.hpp"
#include "maslov/morse.hpp"

namespace maslov {

struct RunConfig {
  CurvatureProfile profile;
  MorseSettings settings;
  nlohmann::ordered_json subcommand_params = nlohmann::ordered_json::object();
};

/// A named profile with its independently derived expected index, for
/// quick CLI runs and reproducible cross-checks.
struct Preset {
  std::string name;
  CurvatureProfile profile;
  int expected_index = 0;
  std::string note;
};

inline const std::vector<Preset>& preset_catalog() {
  static const std::vector<Preset> table = [] {
    std::vector<Preset> v;
    const double pi = std::numbers::pi;
    v.push_back({"flat", make_constant_profile(1, 0.0, 1.0, 0.0 * RealMatrix::identity(1)), 0,
                 "zero curvature: no conjugate points"});
    v.push_back({"hyperbolic",
                 make_constant_profile(1, 0.0, 1.0, 1.0 * RealMatrix::identity(1)), 0,
                 "positive curvature operator: Jacobi fields grow, index 0"});
    v.push_back({"round-sphere",
                 make_constant_profile(1, 0.0, 10.0, -1.0 * RealMatrix::identity(1)), 3,
                 "R = -1 on [0,10]: conjugate points at pi, 2pi, 3pi"});
    v.push_back({"round-sphere-pi",
                 make_constant_profile(1, 0.0, pi, -1.0 * RealMatrix::identity(1)), 0,
                 "R = -1 on [0,pi]: the first conjugate point sits exactly at b"});
    v.push_back({"sphere-like-n2",
                 make_constant_profile(2, 0.0, 4.0, -1.0 * RealMatrix::identity(2)), 2,
                 "R = -I2 on [0,4]: double conjugate point at pi, half of one at 2pi > b"});
    v.push_back({"deep-well",
                 make_constant_profile(1, 0.0, 1.0, -50.0 * RealMatrix::identity(1)), 2,
                 "R = -50 on [0,1]: conjugate points at k*pi/sqrt(50), k = 1, 2"});
    v.push_back({"split-spectrum", make_diagonal_profile(0.0, 4.0, {-1.0, -4.0}), 3,
                 "decoupled components: crossings at pi/2 (simple) and pi (double)"});
    {
      RealMatrix w1(1, 1), w2(1, 1);
      w1(0, 0) = -25.0;
      v.push_back({"step-well", make_piecewise_profile(1, {0.0, 1.0, 2.0}, {w1, w2}), 2,
                   "R = -25 then 0: crossings at pi/5 and at the matched linear zero"});
    }
    return v;
  }();
  return table;
}

inline const Preset& find_preset(const std::string& name) {
  for (const Preset& p : preset_catalog())
    if (p.name == name) return p;
  std::string names;
  for (const Preset& p : preset_catalog()) names += (names.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "' (available: " + names + ")");
}

// ---------------------------------------------------------------------------
// Strict parsing helpers.

namespace detail {

using json = nlohmann::ordered_json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

inline const json& require_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError("missing required field '" + std::string(key) +
                                         "' in " + where);
  return *it;
}

inline double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline std::size_t as_count(const json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<double>() < 0)
    throw ConfigError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::vector<double> as_number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(as_number(x, where));
  return out;
}

/// Flat row-major n x n matrix.
inline RealMatrix as_matrix(const json& v, std::size_t n, const std::string& where) {
  const std::vector<double> flat = as_number_list(v, where);
  if (flat.size() != n * n)
    throw ConfigError(where + ": expected " + std::to_string(n * n) +
                      " entries (row-major " + std::to_string(n) + " x " + std::to_string(n) +
                      "), got " + std::to_string(flat.size()));
  RealMatrix m(n, n);
  m.data = flat;
  return m;
}

inline std::vector<RealMatrix> as_matrix_list(const json& v, std::size_t n,
                                              const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array of matrices");
  std::vector<RealMatrix> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    out.push_back(as_matrix(v[i], n, where + "[" + std::to_string(i) + "]"));
  return out;
}

inline CurvatureProfile parse_profile(const json& root) {
  const json& prof = require_field(root, "profile", "config");
  if (!prof.is_object()) throw ConfigError("'profile' must be an object");
  const std::string kind = require_field(prof, "kind", "profile").get<std::string>();

  if (kind == "preset") {
    reject_unknown_keys(prof, {"kind", "name"}, "profile (preset)");
    const Preset& preset =
        find_preset(require_field(prof, "name", "profile").get<std::string>());
    // Redundant top-level fields are allowed but must agree.
    if (root.contains("n") && as_count(root["n"], "n") != preset.profile.n)
      throw ConfigError("'n' contradicts preset '" + preset.name + "'");
    if (root.contains("interval")) {
      const auto iv = as_number_list(root["interval"], "interval");
      if (iv.size() != 2 || iv[0] != preset.profile.a || iv[1] != preset.profile.b)
        throw ConfigError("'interval' contradicts preset '" + preset.name + "'");
    }
    return preset.profile;
  }

  const std::size_t n = as_count(require_field(root, "n", "config"), "n");
  if (n == 0) throw ConfigError("'n' must be at least 1");
  const auto iv = as_number_list(require_field(root, "interval", "config"), "interval");
  if (iv.size() != 2 || !(iv[0] < iv[1]))
    throw ConfigError("'interval' must be [a, b] with a < b");
  const double a = iv[0], b = iv[1];

  try {
    if (kind == "constant") {
      reject_unknown_keys(prof, {"kind", "matrix"}, "profile (constant)");
      return make_constant_profile(n, a, b,
                                   as_matrix(require_field(prof, "matrix", "profile"), n,
                                             "profile.matrix"));
    }
    if (kind == "diagonal") {
      reject_unknown_keys(prof, {"kind", "entries"}, "profile (diagonal)");
      const auto entries =
          as_number_list(require_field(prof, "entries", "profile"), "profile.entries");
      if (entries.size() != n)
        throw ConfigError("profile.entries: expected " + std::to_string(n) + " values");
      return make_diagonal_profile(a, b, entries);
    }
    if (kind == "piecewise") {
      reject_unknown_keys(prof, {"kind", "breakpoints", "pieces"}, "profile (piecewise)");
      const auto bps = as_number_list(require_field(prof, "breakpoints", "profile"),
                                      "profile.breakpoints");
      if (bps.size() < 2 || bps.front() != a || bps.back() != b)
        throw ConfigError("profile.breakpoints must run from interval[0] to interval[1]");
      return make_piecewise_profile(
          n, bps, as_matrix_list(require_field(prof, "pieces", "profile"), n,
                                 "profile.pieces"));
    }
    if (kind == "polynomial") {
      reject_unknown_keys(prof, {"kind", "coefficients"}, "profile (polynomial)");
      return make_polynomial_profile(
          n, a, b, as_matrix_list(require_field(prof, "coefficients", "profile"),
                                  n, "profile.coefficients"));
    }
    if (kind == "sampled") {
      reject_unknown_keys(prof, {"kind", "times", "values"}, "profile (sampled)");
      const auto times =
          as_number_list(require_field(prof, "times", "profile"), "profile.times");
      if (times.size() < 2 || times.front() != a || times.back() != b)
        throw ConfigError("profile.times must run from interval[0] to interval[1]");
      return make_sampled_profile(n, times,
                                  as_matrix_list(require_field(prof, "values", "profile"), n,
                                                 "profile.values"));
    }
  } catch (const InvalidSpec& e) {
    throw ConfigError(std::string("profile rejected: ") + e.what());
  }
  throw ConfigError("unknown profile kind '" + kind +
                    "' (expected constant, diagonal, piecewise, polynomial, sampled, preset)");
}

inline MorseSettings parse_settings(const json& root) {
  MorseSettings s;
  auto it = root.find("settings");
  if (it == root.end()) return s;
  const json& obj = *it;
  if (!obj.is_object()) throw ConfigError("'settings' must be an object");
  reject_unknown_keys(obj, {"steps", "drift_tol", "rank_tol", "mesh", "lambda_margin", "seed"},
                      "settings");
  if (obj.contains("steps")) s.flow.steps = as_count(obj["steps"], "settings.steps");
  if (obj.contains("drift_tol"))
    s.flow.drift_tol = as_number(obj["drift_tol"], "settings.drift_tol");
  if (obj.contains("rank_tol")) s.rank_tol = as_number(obj["rank_tol"], "settings.rank_tol");
  if (obj.contains("mesh")) s.mesh = as_count(obj["mesh"], "settings.mesh");
  if (obj.contains("lambda_margin"))
    s.lambda_margin = as_number(obj["lambda_margin"], "settings.lambda_margin");
  if (obj.contains("seed")) s.seed = as_count(obj["seed"], "settings.seed");
  try {
    validate_morse_settings(s);
  } catch (const InvalidSpec& e) {
    throw ConfigError(std::string("settings rejected: ") + e.what());
  }
  return s;
}

}  // namespace detail

/// Parse and validate a complete run configuration.  Everything wrong with
/// the text maps to ConfigError (CLI exit code 2).
inline RunConfig parse_config(const std::string& text) {
  nlohmann::ordered_json root;
  try {
    root = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be a JSON object");
  detail::reject_unknown_keys(root, {"n", "interval", "profile", "settings",
                                     "subcommand-params"},
                              "config");
  RunConfig cfg;
  cfg.profile = detail::parse_profile(root);
  cfg.settings = detail::parse_settings(root);
  if (root.contains("subcommand-params")) {
    if (!root["subcommand-params"].is_object())
      throw ConfigError("'subcommand-params' must be an object");
    cfg.subcommand_params = root["subcommand-params"];
  }
  return cfg;
}

/// Inverse of parse_config up to preset expansion: parsing the emitted JSON
/// reproduces the same profile, settings and subcommand parameters.
inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  using json = nlohmann::ordered_json;
  json root;
  root["n"] = cfg.profile.n;
  root["interval"] = {cfg.profile.a, cfg.profile.b};
  json prof;
  auto flat = [](const RealMatrix& m) { return m.data; };
  switch (cfg.profile.kind) {
    case ProfileKind::Constant:
      prof["kind"] = "constant";
      prof["matrix"] = flat(cfg.profile.constant);
      break;
    case ProfileKind::DiagonalConstant:
      prof["kind"] = "diagonal";
      prof["entries"] = cfg.profile.diagonal;
      break;
    case ProfileKind::PiecewiseConstant: {
      prof["kind"] = "piecewise";
      prof["breakpoints"] = cfg.profile.breakpoints;
      json pieces = json::array();
      for (const auto& m : cfg.profile.pieces) pieces.push_back(flat(m));
      prof["pieces"] = pieces;
      break;
    }
    case ProfileKind::PolynomialEntries: {
      prof["kind"] = "polynomial";
      json coeffs = json::array();
      for (const auto& m : cfg.profile.poly_coeffs) coeffs.push_back(flat(m));
      prof["coefficients"] = coeffs;
      break;
    }
    case ProfileKind::SampledLinearInterp: {
      prof["kind"] = "sampled";
      prof["times"] = cfg.profile.sample_times;
      json values = json::array();
      for (const auto& m : cfg.profile.samples) values.push_back(flat(m));
      prof["values"] = values;
      break;
    }
  }
  root["profile"] = prof;
  json settings;
  settings["steps"] = cfg.settings.flow.steps;
  settings["drift_tol"] = cfg.settings.flow.drift_tol;
  settings["rank_tol"] = cfg.settings.rank_tol;
  settings["mesh"] = cfg.settings.mesh;
  settings["lambda_margin"] = cfg.settings.lambda_margin;
  settings["seed"] = cfg.settings.seed;
  root["settings"] = settings;
  root["subcommand-params"] = cfg.subcommand_params;
  return root;
}

}  // namespace maslov

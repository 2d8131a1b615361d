// Config parsing, preset expansion, strictness, serialization round-trips,
// and end-to-end CLI behavior (exit codes, output formats, determinism)
// driven through the real binary.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "maslov/config.hpp"
#include "maslov/report.hpp"

using namespace maslov;

namespace {

RunConfig parse(const std::string& text) { return parse_config(text); }

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the installed CLI binary with the given arguments, feeding `input`
// on stdin.  Uses the shell so the test exercises the program exactly as a
// user would.
CliResult run_cli(const std::string& args, const std::string& input,
                  const std::string& env = "") {
  static int counter = 0;
  const std::string tag = std::to_string(++counter);
  const std::string in_path = "/tmp/maslov_cli_in_" + tag;
  const std::string out_path = "/tmp/maslov_cli_out_" + tag;
  const std::string err_path = "/tmp/maslov_cli_err_" + tag;
  {
    std::ofstream f(in_path);
    f << input;
  }
  const std::string cmd = env + (env.empty() ? "" : " ") + MASLOV_CLI_PATH + " " + args +
                          " < " + in_path + " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out_path);
  r.err = read_file(err_path);
  std::remove(in_path.c_str());
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

const char* kFastFlat =
    R"({"profile": {"kind": "preset", "name": "flat"},
        "settings": {"steps": 1024, "mesh": 64}})";

}  // namespace

TEST_CASE("minimal preset config applies defaults") {
  const RunConfig cfg = parse(R"({"profile": {"kind": "preset", "name": "flat"}})");
  CHECK(cfg.profile.n == 1);
  CHECK(cfg.profile.a == 0.0);
  CHECK(cfg.profile.b == 1.0);
  CHECK(cfg.profile.kind == ProfileKind::Constant);
  CHECK(cfg.settings.flow.steps == 4096);
  CHECK(cfg.settings.flow.drift_tol == 1e-6);
  CHECK(cfg.settings.rank_tol == 1e-8);
  CHECK(cfg.settings.mesh == 512);
  CHECK(cfg.settings.lambda_margin == 1.0);
  CHECK(cfg.settings.seed == 0);
  CHECK(cfg.subcommand_params.empty());
}

TEST_CASE("preset expansion produces the documented payloads") {
  const RunConfig cfg =
      parse(R"({"profile": {"kind": "preset", "name": "sphere-like-n2"}})");
  REQUIRE(cfg.profile.kind == ProfileKind::Constant);
  REQUIRE(cfg.profile.n == 2);
  CHECK(cfg.profile.a == 0.0);
  CHECK(cfg.profile.b == 4.0);
  const RealMatrix r = curvature_at(cfg.profile, 1.0);
  CHECK(r(0, 0) == -1.0);
  CHECK(r(1, 1) == -1.0);
  CHECK(r(0, 1) == 0.0);

  // Every catalog entry parses and records a nonnegative expected index.
  for (const auto& p : preset_catalog()) {
    const RunConfig c =
        parse(R"({"profile": {"kind": "preset", "name": ")" + p.name + R"("}})");
    CHECK(c.profile.n >= 1);
    CHECK(c.profile.a < c.profile.b);
    CHECK(p.expected_index >= 0);
    CHECK_FALSE(p.note.empty());
  }
}

TEST_CASE("redundant n and interval must agree with the preset") {
  CHECK_NOTHROW(parse(
      R"({"n": 1, "interval": [0.0, 10.0],
          "profile": {"kind": "preset", "name": "round-sphere"}})"));
  CHECK_THROWS_AS(parse(R"({"n": 2,
                            "profile": {"kind": "preset", "name": "round-sphere"}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"interval": [0.0, 9.0],
                            "profile": {"kind": "preset", "name": "round-sphere"}})"),
                  ConfigError);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat"}, "bogus": 1})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat", "extra": 2}})"),
                  ConfigError);
  CHECK_THROWS_AS(
      parse(R"({"profile": {"kind": "preset", "name": "flat"},
                "settings": {"stepz": 100}})"),
      ConfigError);
  CHECK_THROWS_AS(
      parse(R"({"n": 1, "interval": [0.0, 1.0],
                "profile": {"kind": "constant", "matrix": [0.0], "entries": [0.0]}})"),
      ConfigError);
}

TEST_CASE("malformed payloads raise ConfigError") {
  CHECK_THROWS_AS(parse("{nope"), ConfigError);
  CHECK_THROWS_AS(parse("[1, 2, 3]"), ConfigError);
  // missing profile
  CHECK_THROWS_AS(parse(R"({"n": 1, "interval": [0.0, 1.0]})"), ConfigError);
  // unknown kind / preset
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "mystery"}})"), ConfigError);
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "mystery"}})"),
                  ConfigError);
  // interval must be ordered and finite
  CHECK_THROWS_AS(parse(R"({"n": 1, "interval": [1.0, 0.0],
                            "profile": {"kind": "constant", "matrix": [0.0]}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"n": 1, "interval": [0.0],
                            "profile": {"kind": "constant", "matrix": [0.0]}})"),
                  ConfigError);
  // matrix payload must have n^2 entries
  CHECK_THROWS_AS(parse(R"({"n": 2, "interval": [0.0, 1.0],
                            "profile": {"kind": "constant", "matrix": [0.0, 0.0]}})"),
                  ConfigError);
  // counts must be nonnegative integers
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat"},
                            "settings": {"steps": -5}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat"},
                            "settings": {"steps": 2.5}})"),
                  ConfigError);
  // validated bounds funnel into ConfigError too
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat"},
                            "settings": {"mesh": 4}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat"},
                            "settings": {"drift_tol": 0.0}})"),
                  ConfigError);
  // breakpoints must span the interval exactly
  CHECK_THROWS_AS(parse(R"({"n": 1, "interval": [0.0, 2.0],
                            "profile": {"kind": "piecewise",
                                        "breakpoints": [0.0, 1.0],
                                        "pieces": [[-1.0]]}})"),
                  ConfigError);
  // subcommand-params must be an object
  CHECK_THROWS_AS(parse(R"({"profile": {"kind": "preset", "name": "flat"},
                            "subcommand-params": [1]})"),
                  ConfigError);
}

TEST_CASE("every explicit profile kind parses and evaluates") {
  const RunConfig c1 = parse(R"({"n": 2, "interval": [0.0, 1.0],
      "profile": {"kind": "constant", "matrix": [1.0, 2.0, 2.0, 3.0]}})");
  CHECK(curvature_at(c1.profile, 0.5)(0, 1) == 2.0);

  const RunConfig c2 = parse(R"({"n": 2, "interval": [0.0, 1.0],
      "profile": {"kind": "diagonal", "entries": [-1.0, -4.0]}})");
  CHECK(curvature_at(c2.profile, 0.3)(1, 1) == -4.0);
  CHECK(curvature_at(c2.profile, 0.3)(0, 1) == 0.0);

  const RunConfig c3 = parse(R"({"n": 1, "interval": [0.0, 2.0],
      "profile": {"kind": "piecewise", "breakpoints": [0.0, 1.0, 2.0],
                  "pieces": [[-25.0], [0.0]]}})");
  CHECK(curvature_at(c3.profile, 0.5)(0, 0) == -25.0);
  CHECK(curvature_at(c3.profile, 1.5)(0, 0) == 0.0);

  const RunConfig c4 = parse(R"({"n": 1, "interval": [0.0, 2.0],
      "profile": {"kind": "polynomial", "coefficients": [[1.0], [2.0]]}})");
  CHECK(curvature_at(c4.profile, 0.5)(0, 0) == Catch::Approx(2.0).margin(1e-14));

  const RunConfig c5 = parse(R"({"n": 1, "interval": [0.0, 2.0],
      "profile": {"kind": "sampled", "times": [0.0, 1.0, 2.0],
                  "values": [[0.0], [2.0], [0.0]]}})");
  CHECK(curvature_at(c5.profile, 0.5)(0, 0) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("serialization round-trips and is deterministic") {
  const std::vector<std::string> texts = {
      R"({"profile": {"kind": "preset", "name": "step-well"},
          "settings": {"mesh": 256, "seed": 7}})",
      R"({"n": 2, "interval": [0.0, 4.0],
          "profile": {"kind": "diagonal", "entries": [-1.0, -4.0]}})",
      R"({"n": 1, "interval": [0.0, 2.0],
          "profile": {"kind": "polynomial", "coefficients": [[1.0], [2.0]]},
          "subcommand-params": {"s_diag": [2.0]}})",
  };
  for (const auto& text : texts) {
    const RunConfig cfg = parse(text);
    const std::string once = config_to_json(cfg).dump(2);
    const RunConfig cfg2 = parse(once);
    const std::string twice = config_to_json(cfg2).dump(2);
    CHECK(once == twice);  // parse/serialize reaches a fixed point
    CHECK(config_to_json(parse(text)).dump(2) == once);  // and is deterministic
  }
}

TEST_CASE("cli: exit 0 with a json report on success") {
  const CliResult r = run_cli("index --config -", kFastFlat);
  REQUIRE(r.exit_code == 0);
  const auto j = ordered_json::parse(r.out);
  CHECK(j["subcommand"] == "index");
  CHECK(j["report"]["index"] == 0);
  CHECK(j["report"]["certified"] == true);
}

TEST_CASE("cli: identical configs give byte-identical reports") {
  const char* cfg =
      R"({"profile": {"kind": "preset", "name": "step-well"},
          "settings": {"steps": 1024, "mesh": 128, "seed": 42}})";
  const CliResult a = run_cli("index --config -", cfg);
  const CliResult b = run_cli("index --config -", cfg);
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(a.out == b.out);
  CHECK_FALSE(a.out.empty());
}

TEST_CASE("cli: csv output uses the documented columns") {
  const CliResult conj = run_cli("conjugate --config - --output csv",
                                 R"({"profile": {"kind": "preset", "name": "step-well"},
                                     "settings": {"steps": 1024, "mesh": 64}})");
  REQUIRE(conj.exit_code == 0);
  CHECK(conj.out.rfind("edge,u_star,multiplicity,sign,slope", 0) == 0);

  const CliResult hess = run_cli("hessian --config - --output csv", kFastFlat);
  REQUIRE(hess.exit_code == 0);
  CHECK(hess.out == "mesh,negative_count\n64,0\n128,0\n");

  const CliResult rect = run_cli("rectangle --config - --output csv", kFastFlat);
  REQUIRE(rect.exit_code == 0);
  CHECK(rect.out.rfind("edge,index,winding,events", 0) == 0);

  const CliResult loop = run_cli("maslov-loop --config - --output csv",
                                 R"({"n": 1, "interval": [0.0, 1.0],
                                     "profile": {"kind": "constant", "matrix": [0.0]}})");
  REQUIRE(loop.exit_code == 0);
  CHECK(loop.out.rfind("u,phase", 0) == 0);
}

TEST_CASE("cli: exit 1 when certification fails") {
  // Near-threshold sphere: the third continuum eigenvalue is +0.016 but the
  // mesh-8 second-difference ladder pushes it below zero, so the finite
  // difference count disagrees with the exact methods.
  const CliResult r = run_cli("index --config -",
                              R"({"n": 1, "interval": [0.0, 9.35],
                                  "profile": {"kind": "constant", "matrix": [-1.0]},
                                  "settings": {"steps": 1024, "mesh": 8}})");
  REQUIRE(r.exit_code == 1);
  const auto j = ordered_json::parse(r.out);
  CHECK(j["report"]["certified"] == false);
  CHECK_FALSE(j["report"]["notes"].empty());
}

TEST_CASE("cli: exit 2 on configuration problems") {
  CHECK(run_cli("index --config -", "{nope").exit_code == 2);
  CHECK(run_cli("index --config -",
                R"({"profile": {"kind": "preset", "name": "flat"}, "junk": 1})")
            .exit_code == 2);
  CHECK(run_cli("index --config /does/not/exist", "").exit_code == 2);
  CHECK(run_cli("frobnicate --config -", "{}").exit_code == 2);
  // params on a subcommand that takes none
  CHECK(run_cli("conjugate --config -",
                R"({"profile": {"kind": "preset", "name": "flat"},
                    "settings": {"steps": 1024, "mesh": 64},
                    "subcommand-params": {"s_diag": [1.0]}})")
            .exit_code == 2);
}

TEST_CASE("cli: exit 3 on numerical failure") {
  // An impossible drift tolerance on a coupled system trips the symplectic
  // drift guard inside the flow.
  const CliResult r = run_cli("conjugate --config -",
                              R"({"n": 2, "interval": [0.0, 4.0],
                                  "profile": {"kind": "constant",
                                              "matrix": [-1.0, 0.3, 0.3, -2.0]},
                                  "settings": {"drift_tol": 1e-300}})");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("numerical failure") != std::string::npos);
}

TEST_CASE("cli: maslov-loop reports a vanishing loop sum") {
  const CliResult r = run_cli("maslov-loop --config -",
                              R"({"n": 2, "interval": [0.0, 1.0],
                                  "profile": {"kind": "constant",
                                              "matrix": [0.0, 0.0, 0.0, 0.0]},
                                  "subcommand-params": {"s_diag": [1.0, 2.0]}})");
  REQUIRE(r.exit_code == 0);
  const auto j = ordered_json::parse(r.out);
  const int path_index = j["report"]["path_index"].get<int>();
  const double winding = j["report"]["winding"].get<double>();
  CHECK(path_index == -2);
  CHECK(winding == Catch::Approx(2.0).margin(0.05));
  CHECK(j["report"]["events"].size() == 2);
}

TEST_CASE("cli: MASLOV_LOG=debug writes diagnostics to stderr") {
  const CliResult quiet = run_cli("conjugate --config -", kFastFlat);
  const CliResult loud = run_cli("conjugate --config -", kFastFlat, "MASLOV_LOG=debug");
  REQUIRE(quiet.exit_code == 0);
  REQUIRE(loud.exit_code == 0);
  CHECK(quiet.err.empty());
  CHECK_FALSE(loud.err.empty());
  CHECK(quiet.out == loud.out);  // logging must not perturb the report
}

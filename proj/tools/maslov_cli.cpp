// Command-line driver: computes the Morse index of a geodesic from a JSON
// description of its curvature profile, by conjugate-point counting,
// spectral counting, and discretized Hessians, with the rectangle-loop
// cross-check tying them together.
//
// Exit codes: 0 success / certified, 1 certification mismatch, 2 invalid
// configuration, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maslov/config.hpp"
#include "maslov/report.hpp"

namespace {

using namespace maslov;

std::string read_config_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_output(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path);
  if (!f) throw ConfigError("cannot open output file: " + out_path);
  f << text;
}

ordered_json wrap(const std::string& subcommand, const RunConfig& cfg, ordered_json report) {
  ordered_json j;
  j["subcommand"] = subcommand;
  j["n"] = cfg.profile.n;
  j["interval"] = {cfg.profile.a, cfg.profile.b};
  j["report"] = std::move(report);
  return j;
}

void require_no_params(const RunConfig& cfg, const std::string& subcommand) {
  if (!cfg.subcommand_params.empty())
    throw ConfigError("subcommand '" + subcommand + "' takes no parameters");
}

struct Emitted {
  std::string text;
  int exit_code = 0;
};

Emitted run_conjugate(const RunConfig& cfg, const std::string& output) {
  require_no_params(cfg, "conjugate");
  const ConjugateReport rep = conjugate_points(cfg.profile, cfg.settings);
  if (output == "csv") return {events_csv({{"conjugate", &rep.events}}), 0};
  return {wrap("conjugate", cfg, to_json(rep)).dump(2) + "\n", 0};
}

Emitted run_spectrum(const RunConfig& cfg, const std::string& output) {
  require_no_params(cfg, "spectrum");
  const SpectralReport spec = spectral_count(cfg.profile, cfg.settings);
  const auto plan = detail::plan_endpoints(cfg.profile, cfg.settings);
  const double band =
      fd_zero_band(cfg.profile, cfg.settings.mesh, plan.nullity_at_b > 0);
  const SturmFdReport fd = sl_eigs_fd(cfg.profile, cfg.settings.mesh, band);
  if (output == "csv") return {events_csv({{"spectral", &spec.events}}), 0};
  ordered_json rep;
  rep["spectral"] = to_json(spec);
  rep["sturm_fd"] = to_json(fd);
  return {wrap("spectrum", cfg, std::move(rep)).dump(2) + "\n", 0};
}

Emitted run_hessian(const RunConfig& cfg, const std::string& output) {
  require_no_params(cfg, "hessian");
  const auto plan = detail::plan_endpoints(cfg.profile, cfg.settings);
  const bool degenerate = plan.nullity_at_b > 0;
  const std::size_t mesh = cfg.settings.mesh;
  const std::size_t neg =
      hessian_index_fd(cfg.profile, mesh, fd_zero_band(cfg.profile, mesh, degenerate));
  const std::size_t neg_fine = hessian_index_fd(
      cfg.profile, 2 * mesh, fd_zero_band(cfg.profile, 2 * mesh, degenerate));
  if (output == "csv") return {hessian_csv({{mesh, neg}, {2 * mesh, neg_fine}}), 0};
  ordered_json rep;
  rep["mesh"] = mesh;
  rep["negative"] = neg;
  rep["negative_fine"] = neg_fine;
  rep["degenerate_at_b"] = degenerate;
  return {wrap("hessian", cfg, std::move(rep)).dump(2) + "\n", 0};
}

Emitted run_rectangle(const RunConfig& cfg, const std::string& output) {
  require_no_params(cfg, "rectangle");
  const RectangleReport rep = rectangle_check(cfg.profile, cfg.settings);
  const int code = rep.residual == 0 ? 0 : 1;
  if (output == "csv") return {edges_csv(rep), code};
  return {wrap("rectangle", cfg, to_json(rep)).dump(2) + "\n", code};
}

Emitted run_index(const RunConfig& cfg, const std::string& output) {
  require_no_params(cfg, "index");
  const IndexReport rep = morse_report(cfg.profile, cfg.settings);
  const int code = rep.certified ? 0 : 1;
  if (output == "csv")
    return {events_csv({{"conjugate", &rep.conjugate.events},
                        {"spectral", &rep.spectral.events}}),
            code};
  return {wrap("index", cfg, to_json(rep)).dump(2) + "\n", code};
}

Emitted run_maslov_loop(const RunConfig& cfg, const std::string& output) {
  const std::size_t n = cfg.profile.n;
  const auto& params = cfg.subcommand_params;
  detail::reject_unknown_keys(params, {"s", "s_diag"}, "subcommand-params (maslov-loop)");
  if (params.contains("s") && params.contains("s_diag"))
    throw ConfigError("maslov-loop: give either 's' or 's_diag', not both");
  RealMatrix s(n, n);
  if (params.contains("s")) {
    s = detail::as_matrix(params["s"], n, "subcommand-params.s");
    if (asymmetry(s) > 1e-12 * std::max(1.0, max_abs(s)))
      throw ConfigError("subcommand-params.s must be symmetric");
  } else if (params.contains("s_diag")) {
    const auto d = detail::as_number_list(params["s_diag"], "subcommand-params.s_diag");
    if (d.size() != n)
      throw ConfigError("subcommand-params.s_diag: expected " + std::to_string(n) +
                        " entries");
    for (std::size_t i = 0; i < n; ++i) s(i, i) = d[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) s(i, i) = static_cast<double>(i + 1);
  }

  std::vector<std::size_t> planes(n);
  for (std::size_t i = 0; i < n; ++i) planes[i] = i;
  const LagrangianPath orbit =
      make_rotation(from_chart({}, s), planes, 0.0, std::numbers::pi);
  const DetectOptions opt = detail::detect_options(cfg.settings);
  const std::vector<CrossingEvent> events = detect_crossings(orbit, opt);
  double winding = 0.0;
  const int total = loop_index({orbit}, opt, &winding);

  if (output == "csv") return {phase_csv(phase_trace(orbit)), 0};
  ordered_json rep;
  rep["s"] = s.data;
  rep["path_index"] = total;
  rep["winding"] = winding;
  ordered_json evs = ordered_json::array();
  for (const auto& e : events) evs.push_back(to_json(e));
  rep["events"] = evs;
  return {wrap("maslov-loop", cfg, std::move(rep)).dump(2) + "\n", 0};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Morse index of a geodesic: crossing counts, spectra, and Hessians"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output = "json";
  std::string out_path;
  const std::vector<std::string> names = {"conjugate", "spectrum",  "hessian",
                                          "rectangle", "index",     "maslov-loop"};
  const std::vector<std::string> descriptions = {
      "conjugate points along the geodesic (time-edge crossings)",
      "negative eigenvalues: exact spectral-edge crossings plus the FD ladder",
      "negative directions of the discretized Hessian at two meshes",
      "the rectangle-loop cross-check (residual must vanish)",
      "full certified index report (all three methods plus the rectangle)",
      "rotation-loop demonstration: path index and winding cancel"};
  for (std::size_t i = 0; i < names.size(); ++i) {
    CLI::App* sub = app.add_subcommand(names[i], descriptions[i]);
    sub->add_option("--config", config_path, "JSON config path, or - for stdin")->required();
    sub->add_option("--output", output, "output format")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--out", out_path, "write the report to this file instead of stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  maslov::RunConfig cfg;
  try {
    cfg = maslov::parse_config(read_config_text(config_path));
  } catch (const maslov::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  maslov::log_info("running " + sub + " on n=" + std::to_string(cfg.profile.n) +
                   ", interval [" + std::to_string(cfg.profile.a) + ", " +
                   std::to_string(cfg.profile.b) + "]");

  try {
    Emitted result;
    if (sub == "conjugate")
      result = run_conjugate(cfg, output);
    else if (sub == "spectrum")
      result = run_spectrum(cfg, output);
    else if (sub == "hessian")
      result = run_hessian(cfg, output);
    else if (sub == "rectangle")
      result = run_rectangle(cfg, output);
    else if (sub == "index")
      result = run_index(cfg, output);
    else
      result = run_maslov_loop(cfg, output);
    write_output(out_path, result.text);
    return result.exit_code;
  } catch (const maslov::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const maslov::Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}

#pragma once

// Machine-readable report emission.  JSON carries the complete report;
// CSV is a fixed-column extraction for plotting:
//
//   events table  "edge,u_star,multiplicity,sign,slope"
//                 one row per kernel direction of each crossing
//   phase trace   "u,phase"            unwrapped det2 phase in radians
//   hessian table "mesh,negative_count"
//   edge table    "edge,index,winding,events"
//
// All numbers print with shortest-round-trip precision so identical runs
// give byte-identical files.

#include <complex>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "maslov/crossings.hpp"
#include "maslov/morse.hpp"

namespace maslov {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string csv_num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// JSON.

inline ordered_json to_json(const CrossingEvent& e) {
  ordered_json j;
  j["u_star"] = e.u_star;
  j["multiplicity"] = e.multiplicity;
  j["sign"] = e.signed_contribution;
  j["chart"] = e.chart;
  j["slopes"] = e.slope_estimates;
  j["direction_signs"] = e.direction_signs;
  return j;
}

inline ordered_json to_json(const ConjugateReport& r) {
  ordered_json j;
  j["total"] = r.total;
  j["nullity_at_b"] = r.nullity_at_b;
  j["a_prime"] = r.a_prime;
  j["b_prime"] = r.b_prime;
  ordered_json events = ordered_json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  j["events"] = events;
  return j;
}

inline ordered_json to_json(const SpectralReport& r) {
  ordered_json j;
  j["total"] = r.total;
  j["lambda0"] = r.lambda0;
  j["mu_hi"] = r.mu_hi;
  ordered_json events = ordered_json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  j["events"] = events;
  return j;
}

inline ordered_json to_json(const SturmFdReport& r) {
  ordered_json j;
  j["mesh"] = r.mesh;
  j["negative_count"] = r.negative_count;
  j["zero_band"] = r.zero_band;
  j["eigenvalues"] = r.eigenvalues;
  return j;
}

inline ordered_json to_json(const RectangleReport& r) {
  ordered_json j;
  j["residual"] = r.residual;
  j["loop_winding"] = r.loop_winding;
  ordered_json spec;
  spec["lambda0"] = r.spec.lambda0;
  spec["a_prime"] = r.spec.a_prime;
  spec["b_prime"] = r.spec.b_prime;
  spec["lambda_prime"] = r.spec.lambda_prime;
  spec["nullity_at_b"] = r.spec.nullity_at_b;
  j["spec"] = spec;
  ordered_json edges = ordered_json::array();
  for (const auto& e : r.edges) {
    ordered_json ej;
    ej["edge"] = e.name;
    ej["index"] = e.index;
    ej["winding"] = e.winding;
    ej["events"] = e.events;
    edges.push_back(ej);
  }
  j["edges"] = edges;
  return j;
}

inline ordered_json to_json(const IndexReport& r) {
  ordered_json j;
  j["n"] = r.n;
  j["interval"] = {r.a, r.b};
  j["index"] = r.index();
  j["certified"] = r.certified;
  j["notes"] = r.notes;
  j["conjugate"] = to_json(r.conjugate);
  j["spectral"] = to_json(r.spectral);
  j["sturm_fd"] = to_json(r.sturm_fd);
  ordered_json h;
  h["mesh"] = r.hessian_mesh;
  h["negative"] = r.hessian_negative;
  h["negative_fine"] = r.hessian_negative_fine;
  j["hessian"] = h;
  j["rectangle"] = to_json(r.rectangle);
  return j;
}

// ---------------------------------------------------------------------------
// CSV.

/// One row per kernel direction of each event, under a fixed header.
inline std::string events_csv(
    const std::vector<std::pair<std::string, const std::vector<CrossingEvent>*>>& groups) {
  std::string out = "edge,u_star,multiplicity,sign,slope\n";
  for (const auto& [edge, events] : groups)
    for (const auto& e : *events)
      for (std::size_t d = 0; d < e.multiplicity; ++d) {
        const double slope = d < e.slope_estimates.size() ? e.slope_estimates[d] : 0.0;
        const int sign = d < e.direction_signs.size() ? e.direction_signs[d] : 0;
        out += edge + "," + detail::csv_num(e.u_star) + "," + std::to_string(e.multiplicity) +
               "," + std::to_string(sign) + "," + detail::csv_num(slope) + "\n";
      }
  return out;
}

inline std::string phase_csv(const std::vector<std::pair<double, double>>& trace) {
  std::string out = "u,phase\n";
  for (const auto& [u, phase] : trace)
    out += detail::csv_num(u) + "," + detail::csv_num(phase) + "\n";
  return out;
}

inline std::string hessian_csv(const std::vector<std::pair<std::size_t, std::size_t>>& rows) {
  std::string out = "mesh,negative_count\n";
  for (const auto& [mesh, count] : rows)
    out += std::to_string(mesh) + "," + std::to_string(count) + "\n";
  return out;
}

inline std::string edges_csv(const RectangleReport& r) {
  std::string out = "edge,index,winding,events\n";
  for (const auto& e : r.edges)
    out += e.name + "," + std::to_string(e.index) + "," + detail::csv_num(e.winding) + "," +
           std::to_string(e.events) + "\n";
  return out;
}

/// Cumulative unwrapped det2 phase sampled uniformly; for plot output, not
/// certification (the winding routines own the adaptive machinery).
inline std::vector<std::pair<double, double>> phase_trace(const LagrangianPath& path,
                                                          std::size_t samples = 512) {
  if (samples < 2) throw InvalidInput("phase_trace: need at least 2 samples");
  std::vector<double> us(samples + 1);
  for (std::size_t k = 0; k <= samples; ++k)
    us[k] = path.u0() +
            (path.u1() - path.u0()) * static_cast<double>(k) / static_cast<double>(samples);
  us.back() = path.u1();
  path.prefill(us);
  std::vector<std::pair<double, double>> out;
  out.reserve(us.size());
  double phase = 0.0;
  std::complex<double> prev = path.det2_at(us[0]);
  out.emplace_back(us[0], 0.0);
  for (std::size_t k = 1; k < us.size(); ++k) {
    const std::complex<double> cur = path.det2_at(us[k]);
    phase += std::arg(cur * std::conj(prev));
    prev = cur;
    out.emplace_back(us[k], phase);
  }
  return out;
}

}  // namespace maslov

#pragma once

// Paths in the space of Lagrangian subspaces, winding of the squared
// determinant, and certified detection of crossings with the train of the
// vertical subspace sigma: locations, multiplicities, chart slopes and
// signs.  The sign convention is Morse-facing: a chart eigenvalue of S_1
// falling through zero counts +1, so time-edges of the Jacobi flow (whose
// crossing slopes are <= -1) accumulate positive index.  The squared
// determinant winds the opposite way: for every closed loop,
// sum of path indices + winding = 0.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "maslov/errors.hpp"
#include "maslov/jacobi_flow.hpp"
#include "maslov/lagrangian.hpp"
#include "maslov/log.hpp"
#include "maslov/numkernel.hpp"
#include "maslov/parallel.hpp"

namespace maslov {

// ---------------------------------------------------------------------------
// Paths.

/// A continuous curve of Lagrangian subspaces u in [u0, u1] -> frame.
/// Frames and squared determinants are cached per exact parameter value, so
/// detection and winding share samples.  Copies share the cache.
class LagrangianPath {
 public:
  enum class Kind { TimeEdge, LambdaEdge, ChartLine, Rotation, Constant };

  using Sampler = std::function<LagrangianFrame(double)>;

  LagrangianPath(Kind kind, double u0, double u1, bool parallel_safe, Sampler sampler,
                 std::string label)
      : kind_(kind),
        u0_(u0),
        u1_(u1),
        parallel_safe_(parallel_safe),
        sampler_(std::move(sampler)),
        label_(std::move(label)),
        cache_(std::make_shared<Cache>()) {
    if (!(u0_ < u1_)) throw InvalidInput("LagrangianPath: requires u0 < u1");
  }

  Kind kind() const { return kind_; }
  double u0() const { return u0_; }
  double u1() const { return u1_; }
  double length() const { return u1_ - u0_; }
  const std::string& label() const { return label_; }
  bool parallel_safe() const { return parallel_safe_; }

  /// Sign of d(phase)/du when the det2 phase is known a priori to be
  /// monotone along the path (0 = no such certificate).  Spectral edges have
  /// one: at fixed t every eigen-angle of the graph operator decreases in
  /// lambda, so the phase moves one way and a measured step against it can
  /// only be a wrapped hidden turn.
  int phase_monotone() const { return phase_monotone_; }
  void set_phase_monotone(int sign) { phase_monotone_ = sign; }

  LagrangianFrame at(double u) const {
    if (u < u0_ - 1e-12 * scale() || u > u1_ + 1e-12 * scale())
      throw InvalidInput("path sampled outside [u0, u1]: " + label_);
    u = std::clamp(u, u0_, u1_);
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      auto it = cache_->frames.find(u);
      if (it != cache_->frames.end()) return it->second;
    }
    LagrangianFrame f = sampler_(u);
    std::lock_guard<std::mutex> lock(cache_->mu);
    return cache_->frames.emplace(u, std::move(f)).first->second;
  }

  std::complex<double> det2_at(double u) const {
    u = std::clamp(u, u0_, u1_);
    {
      std::lock_guard<std::mutex> lock(cache_->mu);
      auto it = cache_->d2.find(u);
      if (it != cache_->d2.end()) return it->second;
    }
    const std::complex<double> v = det2(at(u)).value;
    std::lock_guard<std::mutex> lock(cache_->mu);
    return cache_->d2.emplace(u, v).first->second;
  }

  /// Warm the cache.  Parallel-safe samplers (pure, no shared integration
  /// state) are evaluated concurrently; others sequentially in ascending
  /// order, which is the cheap direction for checkpointed time edges.
  void prefill(const std::vector<double>& us) const {
    if (parallel_safe_) {
      parallel_for(us.size(), [&](std::size_t i) { (void)at(us[i]); });
    } else {
      std::vector<double> sorted = us;
      std::sort(sorted.begin(), sorted.end());
      for (double u : sorted) (void)at(u);
    }
  }

  /// Same geometric curve traversed backwards; shares the underlying
  /// sampler (and any integration state inside it) but not the cache, since
  /// parameters re-map as u -> u0 + u1 - u.
  LagrangianPath reversed() const {
    const double lo = u0_, hi = u1_;
    Sampler inner = sampler_;
    LagrangianPath out(
        kind_, lo, hi, parallel_safe_,
        [inner, lo, hi](double u) { return inner(lo + hi - u); }, label_ + " (reversed)");
    out.phase_monotone_ = -phase_monotone_;
    return out;
  }

 private:
  double scale() const { return std::max({1.0, std::abs(u0_), std::abs(u1_)}); }

  struct Cache {
    std::mutex mu;
    std::map<double, LagrangianFrame> frames;
    std::map<double, std::complex<double>> d2;
  };

  Kind kind_;
  double u0_, u1_;
  bool parallel_safe_;
  int phase_monotone_ = 0;
  Sampler sampler_;
  std::string label_;
  std::shared_ptr<Cache> cache_;
};

// ---------------------------------------------------------------------------
// Path factories.

namespace detail {

/// Serial checkpoint chain for time edges: states pinned every
/// renormalize_every schedule nodes, grown on demand, so arbitrary-order
/// queries cost at most one chunk of re-integration.
struct TimeEdgeChain {
  std::shared_ptr<const FlowEngine> engine;
  double lambda = 0.0;
  std::mutex mu;
  std::vector<FrameState> chunks;  // chunks[i] sits at node i * chunk_nodes
  std::size_t chunk_nodes = 64;

  LagrangianFrame frame(double t) {
    std::lock_guard<std::mutex> lock(mu);
    const auto& sched = engine->schedule();
    const std::size_t node = sched.node_at_or_before(t);
    const std::size_t chunk = node / chunk_nodes;
    if (chunks.empty()) chunks.push_back(engine->start_state());
    while (chunks.size() <= chunk) {
      FrameState next = chunks.back();
      engine->advance_state(next, chunks.size() * chunk_nodes, lambda);
      chunks.push_back(std::move(next));
    }
    FrameState probe = chunks[chunk];
    engine->advance_state(probe, node, lambda);
    return engine->frame_from_state(probe, t, lambda);
  }
};

}  // namespace detail

/// t in [t0, t1] -> sigma_lambda(t) at fixed lambda: the Jacobi flow edge.
inline LagrangianPath make_t_edge(std::shared_ptr<const FlowEngine> engine, double lambda,
                                  double t0, double t1) {
  auto chain = std::make_shared<detail::TimeEdgeChain>();
  chain->engine = engine;
  chain->lambda = lambda;
  chain->chunk_nodes = std::max<std::size_t>(1, engine->settings().renormalize_every);
  auto sampler = [chain](double t) { return chain->frame(t); };
  const std::string label = "t-edge at lambda=" + std::to_string(lambda);
  if (t0 < t1)
    return LagrangianPath(LagrangianPath::Kind::TimeEdge, t0, t1, /*parallel_safe=*/false,
                          sampler, label);
  return LagrangianPath(LagrangianPath::Kind::TimeEdge, t1, t0, /*parallel_safe=*/false,
                        sampler, label)
      .reversed();
}

/// mu in [mu0, mu1] -> sigma_mu(t_fixed): the spectral-parameter edge.  Each
/// sample is an independent full integration, safe to evaluate in parallel.
inline LagrangianPath make_lambda_edge(std::shared_ptr<const FlowEngine> engine, double t_fixed,
                                       double mu0, double mu1) {
  auto sampler = [engine, t_fixed](double mu) { return engine->sigma_at(mu, t_fixed); };
  const std::string label = "lambda-edge at t=" + std::to_string(t_fixed);
  LagrangianPath path =
      mu0 < mu1
          ? LagrangianPath(LagrangianPath::Kind::LambdaEdge, mu0, mu1, true, sampler, label)
          : LagrangianPath(LagrangianPath::Kind::LambdaEdge, mu1, mu0, true, sampler, label)
                .reversed();
  // d(phase)/d(lambda) < 0 everywhere (the graph operator's lambda
  // derivative is negative definite), so the phase is monotone along the
  // traversal direction.
  path.set_phase_monotone(mu1 < mu0 ? +1 : -1);
  return path;
}

/// Straight segment between two graph-chart matrices.  Every symmetric S is
/// transversal to sigma, so such a path never meets the train: the safe way
/// to route corner arcs.
inline LagrangianPath make_chart_line(const RealMatrix& s_from, const RealMatrix& s_to) {
  if (!s_from.square() || s_from.rows != s_to.rows || !s_to.square())
    throw InvalidInput("make_chart_line: shape mismatch");
  RealMatrix a = symmetrized(s_from), b = symmetrized(s_to);
  return LagrangianPath(
      LagrangianPath::Kind::ChartLine, 0.0, 1.0, true,
      [a, b](double w) { return from_chart({}, (1.0 - w) * a + w * b); }, "chart line");
}

/// theta in [th0, th1] -> rotation of a base frame in the planes K.
inline LagrangianPath make_rotation(const LagrangianFrame& base,
                                    const std::vector<std::size_t>& K, double th0, double th1) {
  LagrangianFrame copy = base;
  std::vector<std::size_t> planes = K;
  auto sampler = [copy, planes](double th) { return rotate(copy, planes, th); };
  if (th0 < th1)
    return LagrangianPath(LagrangianPath::Kind::Rotation, th0, th1, true, sampler, "rotation");
  return LagrangianPath(LagrangianPath::Kind::Rotation, th1, th0, true, sampler, "rotation")
      .reversed();
}

inline LagrangianPath make_constant(const LagrangianFrame& frame, double u0 = 0.0,
                                    double u1 = 1.0) {
  LagrangianFrame copy = frame;
  return LagrangianPath(
      LagrangianPath::Kind::Constant, u0, u1, true, [copy](double) { return copy; },
      "constant");
}

// ---------------------------------------------------------------------------
// Winding of the squared determinant.

struct WindingAccumulator {
  double total_phase = 0.0;  // unwrapped radians
  std::size_t samples = 0;
  double max_step_phase = 0.0;
};

/// Unwrapped phase of det2 along the path, in turns (total phase / 2 pi).
/// Steps whose phase increment approaches pi/2 are bisected recursively (up
/// to 26 levels) so no winding can hide between samples.
///
/// Two refinements de-alias near-singular phase velocity (a full turn packed
/// into one cell wraps to ~0, which no step-size test can see):
///  - `anchors` forces sample nodes at known crossing parameters, splitting
///    such a turn into two ~pi steps that the threshold does catch; pass the
///    detected events whenever they are available.
///  - On paths with a monotonicity certificate, a step against the certified
///    direction is treated as a wrapped turn and bisected.
inline double winding_det2(const LagrangianPath& path, std::size_t initial_samples = 256,
                           WindingAccumulator* acc_out = nullptr,
                           const std::vector<double>& anchors = {}) {
  if (initial_samples < 2) throw InvalidInput("winding_det2: need at least 2 samples");
  const double u0 = path.u0(), u1 = path.u1();
  std::vector<double> us(initial_samples + 1);
  for (std::size_t k = 0; k <= initial_samples; ++k)
    us[k] = u0 + (u1 - u0) * static_cast<double>(k) / static_cast<double>(initial_samples);
  us.back() = u1;
  for (double a : anchors)
    if (a > u0 && a < u1) us.push_back(a);
  std::sort(us.begin(), us.end());
  us.erase(std::unique(us.begin(), us.end(),
                       [&](double x, double y) { return y - x < 1e-12 * (u1 - u0); }),
           us.end());
  path.prefill(us);

  WindingAccumulator acc;
  struct Seg {
    double ua, ub;
    std::complex<double> za, zb;
    int depth;
  };
  std::vector<Seg> stack;
  for (std::size_t k = us.size() - 1; k-- > 0;)
    stack.push_back({us[k], us[k + 1], path.det2_at(us[k]), path.det2_at(us[k + 1]), 0});

  const int mono = path.phase_monotone();
  constexpr int kMaxDepth = 26;
  while (!stack.empty()) {
    const Seg seg = stack.back();
    stack.pop_back();
    const double delta = std::arg(seg.zb * std::conj(seg.za));
    // Split strictly below pi/2: a true step of 3pi/2 wraps to exactly
    // -pi/2, and the margin forces the extra level that unmasks it.
    const bool too_big = std::abs(delta) > std::numbers::pi / 2.0 - 0.05;
    // Far above roundoff (~1e-13), far below any genuine wrapped step.
    const bool wrong_way = mono != 0 && mono * delta < -1e-6;
    if ((too_big || wrong_way) && seg.depth < kMaxDepth) {
      const double um = 0.5 * (seg.ua + seg.ub);
      const std::complex<double> zm = path.det2_at(um);
      stack.push_back({um, seg.ub, zm, seg.zb, seg.depth + 1});
      stack.push_back({seg.ua, um, seg.za, zm, seg.depth + 1});
      continue;
    }
    if (too_big)
      throw NumericalFailure("winding_det2: phase too wild near u = " +
                             std::to_string(0.5 * (seg.ua + seg.ub)));
    acc.total_phase += delta;
    acc.samples += 1;
    acc.max_step_phase = std::max(acc.max_step_phase, std::abs(delta));
  }
  if (acc_out) *acc_out = acc;
  return acc.total_phase / (2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Crossing detection.

struct CrossingEvent {
  double u_star = 0.0;
  std::size_t multiplicity = 0;
  int signed_contribution = 0;          // sum over kernel directions of -sign(slope)
  std::vector<std::size_t> chart;       // chart index set K used for certification
  std::vector<double> slope_estimates;  // d/du of each crossing eigenvalue of S_1
  std::vector<int> direction_signs;     // -sign(slope) per kernel direction
};

struct DetectOptions {
  std::size_t coarse_grid = 512;
  double tol = 1e-8;       // dips are certified below sqrt(tol)
  double rank_tol = 1e-8;  // kernel count of S_1 at the localized crossing
};

namespace detail {

inline double smallest_vertical_gap(const LagrangianFrame& f) {
  return vertical_gap_singular_values(f).front();
}

inline int q_det_sign(const LagrangianFrame& f) {
  return det_sign(orthonormalized(f).q_block());
}

/// Golden-section minimization of a unimodal-ish scalar; returns (u, f(u)).
template <typename F>
std::pair<double, double> golden_minimize(F&& f, double a, double b, int iters) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < iters; ++i) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? std::make_pair(x1, f1) : std::make_pair(x2, f2);
}

/// Signed eigenvalue of smallest magnitude.
inline double smallest_signed_eig(const std::vector<double>& eigs) {
  double best = eigs.front();
  for (double e : eigs)
    if (std::abs(e) < std::abs(best)) best = e;
  return best;
}

/// Illinois variant of regula falsi on a bracketed sign change.
template <typename F>
double illinois_root(F&& f, double a, double b, double fa, double fb, int iters) {
  double side = 0.0;
  for (int i = 0; i < iters; ++i) {
    const double m = (a * fb - b * fa) / (fb - fa);
    const double fm = f(m);
    if (fm == 0.0 || std::abs(b - a) < 1e-15 * std::max(1.0, std::abs(a) + std::abs(b)))
      return m;
    if ((fm > 0.0) == (fb > 0.0)) {
      b = m;
      fb = fm;
      if (side == -1.0) fa *= 0.5;
      side = -1.0;
    } else {
      a = m;
      fa = fm;
      if (side == 1.0) fb *= 0.5;
      side = 1.0;
    }
  }
  return 0.5 * (a + b);
}

struct ChartScalar {
  const LagrangianPath* path;
  std::vector<std::size_t> K;

  RealMatrix s1_at(double u) const {
    const ChartCoords c = to_chart(path->at(u), K);
    return submatrix(c.S, K, K);
  }
  std::vector<double> eigs_at(double u) const { return sym_eig(s1_at(u)).eigenvalues; }
  double signed_min_at(double u) const { return smallest_signed_eig(eigs_at(u)); }
};

/// Certify one dip as a crossing: pick a chart sized to the near-kernel
/// cluster (growing it if the chart degenerates), polish u_star by a root
/// find on the smallest S_1 eigenvalue, then read multiplicity, slopes and
/// signs at the polished point.
inline std::optional<CrossingEvent> localize_crossing(const LagrangianPath& path, double u_guess,
                                                      double s_best, double h_grid,
                                                      const DetectOptions& opt) {
  const LagrangianFrame frame_g = path.at(u_guess);
  const std::size_t n = frame_g.n;
  const auto sv = vertical_gap_singular_values(frame_g);
  std::size_t cdim = 0;
  const double cluster_tol = std::max(1e-3, 10.0 * s_best);
  for (double s : sv)
    if (s <= cluster_tol) ++cdim;
  cdim = std::max<std::size_t>(cdim, 1);

  for (; cdim <= n; ++cdim) {
    try {
      ChartScalar chart{&path, chart_for_cluster(frame_g, cdim)};

      // Polish by a sign-change root find when one is visible nearby.
      double u_star = u_guess;
      bool polished = false;
      for (double w : {0.5 * h_grid, h_grid / 16.0, 1e-4 * h_grid}) {
        const double ua = std::max(path.u0(), u_guess - w);
        const double ub = std::min(path.u1(), u_guess + w);
        if (!(ua < ub)) continue;
        const double ga = chart.signed_min_at(ua);
        const double gb = chart.signed_min_at(ub);
        if (ga == 0.0) {
          u_star = ua;
          polished = true;
          break;
        }
        if (gb == 0.0) {
          u_star = ub;
          polished = true;
          break;
        }
        if ((ga > 0.0) != (gb > 0.0)) {
          u_star = illinois_root([&](double u) { return chart.signed_min_at(u); }, ua, ub, ga,
                                 gb, 80);
          polished = true;
          break;
        }
      }
      if (!polished)
        log_debug("no sign change near u=" + std::to_string(u_guess) +
                                "; keeping the scan minimum");

      // Multiplicity: kernel count of S_1 at the polished parameter.
      const RealMatrix s1 = chart.s1_at(u_star);
      const RealMatrix s_full = to_chart(path.at(u_star), chart.K).S;
      const double eig_tol = opt.rank_tol * std::max(1.0, max_abs(s_full));
      const auto eigs = sym_eig(s1).eigenvalues;
      std::size_t mult = 0;
      for (double e : eigs)
        if (std::abs(e) <= eig_tol) ++mult;
      if (mult == 0) {
        log_debug("dip at u=" + std::to_string(u_star) +
                                " did not certify a kernel; dropping");
        return std::nullopt;
      }

      // Slopes by central differences on the crossing branches.  With all
      // slopes of one sign, ascending order at +delta pairs with descending
      // order at -delta.
      const double delta =
          std::min(h_grid / 8.0, std::max(1e-5 * path.length(), 1e-9));
      const double up = std::min(path.u1(), u_star + delta);
      const double dn = std::max(path.u0(), u_star - delta);
      auto crossing_branches = [&](double u) {
        std::vector<double> all = chart.eigs_at(u);
        std::sort(all.begin(), all.end(),
                  [](double x, double y) { return std::abs(x) < std::abs(y); });
        std::vector<double> out(all.begin(), all.begin() + static_cast<long>(mult));
        std::sort(out.begin(), out.end());
        return out;
      };
      const std::vector<double> ep = crossing_branches(up);
      std::vector<double> em = crossing_branches(dn);
      std::reverse(em.begin(), em.end());
      CrossingEvent ev;
      ev.u_star = u_star;
      ev.multiplicity = mult;
      ev.chart = chart.K;
      for (std::size_t i = 0; i < mult; ++i) {
        const double slope = (ep[i] - em[i]) / (up - dn);
        ev.slope_estimates.push_back(slope);
        const int sign = slope < 0.0 ? 1 : (slope > 0.0 ? -1 : 0);
        ev.direction_signs.push_back(sign);
        ev.signed_contribution += sign;
      }
      return ev;
    } catch (const ChartDomain&) {
      log_debug("chart of size " + std::to_string(cdim) + " degenerated; growing");
    } catch (const NumericalFailure&) {
      log_debug("chart of size " + std::to_string(cdim) + " unstable; growing");
    }
  }
  throw NumericalFailure("no stable chart certifies the crossing near u = " +
                         std::to_string(u_guess));
}

}  // namespace detail

/// Scan, bracket, refine and certify all crossings of the path with the
/// train of sigma.  Candidates come from local minima of the smallest
/// vertical-gap singular value, steep V-shaped cells that could hide a dip
/// between nodes, and sign changes of the q-block determinant (the frames
/// evolve by positive-determinant basis changes, so the sign is a continuous
/// invariant along the path).  A candidate becomes an event only if the
/// refined dip falls below sqrt(tol) and S_1 has a nontrivial kernel there.
inline std::vector<CrossingEvent> detect_crossings(const LagrangianPath& path,
                                                   const DetectOptions& opt = {}) {
  const std::size_t N = std::max<std::size_t>(opt.coarse_grid, 8);
  const double u0 = path.u0(), u1 = path.u1(), len = path.length();
  const double h = len / static_cast<double>(N);
  const double dip = std::sqrt(opt.tol);

  std::vector<double> us(N + 1);
  for (std::size_t k = 0; k <= N; ++k)
    us[k] = u0 + len * static_cast<double>(k) / static_cast<double>(N);
  us.back() = u1;
  path.prefill(us);

  std::vector<double> s(N + 1);
  std::vector<int> dsign(N + 1);
  for (std::size_t k = 0; k <= N; ++k) {
    const LagrangianFrame f = path.at(us[k]);
    s[k] = detail::smallest_vertical_gap(f);
    dsign[k] = detail::q_det_sign(f);
  }
  if (s.front() <= dip)
    throw EndpointDegenerate("path starts on the train (u0 = " + std::to_string(u0) + ")");
  if (s.back() <= dip)
    throw EndpointDegenerate("path ends on the train (u1 = " + std::to_string(u1) + ")");

  std::vector<bool> cand(N, false);
  for (std::size_t k = 1; k < N; ++k)
    if (s[k] < 0.5 && s[k] <= s[k - 1] && s[k] <= s[k + 1]) {
      cand[k - 1] = true;
      cand[k] = true;
    }
  for (std::size_t k = 0; k < N; ++k) {
    if (dsign[k] == 0 || dsign[k + 1] == 0 || dsign[k] != dsign[k + 1]) cand[k] = true;
    const double dk = std::abs(s[k + 1] - s[k]);
    double dmax = dk;
    if (k > 0) dmax = std::max(dmax, std::abs(s[k] - s[k - 1]));
    if (k + 2 <= N) dmax = std::max(dmax, std::abs(s[k + 2] - s[k + 1]));
    if (std::min(s[k], s[k + 1]) < 0.5 && std::min(s[k], s[k + 1]) <= 1.2 * dmax)
      cand[k] = true;
  }

  // Merge runs of candidate cells into brackets.
  std::vector<std::pair<double, double>> brackets;
  for (std::size_t k = 0; k < N;) {
    if (!cand[k]) {
      ++k;
      continue;
    }
    std::size_t j = k;
    while (j < N && cand[j]) ++j;
    brackets.emplace_back(us[k], us[j]);
    k = j;
  }

  std::vector<CrossingEvent> events;
  auto gap_at = [&](double u) { return detail::smallest_vertical_gap(path.at(u)); };
  for (const auto& [lo, hi] : brackets) {
    const auto [u_min, s_min] = detail::golden_minimize(gap_at, lo, hi, 70);
    if (s_min >= dip) continue;
    if (u_min - u0 < 0.5 * h || u1 - u_min < 0.5 * h)
      throw EndpointDegenerate("crossing at u = " + std::to_string(u_min) +
                               " sits on a path endpoint");
    auto ev = detail::localize_crossing(path, u_min, s_min, h, opt);
    if (!ev) continue;
    bool duplicate = false;
    for (const auto& e : events)
      if (std::abs(e.u_star - ev->u_star) < 1e-7 * std::max(1.0, len)) duplicate = true;
    if (!duplicate) events.push_back(std::move(*ev));
  }

  std::sort(events.begin(), events.end(),
            [](const CrossingEvent& a, const CrossingEvent& b) { return a.u_star < b.u_star; });
  for (std::size_t i = 0; i + 1 < events.size(); ++i)
    if (events[i + 1].u_star - events[i].u_star < h)
      throw NumericalFailure("crossings at u = " + std::to_string(events[i].u_star) + " and " +
                             std::to_string(events[i + 1].u_star) +
                             " are not isolated at the scan resolution");
  return events;
}

/// True iff every crossing slope obeys the time-edge transversality bound
/// slope <= -1 + slack.  Rotation-type paths (slopes >= +1) fail by design.
inline bool crossing_slope_check(const CrossingEvent& event, double slack = 0.1) {
  for (double slope : event.slope_estimates)
    if (!(slope <= -1.0 + slack)) return false;
  return true;
}

/// Sum of signed contributions over all crossings.
inline int path_index(const LagrangianPath& path, const DetectOptions& opt = {}) {
  int total = 0;
  for (const auto& ev : detect_crossings(path, opt)) total += ev.signed_contribution;
  return total;
}

// ---------------------------------------------------------------------------
// Loops.

/// Index of a closed chain of paths: consecutive endpoints (and the wrap
/// from last to first) must span the same subspace within gap 1e-6.  The
/// winding of det2 over the whole loop is computed as a cross-check: with
/// the Morse-facing crossing signs, sum of path indices + winding = 0 on
/// every closed loop, and the winding itself must be near an integer.
inline int loop_index(const std::vector<LagrangianPath>& edges, const DetectOptions& opt = {},
                      double* winding_out = nullptr) {
  if (edges.empty()) throw InvalidLoop("loop_index: no edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const LagrangianPath& cur = edges[i];
    const LagrangianPath& nxt = edges[(i + 1) % edges.size()];
    const double gap = subspace_gap(cur.at(cur.u1()), nxt.at(nxt.u0()));
    if (!(gap < 1e-6))
      throw InvalidLoop("loop edges " + std::to_string(i) + " -> " +
                        std::to_string((i + 1) % edges.size()) + " do not meet (gap " +
                        std::to_string(gap) + ")");
  }
  int total = 0;
  double winding = 0.0;
  for (const auto& e : edges) {
    const std::vector<CrossingEvent> events = detect_crossings(e, opt);
    std::vector<double> anchors;
    anchors.reserve(events.size());
    for (const auto& ev : events) {
      total += ev.signed_contribution;
      anchors.push_back(ev.u_star);
    }
    winding += winding_det2(e, 256, nullptr, anchors);
  }
  if (winding_out) *winding_out = winding;
  const double nearest = std::round(winding);
  if (std::abs(winding - nearest) > 0.25)
    throw NumericalFailure("loop winding " + std::to_string(winding) +
                           " is not close to an integer");
  if (static_cast<int>(nearest) + total != 0)
    throw NumericalFailure("loop certification failed: winding " + std::to_string(nearest) +
                           " vs path index sum " + std::to_string(total));
  return total;
}

}  // namespace maslov

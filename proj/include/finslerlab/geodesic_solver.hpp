#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "finslerlab/discrete_loop.hpp"
#include "finslerlab/error.hpp"
#include "finslerlab/finsler_metric.hpp"

namespace finslerlab
{
struct SolverConfig
{
  int n = 128;
  int max_iters = 5000;
  // Backtracking line search.
  double initial_step = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  double grad_tol = 1e-9;
  int num_starts = 50;
  double cluster_tol = 0.05;
  double length_tol = 1e-3;  // relative to the best length
  double jitter = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency

  void validate() const
  {
    if (n < 32)
      throw DomainError("SolverConfig: N must be >= 32");
    if (!(grad_tol > 0.0))
      throw DomainError("SolverConfig: grad_tol must be > 0");
    if (!(cluster_tol > 0.0))
      throw DomainError("SolverConfig: cluster_tol must be > 0");
    if (num_starts < 1)
      throw DomainError("SolverConfig: num_starts must be >= 1");
    if (max_iters < 1)
      throw DomainError("SolverConfig: max_iters must be >= 1");
    if (!(shrink > 0.0 && shrink < 1.0) || !(initial_step > 0.0) || !(armijo > 0.0 && armijo < 1.0))
      throw DomainError("SolverConfig: invalid line-search parameters");
  }
};

/// min over the class of the reference length: the straight loop on the flat torus.
inline double min_reference_length(Winding w)
{
  require_nontrivial(w);
  return std::hypot(double(w.p), double(w.q));
}

/// C0(F, gamma) = c_F^2 * min_gamma l_g.
inline double speed_bound(const FinslerMetric& metric, Winding w,
                          const ReferenceMetric& reference = {}, int grid_resolution = 32)
{
  const double c = comparison_constant(metric, reference, grid_resolution);
  return c * c * min_reference_length(w);
}

/// A_F and its gradient with respect to the free vertices x_0..x_{N-1}.
inline double action_gradient(const FinslerMetric& metric, const DiscreteLoop& loop,
                              std::vector<Vec2>& grad)
{
  const int n = loop.size();
  grad.assign(static_cast<size_t>(n), Vec2{});
  double a = 0.0;
  for (int i = 0; i < n; ++i)
  {
    const MetricJet j = metric.jet(loop.midpoint(i), loop.segment(i) * double(n));
    a += j.value * j.value;
    const Vec2 from_point = j.d_point * (j.value / n);
    const Vec2 from_velocity = j.d_velocity * (2.0 * j.value);
    grad[i] += from_point - from_velocity;
    grad[(i + 1) % n] += from_point + from_velocity;
  }
  return a / n;
}

inline double max_norm(const std::vector<Vec2>& g)
{
  double m = 0.0;
  for (const auto& v : g)
  {
    m = std::max({m, std::abs(v.x), std::abs(v.y)});
  }
  return m;
}

namespace detail
{
/// Solves the circulant system (diag * I - off * (S + S^T)) x = r, where S is
/// the cyclic shift, by Sherman-Morrison on a tridiagonal solve.
inline std::vector<double> solve_cyclic_tridiagonal(double diag, double off,
                                                    const std::vector<double>& r)
{
  const size_t n = r.size();
  const double a = -off, c = -off;  // sub- and super-diagonal
  const double alpha = -off, beta = -off;  // corners A[n-1][0], A[0][n-1]
  const double gamma = -diag;
  std::vector<double> b(n, diag);
  b[0] = diag - gamma;
  b[n - 1] = diag - alpha * beta / gamma;

  auto tridiag = [&](const std::vector<double>& rhs) {
    std::vector<double> cp(n), x(n);
    double denom = b[0];
    x[0] = rhs[0] / denom;
    for (size_t i = 1; i < n; ++i)
    {
      cp[i] = c / denom;
      denom = b[i] - a * cp[i];
      x[i] = (rhs[i] - a * x[i - 1]) / denom;
    }
    for (size_t i = n - 1; i-- > 0;)
    {
      x[i] -= cp[i + 1] * x[i + 1];
    }
    return x;
  };
  std::vector<double> x = tridiag(r);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  const std::vector<double> z = tridiag(u);
  const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
  for (size_t i = 0; i < n; ++i)
  {
    x[i] -= fact * z[i];
  }
  return x;
}

/// Applies the inverse of the H^1-type preconditioner 2N L + I/N (L the cyclic
/// graph Laplacian) to each coordinate of the gradient.
inline std::vector<Vec2> precondition(const std::vector<Vec2>& g)
{
  const size_t n = g.size();
  const double nn = double(n);
  std::vector<double> gx(n), gy(n);
  for (size_t i = 0; i < n; ++i)
  {
    gx[i] = g[i].x;
    gy[i] = g[i].y;
  }
  const double off = 2.0 * nn;
  const double diag = 2.0 * off + 1.0 / nn;
  const auto dx = solve_cyclic_tridiagonal(diag, off, gx);
  const auto dy = solve_cyclic_tridiagonal(diag, off, gy);
  std::vector<Vec2> d(n);
  for (size_t i = 0; i < n; ++i)
  {
    d[i] = {dx[i], dy[i]};
  }
  return d;
}
}  // namespace detail

struct DescentResult
{
  DiscreteLoop loop;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double initial_action = 0.0;
  double final_action = 0.0;
  /// Action after every accepted step, starting with the initial action.
  std::vector<double> action_trace;
};

namespace detail
{
inline DescentResult descend(const FinslerMetric& metric, DiscreteLoop loop,
                             const SolverConfig& config, int max_iters)
{
  const int n = loop.size();
  std::vector<Vec2> grad;
  double a = action_gradient(metric, loop, grad);
  DescentResult res{loop, false, 0, max_norm(grad), a, a, {a}};
  double step = config.initial_step;
  std::vector<Vec2> trial(static_cast<size_t>(n));
  std::vector<Vec2> cand_grad;
  for (int it = 0; it < max_iters; ++it)
  {
    res.gradient_norm = max_norm(grad);
    if (res.gradient_norm <= config.grad_tol)
    {
      res.converged = true;
      break;
    }
    const std::vector<Vec2> d = precondition(grad);
    double slope = 0.0;
    for (int i = 0; i < n; ++i)
    {
      slope += dot(grad[i], d[i]);
    }
    step = std::min(config.initial_step, step / config.shrink);
    bool accepted = false;
    bool gradient_ready = false;
    double a_new = a;
    for (int ls = 0; ls < 60; ++ls)
    {
      for (int i = 0; i < n; ++i)
      {
        trial[i] = loop.vertex(i) - d[i] * step;
      }
      DiscreteLoop cand(trial, loop.winding());
      a_new = action(metric, cand);
      if (a_new <= a - config.armijo * step * slope)
      {
        loop = std::move(cand);
        accepted = true;
        break;
      }
      // Near a minimizer the predicted decrease drops below the rounding
      // level of the action. There, accept a step that keeps the action
      // within that level and reduces the gradient.
      if (a_new <= a + 1e-14 * std::abs(a))
      {
        const double a_cand = action_gradient(metric, cand, cand_grad);
        if (max_norm(cand_grad) < res.gradient_norm)
        {
          loop = std::move(cand);
          grad.swap(cand_grad);
          a = a_cand;
          accepted = true;
          gradient_ready = true;
          break;
        }
      }
      step *= config.shrink;
    }
    res.iterations = it + 1;
    if (!accepted)
    {
      // No decrease is representable any more: stationary to rounding.
      break;
    }
    if (!gradient_ready)
    {
      a = action_gradient(metric, loop, grad);
    }
    res.action_trace.push_back(a);
  }
  res.gradient_norm = max_norm(grad);
  res.converged = res.converged || res.gradient_norm <= config.grad_tol;
  res.loop = loop;
  res.final_action = a;
  return res;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream)
{
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::uint64_t out[1];
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  out[0] = (std::uint64_t(words[0]) << 32) | words[1];
  return out[0];
}
}  // namespace detail

/// Straight lift through `origin` plus seeded per-vertex jitter of the given amplitude.
inline DiscreteLoop jittered_straight_loop(Winding w, int n, Vec2 origin, double jitter,
                                           std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-jitter, jitter);
  auto v = DiscreteLoop::straight(w, n, origin).vertices();
  if (jitter > 0.0)
  {
    for (auto& x : v)
    {
      x += Vec2{u(rng), u(rng)};
    }
  }
  return DiscreteLoop(std::move(v), w);
}

/// Shortest loop in the class `w` by preconditioned gradient descent on the
/// discrete action, with Armijo backtracking. The descent iterate is then
/// resampled to constant F-speed and polished by a second descent. A result
/// that misses grad_tol within max_iters is returned flagged non-converged.
inline DescentResult shortest_loop(const FinslerMetric& metric, Winding w,
                                   const SolverConfig& config,
                                   std::optional<DiscreteLoop> init = std::nullopt)
{
  config.validate();
  require_nontrivial(w);
  DiscreteLoop start =
      init ? *init : jittered_straight_loop(w, config.n, {}, config.jitter, config.seed);
  if (!(start.winding() == w))
  {
    throw MalformedLoopError("initial loop is not in the requested class");
  }
  DescentResult first = detail::descend(metric, start, config, config.max_iters);
  const int remaining = std::max(1, config.max_iters - first.iterations);
  DiscreteLoop resampled = reparametrize_constant_speed(metric, first.loop);
  if (action(metric, resampled) > first.final_action)
  {
    resampled = first.loop;
  }
  DescentResult polished = detail::descend(metric, resampled, config, remaining);

  DescentResult out = std::move(polished);
  out.iterations += first.iterations;
  out.initial_action = first.initial_action;
  std::vector<double> trace = std::move(first.action_trace);
  trace.insert(trace.end(), out.action_trace.begin(), out.action_trace.end());
  out.action_trace = std::move(trace);
  return out;
}

/// Distance from p to the segment [a, b] on the torus; short segments use the
/// nearest lattice translate of p only.
inline double torus_point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b)
{
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  auto planar = [&](const Vec2& q) {
    const Vec2 aq = q - a;
    const double t = len2 > 0.0 ? std::clamp(dot(aq, ab) / len2, 0.0, 1.0) : 0.0;
    return norm(aq - ab * t);
  };
  const Vec2 rel = p - a;
  const Vec2 near{a.x + rel.x - std::round(rel.x), a.y + rel.y - std::round(rel.y)};
  if (len2 < 0.0625)
  {
    return planar(near);
  }
  double best = std::numeric_limits<double>::infinity();
  for (int i = -1; i <= 1; ++i)
  {
    for (int k = -1; k <= 1; ++k)
    {
      best = std::min(best, planar(near + Vec2{double(i), double(k)}));
    }
  }
  return best;
}

/// Symmetric Hausdorff distance on T^2 between the vertices of each loop and
/// the polygon of the other. Invariant under parameter shift and zero for
/// loops with the same image.
inline double loop_distance(const DiscreteLoop& a, const DiscreteLoop& b)
{
  if (!(a.winding() == b.winding()))
  {
    throw DomainError("loop_distance: loops lie in different classes");
  }
  auto directed = [](const DiscreteLoop& from, const DiscreteLoop& to) {
    double worst = 0.0;
    for (const auto& p : from.vertices())
    {
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < to.size() && best > worst; ++i)
      {
        best = std::min(best, torus_point_segment_distance(p, to.lifted(i), to.lifted(i + 1)));
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

/// Circular mean of the vertex heights, in [0,1).
inline double mean_height(const DiscreteLoop& loop)
{
  double c = 0.0, s = 0.0;
  for (const auto& v : loop.vertices())
  {
    c += std::cos(2.0 * std::numbers::pi * v.y);
    s += std::sin(2.0 * std::numbers::pi * v.y);
  }
  double h = std::atan2(s, c) / (2.0 * std::numbers::pi);
  return h < 0.0 ? h + 1.0 : h;
}

struct MinimizerCluster
{
  DiscreteLoop representative;
  int members = 0;
  double length = 0.0;
};

struct StartRecord
{
  double offset = 0.0;
  double length = 0.0;
  double action = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  bool kept = false;
};

struct MinimizerReport
{
  std::vector<MinimizerCluster> clusters;
  double spread = 0.0;
  double best_length = 0.0;
  /// Converged minima within length_tol of the best, in canonical order.
  std::vector<DescentResult> minima;
  /// One record per start, in start order.
  std::vector<StartRecord> starts;
};

namespace detail
{
template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn)
{
  if (threads <= 0)
  {
    threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
  threads = std::min(threads, count);
  if (threads <= 1)
  {
    for (int i = 0; i < count; ++i)
    {
      fn(i);
    }
    return;
  }
  std::vector<std::future<void>> jobs;
  for (int t = 0; t < threads; ++t)
  {
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (int i = t; i < count; i += threads)
      {
        fn(i);
      }
    }));
  }
  for (auto& j : jobs)
  {
    j.get();
  }
}

/// Lexicographic order on lengths then vertex coordinates.
inline bool canonical_less(const DescentResult& a, const DescentResult& b)
{
  const double la = a.final_action, lb = b.final_action;
  if (la != lb)
  {
    return la < lb;
  }
  const auto& va = a.loop.vertices();
  const auto& vb = b.loop.vertices();
  return std::lexicographical_compare(va.begin(), va.end(), vb.begin(), vb.end(),
                                      [](const Vec2& p, const Vec2& q) {
                                        return p.x != q.x ? p.x < q.x : p.y < q.y;
                                      });
}
}  // namespace detail

/// Multi-start search for all shortest loops in a class. Starts are straight
/// lifts translated along the class normal to stratified offsets, with
/// per-vertex jitter. Converged results within length_tol of the best are
/// grouped by single-linkage clustering at cluster_tol under loop_distance.
inline MinimizerReport minimizer_set(const FinslerMetric& metric, Winding w,
                                     const SolverConfig& config)
{
  config.validate();
  require_nontrivial(w);
  const double glen = std::hypot(double(w.p), double(w.q));
  const int g = std::gcd(std::abs(w.p), std::abs(w.q));
  // Translating a straight (p,q) loop along its normal repeats with period g/|w|.
  const double period = g / glen;
  const Vec2 normal{-w.q / glen, w.p / glen};

  const int k = config.num_starts;
  std::vector<std::optional<DescentResult>> runs(static_cast<size_t>(k));
  std::vector<StartRecord> records(static_cast<size_t>(k));
  detail::parallel_for(k, config.threads, [&](int j) {
    std::mt19937_64 rng(detail::mix_seed(config.seed, static_cast<std::uint64_t>(j)));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double offset = period * (j + u01(rng)) / k;
    SolverConfig run_cfg = config;
    run_cfg.seed = rng();
    DiscreteLoop init =
        jittered_straight_loop(w, config.n, normal * offset, config.jitter, run_cfg.seed);
    DescentResult r = shortest_loop(metric, w, run_cfg, std::move(init));
    records[j] = {offset, length(metric, r.loop), r.final_action, r.gradient_norm, r.converged,
                  false};
    runs[j] = std::move(r);
  });

  MinimizerReport rep;
  double best = std::numeric_limits<double>::infinity();
  for (int j = 0; j < k; ++j)
  {
    if (records[j].converged)
    {
      best = std::min(best, records[j].length);
    }
  }
  if (!std::isfinite(best))
  {
    throw SolverFailure("minimizer_set: no start converged");
  }
  rep.best_length = best;
  for (int j = 0; j < k; ++j)
  {
    if (records[j].converged && records[j].length <= best * (1.0 + config.length_tol))
    {
      records[j].kept = true;
      rep.minima.push_back(std::move(*runs[j]));
    }
  }
  rep.starts = std::move(records);
  std::sort(rep.minima.begin(), rep.minima.end(), detail::canonical_less);

  const size_t m = rep.minima.size();
  std::vector<size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](size_t i) {
    while (parent[i] != i)
    {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  for (size_t i = 0; i < m; ++i)
  {
    for (size_t j = i + 1; j < m; ++j)
    {
      const double d = loop_distance(rep.minima[i].loop, rep.minima[j].loop);
      rep.spread = std::max(rep.spread, d);
      if (d <= config.cluster_tol)
      {
        const size_t a = find(i), b = find(j);
        if (a != b)
        {
          parent[std::max(a, b)] = std::min(a, b);
        }
      }
    }
  }
  // Roots are the first (canonically smallest) member of each cluster.
  for (size_t i = 0; i < m; ++i)
  {
    if (find(i) == i)
    {
      rep.clusters.push_back({rep.minima[i].loop, 0, length(metric, rep.minima[i].loop)});
    }
  }
  for (size_t i = 0; i < m; ++i)
  {
    const size_t root = find(i);
    size_t idx = 0;
    for (size_t r = 0; r < root; ++r)
    {
      idx += find(r) == r ? 1 : 0;
    }
    ++rep.clusters[idx].members;
  }
  return rep;
}

/// Membership test for K_gamma^b with b = C0: max segment speed |N dx_i| <= C0 (1 + 1e-6).
inline bool verify_speed_cap(const FinslerMetric& metric, const DiscreteLoop& loop, Winding w,
                             const ReferenceMetric& reference = {})
{
  const double cap = speed_bound(metric, w, reference) * (1.0 + 1e-6);
  const int n = loop.size();
  for (int i = 0; i < n; ++i)
  {
    if (reference.norm(loop.segment(i) * double(n)) > cap)
    {
      return false;
    }
  }
  return true;
}

}  // namespace finslerlab

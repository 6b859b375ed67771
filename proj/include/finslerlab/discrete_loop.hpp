#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "finslerlab/error.hpp"
#include "finslerlab/finsler_metric.hpp"
#include "finslerlab/vec2.hpp"

namespace finslerlab
{
/// Free homotopy class of a loop on T^2, i.e. an element of Z^2.
struct Winding
{
  int p = 0;
  int q = 0;

  bool trivial() const { return p == 0 && q == 0; }
  Vec2 as_vector() const { return {double(p), double(q)}; }
  Winding operator-() const { return {-p, -q}; }
  friend constexpr bool operator==(const Winding&, const Winding&) = default;
};

inline void require_nontrivial(const Winding& w)
{
  if (w.trivial())
  {
    throw DegenerateLoopError("the trivial class (0,0) is not a non-trivial free homotopy class");
  }
}

/// Polygonal loop on T^2 stored as a lift to R^2. Vertex i sits at parameter
/// t_i = i/N; the closing vertex is x_N = x_0 + (p, q).
class DiscreteLoop
{
public:
  static constexpr int kMinVertices = 8;

  DiscreteLoop(std::vector<Vec2> vertices, Winding winding)
      : vertices_(std::move(vertices)), winding_(winding)
  {
    if (vertices_.size() < static_cast<size_t>(kMinVertices))
    {
      throw MalformedLoopError("a loop needs at least 8 vertices");
    }
    for (const auto& v : vertices_)
    {
      if (!is_finite(v))
      {
        throw MalformedLoopError("non-finite loop vertex");
      }
    }
  }

  /// Builds a loop from N+1 lifted points x_0..x_N; the winding is x_N - x_0,
  /// which must be integral within 1e-9.
  static DiscreteLoop from_lift(std::span<const Vec2> points)
  {
    if (points.size() < static_cast<size_t>(kMinVertices) + 1)
    {
      throw MalformedLoopError("a loop needs at least 8 vertices plus its closing point");
    }
    const Vec2 d = points.back() - points.front();
    const double p = std::round(d.x), q = std::round(d.y);
    if (std::abs(d.x - p) > 1e-9 || std::abs(d.y - q) > 1e-9)
    {
      throw MalformedLoopError("loop does not close up to an integer translation");
    }
    return DiscreteLoop(std::vector<Vec2>(points.begin(), points.end() - 1),
                        Winding{int(p), int(q)});
  }

  /// Uniformly sampled straight lift from `origin` to origin + (p,q).
  static DiscreteLoop straight(Winding w, int n, Vec2 origin = {})
  {
    std::vector<Vec2> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
    {
      v[i] = origin + w.as_vector() * (double(i) / n);
    }
    return DiscreteLoop(std::move(v), w);
  }

  int size() const { return static_cast<int>(vertices_.size()); }
  Winding winding() const { return winding_; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Vec2& vertex(int i) const { return vertices_[static_cast<size_t>(i)]; }

  /// Periodic extension of the lift: x_{i+kN} = x_i + k (p,q).
  Vec2 lifted(int i) const
  {
    const int n = size();
    const int k = (i >= 0) ? i / n : -((-i + n - 1) / n);
    return vertices_[static_cast<size_t>(i - k * n)] + winding_.as_vector() * double(k);
  }

  Vec2 segment(int i) const { return lifted(i + 1) - lifted(i); }
  Vec2 midpoint(int i) const { return 0.5 * (lifted(i) + lifted(i + 1)); }

  /// Same loop with parameter shifted by k/N.
  DiscreteLoop cyclic_shift(int k) const
  {
    std::vector<Vec2> v(vertices_.size());
    for (int i = 0; i < size(); ++i)
    {
      v[i] = lifted(i + k);
    }
    return DiscreteLoop(std::move(v), winding_);
  }

  /// Same image traversed backwards; lies in the class (-p,-q).
  DiscreteLoop reversed() const
  {
    std::vector<Vec2> v(vertices_.size());
    for (int i = 0; i < size(); ++i)
    {
      v[i] = lifted(-i);
    }
    return DiscreteLoop(std::move(v), -winding_);
  }

  DiscreteLoop translated(const Vec2& by) const
  {
    auto v = vertices_;
    for (auto& x : v)
    {
      x += by;
    }
    return DiscreteLoop(std::move(v), winding_);
  }

private:
  std::vector<Vec2> vertices_;
  Winding winding_;
};

inline Winding winding_class(const DiscreteLoop& loop) { return loop.winding(); }

/// Winding of a raw lift x_0..x_N; throws MalformedLoopError if it does not close.
inline Winding winding_class(std::span<const Vec2> lift) { return DiscreteLoop::from_lift(lift).winding(); }

/// Per-segment F-lengths F(m_i, dx_i) with midpoint-frozen coefficients.
inline std::vector<double> segment_lengths(const FinslerMetric& metric, const DiscreteLoop& loop)
{
  std::vector<double> s(static_cast<size_t>(loop.size()));
  for (int i = 0; i < loop.size(); ++i)
  {
    s[i] = metric.value(loop.midpoint(i), loop.segment(i));
  }
  return s;
}

/// l_F: sum of midpoint-rule segment lengths.
inline double length(const FinslerMetric& metric, const DiscreteLoop& loop)
{
  double l = 0.0;
  for (int i = 0; i < loop.size(); ++i)
  {
    l += metric.value(loop.midpoint(i), loop.segment(i));
  }
  return l;
}

/// A_F = (1/N) sum_i F^2(m_i, N dx_i), the Riemann sum of int_0^1 F^2(c') dt.
inline double action(const FinslerMetric& metric, const DiscreteLoop& loop)
{
  const int n = loop.size();
  double a = 0.0;
  for (int i = 0; i < n; ++i)
  {
    const double f = metric.value(loop.midpoint(i), loop.segment(i) * double(n));
    a += f * f;
  }
  return a / n;
}

/// A_F - l_F^2 >= 0, with equality iff all segment F-speeds agree.
inline double cs_gap(const FinslerMetric& metric, const DiscreteLoop& loop)
{
  const double l = length(metric, loop);
  return action(metric, loop) - l * l;
}

/// Resamples the loop along its own polygon so that every segment has the same
/// F-length. Vertex 0 stays fixed; the others slide along the original
/// polygon, located by inverting cumulative F-arc-length. Because chords of the
/// resampled polygon cut corners, the placement is refined by a fixed-point
/// iteration on the chord lengths until the Cauchy-Schwarz gap is below
/// `relative_gap` times the action.
inline DiscreteLoop reparametrize_constant_speed(const FinslerMetric& metric,
                                                 const DiscreteLoop& loop,
                                                 double relative_gap = 1e-10,
                                                 int max_rounds = 200)
{
  const int n = loop.size();
  const Vec2 shift = loop.winding().as_vector();
  const auto s = segment_lengths(metric, loop);
  std::vector<double> arc(static_cast<size_t>(n) + 1, 0.0);
  for (int i = 0; i < n; ++i)
  {
    arc[i + 1] = arc[i] + s[i];
  }
  const double total = arc[n];
  if (!(total > 0.0))
  {
    throw DegenerateLoopError("cannot reparametrize a loop of zero length");
  }
  if (cs_gap(metric, loop) <= relative_gap * action(metric, loop))
  {
    return loop;
  }

  // Point of the original polygon at F-arc-length u, extended periodically.
  auto point_at = [&](double u) {
    const double k = std::floor(u / total);
    u -= k * total;
    auto it = std::upper_bound(arc.begin(), arc.end(), u);
    int i = std::clamp(static_cast<int>(it - arc.begin()) - 1, 0, n - 1);
    while (i < n - 1 && s[i] == 0.0)
    {
      ++i;
    }
    const double tau = s[i] > 0.0 ? std::clamp((u - arc[i]) / s[i], 0.0, 1.0) : 0.0;
    return loop.lifted(i) + loop.segment(i) * tau + shift * k;
  };

  std::vector<double> u(static_cast<size_t>(n) + 1);
  for (int j = 0; j <= n; ++j)
  {
    u[j] = total * j / n;
  }
  std::vector<Vec2> y(static_cast<size_t>(n));
  std::vector<double> chord(static_cast<size_t>(n)), cum(static_cast<size_t>(n) + 1);
  DiscreteLoop best = loop;
  double best_ratio = std::numeric_limits<double>::infinity();
  std::vector<double> best_u = u;
  // The fixed point can stall on polygons with cusps or small knots. Finish
  // with damped Newton on the equal-chord system c_j(u_j, u_{j+1}) = h,
  // j = 0..N-1, in the unknowns u_1..u_{N-1} and h (u_0 = 0, u_N = total).
  // Its Jacobian is bidiagonal plus the h column, so each step is O(N).
  auto locate = [&](double v) {
    auto it = std::upper_bound(arc.begin(), arc.end(), v);
    int i = std::clamp(static_cast<int>(it - arc.begin()) - 1, 0, n - 1);
    while (i < n - 1 && s[i] == 0.0)
    {
      ++i;
    }
    return i;
  };
  auto tangent_at = [&](double v) {
    const int i = locate(v);
    return s[i] > 0.0 ? loop.segment(i) * (1.0 / s[i]) : Vec2{};
  };
  auto place = [&](const std::vector<double>& uu, std::vector<Vec2>& pts) {
    pts.resize(static_cast<size_t>(n) + 1);
    pts[0] = loop.vertex(0);
    for (int j = 1; j < n; ++j)
    {
      pts[j] = point_at(uu[j]);
    }
    pts[n] = loop.vertex(0) + shift;
  };
  auto residual = [&](const std::vector<Vec2>& pts, double h, std::vector<double>& r) {
    r.resize(static_cast<size_t>(n));
    double norm2 = 0.0;
    for (int j = 0; j < n; ++j)
    {
      r[j] = metric.value((pts[j] + pts[j + 1]) * 0.5, pts[j + 1] - pts[j]) - h;
      norm2 += r[j] * r[j];
    }
    return norm2;
  };

  // Chord from a to the polygon point at arc-length v.
  auto chord_to = [&](const Vec2& a, double v) {
    const Vec2 b = point_at(v);
    return metric.value((a + b) * 0.5, b - a);
  };
  // First-hit shooting: place each knot at the first point whose chord from
  // its predecessor reaches h, then bisect h on the closing chord.
  auto shoot_with = [&](double h, std::vector<double>& uu) {
    uu.assign(static_cast<size_t>(n) + 1, total);
    uu[0] = 0.0;
    Vec2 a = loop.vertex(0);
    const int sub = 4;
    for (int j = 1; j < n; ++j)
    {
      double lo = uu[j - 1], hi = -1.0;
      for (int i = locate(lo); i < n && hi < 0.0; ++i)
      {
        for (int k = 1; k <= sub; ++k)
        {
          const double v = arc[i] + s[i] * k / sub;
          if (v <= lo)
          {
            continue;
          }
          if (chord_to(a, v) >= h)
          {
            hi = v;
            break;
          }
          lo = v;
        }
      }
      if (hi < 0.0)
      {
        return -h;
      }
      for (int b = 0; b < 60; ++b)
      {
        const double mid = 0.5 * (lo + hi);
        (chord_to(a, mid) >= h ? hi : lo) = mid;
      }
      uu[j] = hi;
      a = point_at(hi);
    }
    return chord_to(a, total) - h;
  };
  auto shoot = [&]() {
    std::vector<double> uu;
    double lo = 0.0, hi = 2.0 * total / n;
    for (int b = 0; b < 60; ++b)
    {
      const double mid = 0.5 * (lo + hi);
      (shoot_with(mid, uu) > 0.0 ? lo : hi) = mid;
    }
    shoot_with(lo, uu);
    return uu;
  };

  // Newton can stall where the polygon doubles back. The second cycle starts
  // it from the shooting solution instead; later cycles retry from a few
  // fixed-point rounds.
  for (int cycle = 0; cycle < 6; ++cycle)
  {
    const int rounds = cycle == 0 ? max_rounds : cycle == 1 ? 0 : 20;
    u = cycle == 1 ? shoot() : best_u;
    for (int round = 0; round < rounds; ++round)
    {
      for (int j = 0; j < n; ++j)
      {
        y[j] = j == 0 ? loop.vertex(0) : point_at(u[j]);
      }
      DiscreteLoop candidate(y, loop.winding());
      const double a = action(metric, candidate);
      const double ratio = cs_gap(metric, candidate) / a;
      if (ratio < best_ratio)
      {
        best_ratio = ratio;
        best = candidate;
        best_u = u;
      }
      if (ratio <= relative_gap)
      {
        break;
      }
      cum[0] = 0.0;
      for (int j = 0; j < n; ++j)
      {
        chord[j] = metric.value(candidate.midpoint(j), candidate.segment(j));
        cum[j + 1] = cum[j] + chord[j];
      }
      const double c_total = cum[n];
      std::vector<double> next(u.size());
      next[0] = 0.0;
      next[n] = total;
      int k = 0;
      for (int j = 1; j < n; ++j)
      {
        const double target = c_total * j / n;
        while (k < n - 1 && cum[k + 1] < target)
        {
          ++k;
        }
        const double frac = chord[k] > 0.0 ? (target - cum[k]) / chord[k] : 0.0;
        next[j] = u[k] + frac * (u[k + 1] - u[k]);
      }
      u.swap(next);
    }
    if (best_ratio <= relative_gap)
    {
      return best;
    }
    if (cycle == 0)
    {
      u = best_u;
    }
    std::vector<Vec2> pts, trial_pts;
    std::vector<double> r, trial_r, p(static_cast<size_t>(n) + 1), q(static_cast<size_t>(n) + 1);
    place(u, pts);
    double h = 0.0;
    for (int j = 0; j < n; ++j)
    {
      h += metric.value((pts[j] + pts[j + 1]) * 0.5, pts[j + 1] - pts[j]);
    }
    h /= n;
    double r2 = residual(pts, h, r);
    for (int it = 0; it < 100; ++it)
    {
      // Partial derivatives of c_j with respect to u_j (b) and u_{j+1} (a).
      std::vector<double> da(static_cast<size_t>(n)), db(static_cast<size_t>(n));
      for (int j = 0; j < n; ++j)
      {
        const MetricJet jet = metric.jet((pts[j] + pts[j + 1]) * 0.5, pts[j + 1] - pts[j]);
        const Vec2 ga = jet.d_point * 0.5 + jet.d_velocity;
        const Vec2 gb = jet.d_point * 0.5 - jet.d_velocity;
        da[j] = j + 1 < n ? dot(ga, tangent_at(u[j + 1])) : 0.0;
        db[j] = j > 0 ? dot(gb, tangent_at(u[j])) : 0.0;
      }
      // du_j = p_j + q_j dh, from rows 0..N-2; row N-1 fixes dh.
      p[1] = 0.0;
      q[1] = 0.0;
      bool singular = false;
      for (int j = 0; j + 1 < n; ++j)
      {
        if (std::abs(da[j]) < 1e-14)
        {
          singular = true;
          break;
        }
        const double pj = j > 0 ? p[j] : 0.0, qj = j > 0 ? q[j] : 0.0;
        p[j + 1] = (-r[j] - db[j] * pj) / da[j];
        q[j + 1] = (1.0 - db[j] * qj) / da[j];
      }
      const double denom = db[n - 1] * q[n - 1] - 1.0;
      if (singular || std::abs(denom) < 1e-14)
      {
        break;
      }
      const double dh = (-r[n - 1] - db[n - 1] * p[n - 1]) / denom;
      bool improved = false;
      for (double step = 1.0; step > 1e-12; step *= 0.5)
      {
        std::vector<double> nu = u;
        bool monotone = true;
        for (int j = 1; j < n; ++j)
        {
          nu[j] = u[j] + step * (p[j] + q[j] * dh);
          monotone = monotone && nu[j] > nu[j - 1];
        }
        if (!monotone || !(nu[n - 1] < nu[n]))
        {
          continue;
        }
        place(nu, trial_pts);
        const double nh = h + step * dh;
        const double nr2 = residual(trial_pts, nh, trial_r);
        if (nr2 < r2)
        {
          u.swap(nu);
          pts.swap(trial_pts);
          r.swap(trial_r);
          h = nh;
          r2 = nr2;
          improved = true;
          break;
        }
      }
      if (!improved)
      {
        break;
      }
      DiscreteLoop candidate(std::vector<Vec2>(pts.begin(), pts.end() - 1), loop.winding());
      const double ratio = cs_gap(metric, candidate) / action(metric, candidate);
      if (ratio < best_ratio)
      {
        best_ratio = ratio;
        best = std::move(candidate);
        best_u = u;
      }
      if (ratio <= relative_gap)
      {
        break;
      }
    }
    if (best_ratio <= relative_gap)
    {
      return best;
    }
  }
  return best;
}

/// A point of the tangent bundle: base point (any lift) and velocity.
struct TangentSample
{
  Vec2 base;
  Vec2 velocity;
};

/// The loop measure mu_c: uniform weight 1/N on the segment samples
/// (m_i, N dx_i). All velocities satisfy |v| <= speed_cap.
struct LoopMeasure
{
  std::vector<TangentSample> samples;
  double speed_cap = 0.0;

  double weight() const { return 1.0 / double(samples.size()); }

  /// int f d mu, summed in sample order and divided by N once.
  template <typename Fn>
  double integrate(Fn&& f) const
  {
    double acc = 0.0;
    for (const auto& s : samples)
    {
      acc += f(s);
    }
    return acc / double(samples.size());
  }
};

/// mu_c for a loop with |c'| <= b.
inline LoopMeasure loop_measure(const DiscreteLoop& loop, double b)
{
  const int n = loop.size();
  LoopMeasure mu;
  mu.speed_cap = b;
  mu.samples.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
  {
    const Vec2 v = loop.segment(i) * double(n);
    if (norm(v) > b)
    {
      throw CapViolationError("loop speed " + std::to_string(norm(v)) + " exceeds cap " +
                              std::to_string(b));
    }
    mu.samples.push_back({loop.midpoint(i), v});
  }
  return mu;
}

/// int F^2 d mu.
inline double action(const FinslerMetric& metric, const LoopMeasure& mu)
{
  return mu.integrate([&](const TangentSample& s) {
    const double f = metric.value(s.base, s.velocity);
    return f * f;
  });
}

/// CSV: "N,p,q" header row, its values, then "x,y" and one lifted vertex per row.
inline void write_loop_csv(std::ostream& os, const DiscreteLoop& loop)
{
  os << "N,p,q\n" << loop.size() << ',' << loop.winding().p << ',' << loop.winding().q << "\nx,y\n";
  char buf[64];
  for (const auto& v : loop.vertices())
  {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", v.x, v.y);
    os << buf;
  }
}

inline DiscreteLoop read_loop_csv(std::istream& is)
{
  std::string line;
  auto next = [&]() {
    if (!std::getline(is, line))
    {
      throw MalformedLoopError("loop CSV ended early");
    }
    return line;
  };
  if (next().rfind("N,p,q", 0) != 0)
  {
    throw MalformedLoopError("loop CSV: missing 'N,p,q' header");
  }
  int n = 0, p = 0, q = 0;
  char c1 = 0, c2 = 0;
  std::istringstream hdr(next());
  if (!(hdr >> n >> c1 >> p >> c2 >> q) || c1 != ',' || c2 != ',')
  {
    throw MalformedLoopError("loop CSV: bad header values");
  }
  next();
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i)
  {
    std::istringstream row(next());
    Vec2 x;
    char comma = 0;
    if (!(row >> x.x >> comma >> x.y) || comma != ',')
    {
      throw MalformedLoopError("loop CSV: bad vertex row " + std::to_string(i));
    }
    v.push_back(x);
  }
  return DiscreteLoop(std::move(v), Winding{p, q});
}

}  // namespace finslerlab

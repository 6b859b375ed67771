#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <variant>

#include "finslerlab/error.hpp"
#include "finslerlab/fourier_series.hpp"
#include "finslerlab/vec2.hpp"

namespace finslerlab
{
/// Whether construction-time validity checks run. Disabling them is only
/// useful to demonstrate what goes wrong with an invalid metric.
enum class Checks { on, off };

/// F together with its first derivatives in base point and fiber direction.
struct MetricJet
{
  double value = 0.0;
  Vec2 d_point;
  Vec2 d_velocity;
};

/// The fixed Euclidean reference metric g on T^2.
struct ReferenceMetric
{
  double norm(const Vec2& v) const { return finslerlab::norm(v); }
  double straight_loop_length(int p, int q) const { return std::hypot(double(p), double(q)); }
};

/// Finsler metric on T^2 built from Riemannian, Randers and conformal pieces.
///
/// Riemannian:  F(x,v) = sqrt(v^T G(x) v)
/// Randers:     F(x,v) = sqrt(v^T G(x) v) + beta(x).v,   |beta|_G* < 1
/// Conformal:   F(x,v) = sqrt(lambda(x)) * F_base(x,v),  lambda > 0
///
/// All coefficient fields are truncated Fourier series. Values are immutable;
/// conformal metrics share their base.
class FinslerMetric
{
public:
  struct Riemannian
  {
    FourierSeries g11, g12, g22;
  };
  struct Randers
  {
    Riemannian riemannian;
    FourierSeries beta_x, beta_y;
  };
  struct Conformal
  {
    std::shared_ptr<const FinslerMetric> base;
    ConformalFactor lambda;
  };

  static FinslerMetric euclidean()
  {
    return riemannian(FourierSeries(1.0), FourierSeries(0.0), FourierSeries(1.0));
  }

  static FinslerMetric riemannian(FourierSeries g11, FourierSeries g12, FourierSeries g22,
                                  Checks checks = Checks::on)
  {
    Riemannian r{std::move(g11), std::move(g12), std::move(g22)};
    if (checks == Checks::on)
    {
      check_riemannian(r);
    }
    return FinslerMetric(Repr{std::move(r)});
  }

  /// Randers metric over a Riemannian part given as a metric of that kind.
  static FinslerMetric randers(const FinslerMetric& riemannian_part, FourierSeries beta_x,
                               FourierSeries beta_y, Checks checks = Checks::on)
  {
    const auto* r = std::get_if<Riemannian>(&riemannian_part.repr_);
    if (r == nullptr)
    {
      throw InvalidMetricError("Randers base must be Riemannian");
    }
    Randers rd{*r, std::move(beta_x), std::move(beta_y)};
    if (checks == Checks::on)
    {
      check_randers(rd);
    }
    return FinslerMetric(Repr{std::move(rd)});
  }

  static FinslerMetric randers_constant(double bx, double by, Checks checks = Checks::on)
  {
    return randers(euclidean(), FourierSeries(bx), FourierSeries(by), checks);
  }

  const auto& representation() const { return repr_; }

  std::string kind() const
  {
    return std::visit(
        [](const auto& r) -> std::string {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Riemannian>)
            return "riemannian";
          else if constexpr (std::is_same_v<T, Randers>)
            return "randers";
          else
            return "conformal";
        },
        repr_);
  }

  /// True if no coefficient field depends on the base point.
  bool is_spatially_constant() const
  {
    return std::visit(
        [](const auto& r) -> bool {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Riemannian>)
            return constant(r);
          else if constexpr (std::is_same_v<T, Randers>)
            return constant(r.riemannian) && r.beta_x.is_constant() && r.beta_y.is_constant();
          else
            return r.lambda.is_constant() && r.base->is_spatially_constant();
        },
        repr_);
  }

  /// F(x,v). Throws DomainError on non-finite input.
  double evaluate(const Vec2& x, const Vec2& v) const
  {
    if (!is_finite(x) || !is_finite(v))
    {
      throw DomainError("evaluate: non-finite point or vector");
    }
    return value(x, v);
  }

  /// F(x,v) without input validation; the hot path of the solver.
  double value(const Vec2& x, const Vec2& v) const
  {
    return std::visit(
        [&](const auto& r) -> double {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Riemannian>)
          {
            return std::sqrt(std::max(0.0, quadratic(r, x, v)));
          }
          else if constexpr (std::is_same_v<T, Randers>)
          {
            return std::sqrt(std::max(0.0, quadratic(r.riemannian, x, v))) +
                   r.beta_x(x) * v.x + r.beta_y(x) * v.y;
          }
          else
          {
            return std::sqrt(r.lambda(x)) * r.base->value(x, v);
          }
        },
        repr_);
  }

  /// F and its gradients in x and v. At v = 0 the v-gradient of the norm part
  /// is set to zero.
  MetricJet jet(const Vec2& x, const Vec2& v) const
  {
    return std::visit(
        [&](const auto& r) -> MetricJet {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, Riemannian>)
          {
            return riemannian_jet(r, x, v);
          }
          else if constexpr (std::is_same_v<T, Randers>)
          {
            MetricJet j = riemannian_jet(r.riemannian, x, v);
            const auto [bx, gbx] = r.beta_x.value_and_gradient(x);
            const auto [by, gby] = r.beta_y.value_and_gradient(x);
            j.value += bx * v.x + by * v.y;
            j.d_velocity += Vec2{bx, by};
            j.d_point += gbx * v.x + gby * v.y;
            return j;
          }
          else
          {
            const MetricJet b = r.base->jet(x, v);
            const auto [lam, glam] = r.lambda.value_and_gradient(x);
            const double s = std::sqrt(lam);
            MetricJet j;
            j.value = s * b.value;
            j.d_velocity = s * b.d_velocity;
            j.d_point = s * b.d_point + (b.value / (2.0 * s)) * glam;
            return j;
          }
        },
        repr_);
  }

private:
  using Repr = std::variant<Riemannian, Randers, Conformal>;

  explicit FinslerMetric(Repr r) : repr_(std::move(r)) {}

  friend FinslerMetric conformal_scale(const FinslerMetric&, const ConformalFactor&, Checks);

  static bool constant(const Riemannian& r)
  {
    return r.g11.is_constant() && r.g12.is_constant() && r.g22.is_constant();
  }

  static double quadratic(const Riemannian& r, const Vec2& x, const Vec2& v)
  {
    return r.g11(x) * v.x * v.x + 2.0 * r.g12(x) * v.x * v.y + r.g22(x) * v.y * v.y;
  }

  static MetricJet riemannian_jet(const Riemannian& r, const Vec2& x, const Vec2& v)
  {
    const auto [a, ga] = r.g11.value_and_gradient(x);
    const auto [b, gb] = r.g12.value_and_gradient(x);
    const auto [c, gc] = r.g22.value_and_gradient(x);
    const double q = a * v.x * v.x + 2.0 * b * v.x * v.y + c * v.y * v.y;
    MetricJet j;
    if (q <= 0.0)
    {
      return j;
    }
    j.value = std::sqrt(q);
    const double inv = 1.0 / j.value;
    j.d_velocity = Vec2{a * v.x + b * v.y, b * v.x + c * v.y} * inv;
    const Vec2 dq = ga * (v.x * v.x) + gb * (2.0 * v.x * v.y) + gc * (v.y * v.y);
    j.d_point = dq * (0.5 * inv);
    return j;
  }

  static constexpr int kCheckGrid = 64;

  static void check_riemannian(const Riemannian& r)
  {
    for (int i = 0; i < kCheckGrid; ++i)
    {
      for (int k = 0; k < kCheckGrid; ++k)
      {
        const Vec2 x{double(i) / kCheckGrid, double(k) / kCheckGrid};
        const double a = r.g11(x), b = r.g12(x), c = r.g22(x);
        if (!(a > 0.0) || !(a * c - b * b > 0.0))
        {
          throw InvalidMetricError("Riemannian coefficient field is not positive definite");
        }
      }
    }
  }

  static void check_randers(const Randers& rd)
  {
    check_riemannian(rd.riemannian);
    for (int i = 0; i < kCheckGrid; ++i)
    {
      for (int k = 0; k < kCheckGrid; ++k)
      {
        const Vec2 x{double(i) / kCheckGrid, double(k) / kCheckGrid};
        const double a = rd.riemannian.g11(x), b = rd.riemannian.g12(x),
                     c = rd.riemannian.g22(x);
        const double bx = rd.beta_x(x), by = rd.beta_y(x);
        // Dual norm |beta|^2 = beta^T G^{-1} beta.
        const double dual = (c * bx * bx - 2.0 * b * bx * by + a * by * by) / (a * c - b * b);
        if (!(dual < 1.0))
        {
          throw InvalidMetricError("Randers one-form has norm >= 1; F is not positive");
        }
      }
    }
  }

  Repr repr_;
};

/// sqrt(lambda) * F. Nested scalings compose into one factor lambda1*lambda2.
inline FinslerMetric conformal_scale(const FinslerMetric& metric, const ConformalFactor& lambda,
                                     Checks checks = Checks::on)
{
  if (checks == Checks::on && !lambda.is_positive())
  {
    throw NotConformalFactorError("conformal factor is not positive on the verification grid");
  }
  if (const auto* c = std::get_if<FinslerMetric::Conformal>(&metric.repr_))
  {
    return FinslerMetric(FinslerMetric::Repr{FinslerMetric::Conformal{c->base, c->lambda * lambda}});
  }
  return FinslerMetric(FinslerMetric::Repr{
      FinslerMetric::Conformal{std::make_shared<const FinslerMetric>(metric), lambda}});
}

struct ConvexityReport
{
  double min_eigenvalue = 0.0;
  Vec2 worst_point;
  Vec2 worst_direction;
  bool passed = false;
};

/// Central finite-difference Hessian of v -> F^2(x,v), step h = 1e-4 |v|.
inline std::array<double, 3> fiber_hessian_fd(const FinslerMetric& metric, const Vec2& x,
                                              const Vec2& v)
{
  const double h = 1e-4 * norm(v);
  auto f2 = [&](double dx, double dy) {
    const double f = metric.value(x, v + Vec2{dx, dy});
    return f * f;
  };
  const double c = f2(0, 0);
  const double hxx = (f2(h, 0) - 2.0 * c + f2(-h, 0)) / (h * h);
  const double hyy = (f2(0, h) - 2.0 * c + f2(0, -h)) / (h * h);
  const double hxy = (f2(h, h) - f2(h, -h) - f2(-h, h) + f2(-h, -h)) / (4.0 * h * h);
  return {hxx, hxy, hyy};
}

inline double min_eigenvalue_sym2(double a, double b, double d)
{
  return 0.5 * (a + d) - std::hypot(0.5 * (a - d), b);
}

/// Samples random (x, v) with |v| = 1 and reports the smallest eigenvalue of
/// the fiberwise Hessian of F^2. Passes iff it exceeds `tolerance`.
inline ConvexityReport verify_convexity(const FinslerMetric& metric, int sample_count,
                                        std::uint64_t seed, double tolerance = 1e-6)
{
  if (sample_count < 1)
  {
    throw DomainError("verify_convexity: sample_count must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ConvexityReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (int s = 0; s < sample_count; ++s)
  {
    const Vec2 x{unit(rng), unit(rng)};
    const double th = 2.0 * std::numbers::pi * unit(rng);
    const Vec2 v{std::cos(th), std::sin(th)};
    const auto [a, b, d] = fiber_hessian_fd(metric, x, v);
    const double e = min_eigenvalue_sym2(a, b, d);
    if (e < rep.min_eigenvalue)
    {
      rep.min_eigenvalue = e;
      rep.worst_point = x;
      rep.worst_direction = v;
    }
  }
  rep.passed = rep.min_eigenvalue > tolerance;
  return rep;
}

namespace detail
{
/// Golden-section maximization of a unimodal function on [lo, hi].
template <typename Fn>
double golden_max(Fn&& fn, double lo, double hi, int iters = 80)
{
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int i = 0; i < iters; ++i)
  {
    if (fc > fd)
    {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = fn(c);
    }
    else
    {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = fn(d);
    }
  }
  return std::max({fc, fd, fn(lo), fn(hi)});
}
}  // namespace detail

/// Smallest c >= 1 with F/c <= |.| <= c F over a grid of base points and unit
/// directions. The direction extremum at the worst base point is refined by a
/// golden-section search. For metrics with x-dependent coefficients the result
/// is inflated by 1.01, since the base-point grid can miss the true supremum.
inline double comparison_constant(const FinslerMetric& metric, const ReferenceMetric& reference,
                                  int grid_resolution)
{
  if (grid_resolution < 8)
  {
    throw DomainError("comparison_constant: grid_resolution must be >= 8");
  }
  const int dirs = std::max(64, 8 * grid_resolution);
  const int base = metric.is_spatially_constant() ? 1 : grid_resolution;
  const double dth = 2.0 * std::numbers::pi / dirs;

  double worst_up = 0.0, worst_down = 0.0;  // max F/|v|, max |v|/F
  Vec2 x_up, x_down;
  double th_up = 0.0, th_down = 0.0;
  for (int i = 0; i < base; ++i)
  {
    for (int k = 0; k < base; ++k)
    {
      const Vec2 x{double(i) / base, double(k) / base};
      for (int d = 0; d < dirs; ++d)
      {
        const double th = d * dth;
        const Vec2 v{std::cos(th), std::sin(th)};
        const double f = metric.value(x, v);
        if (!(f > 1e-12))
        {
          throw InvalidMetricError("comparison_constant: F vanishes on a unit vector");
        }
        const double n = reference.norm(v);
        if (f / n > worst_up)
        {
          worst_up = f / n;
          x_up = x;
          th_up = th;
        }
        if (n / f > worst_down)
        {
          worst_down = n / f;
          x_down = x;
          th_down = th;
        }
      }
    }
  }
  auto ratio_up = [&](double th) {
    const Vec2 v{std::cos(th), std::sin(th)};
    return metric.value(x_up, v) / reference.norm(v);
  };
  auto ratio_down = [&](double th) {
    const Vec2 v{std::cos(th), std::sin(th)};
    const double f = metric.value(x_down, v);
    if (!(f > 1e-12))
    {
      throw InvalidMetricError("comparison_constant: F vanishes on a unit vector");
    }
    return reference.norm(v) / f;
  };
  worst_up = std::max(worst_up, detail::golden_max(ratio_up, th_up - dth, th_up + dth));
  worst_down = std::max(worst_down, detail::golden_max(ratio_down, th_down - dth, th_down + dth));

  const double c = std::max({1.0, worst_up, worst_down});
  return metric.is_spatially_constant() ? c : 1.01 * c;
}

/// d(f,g) = sum_{k <= k_max} 2^-k ||f-g||_k / (1 + ||f-g||_k), with the C^k
/// norms taken over a fixed grid from exact derivatives.
inline double seminorm_distance(const FourierSeries& f, const FourierSeries& g, int k_max = 8,
                                int resolution = 64)
{
  if (k_max < 0)
  {
    throw DomainError("seminorm_distance: k_max must be >= 0");
  }
  const auto norms = (f - g).ck_norms(k_max, resolution);
  double d = 0.0;
  double w = 1.0;
  for (double n : norms)
  {
    d += w * n / (1.0 + n);
    w *= 0.5;
  }
  return d;
}

}  // namespace finslerlab

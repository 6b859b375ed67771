#pragma once

#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "finslerlab/discrete_loop.hpp"
#include "finslerlab/finsler_metric.hpp"
#include "finslerlab/fourier_series.hpp"

// Seeded generators for random metrics, factors and loops used by the
// experiments and property tests.
namespace finslerlab::sampling
{
enum class MetricFamily { flat, riemannian, randers, conformal };

inline const char* family_name(MetricFamily f)
{
  switch (f)
  {
    case MetricFamily::flat: return "flat";
    case MetricFamily::riemannian: return "riemannian";
    case MetricFamily::randers: return "randers";
    case MetricFamily::conformal: return "conformal";
  }
  return "?";
}

/// Random series with modes |kx|,|ky| <= max_mode and sum of |coefficients|
/// equal to `budget`, so |h - offset| <= budget everywhere.
inline FourierSeries random_series(std::mt19937_64& rng, double offset, double budget,
                                   int max_mode = 2, int terms = 3)
{
  std::uniform_int_distribution<int> mode(-max_mode, max_mode);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::pair<Mode, ModeCoefficients>> raw;
  double total = 0.0;
  while (static_cast<int>(raw.size()) < terms)
  {
    Mode k{mode(rng), mode(rng)};
    if (k.kx == 0 && k.ky == 0)
      continue;
    ModeCoefficients c{u(rng), u(rng)};
    total += std::abs(c.cos_coeff) + std::abs(c.sin_coeff);
    raw.emplace_back(k, c);
  }
  FourierSeries h(offset);
  for (auto& [k, c] : raw)
  {
    h.add_term(k, budget * c.cos_coeff / total, budget * c.sin_coeff / total);
  }
  return h;
}

/// Positive conformal factor with values in [offset - budget, offset + budget].
inline ConformalFactor random_factor(std::mt19937_64& rng, double offset = 1.0,
                                     double budget = 0.4)
{
  return random_series(rng, offset, budget);
}

inline FinslerMetric random_metric(MetricFamily family, std::mt19937_64& rng)
{
  switch (family)
  {
    case MetricFamily::flat:
      return FinslerMetric::euclidean();
    case MetricFamily::riemannian:
      return FinslerMetric::riemannian(random_series(rng, 1.2, 0.3), random_series(rng, 0.0, 0.2),
                                       random_series(rng, 1.0, 0.3));
    case MetricFamily::randers:
    {
      std::uniform_real_distribution<double> u(-0.3, 0.3);
      return FinslerMetric::randers(FinslerMetric::euclidean(), random_series(rng, u(rng), 0.2),
                                    random_series(rng, u(rng), 0.2));
    }
    case MetricFamily::conformal:
      return conformal_scale(FinslerMetric::euclidean(), random_factor(rng));
  }
  return FinslerMetric::euclidean();
}

/// Straight lift plus a smooth random deformation of up to three harmonics
/// and a small per-vertex jitter.
inline DiscreteLoop random_loop(std::mt19937_64& rng, Winding w, int n, double amplitude = 0.08)
{
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec2 origin{0.5 * (u(rng) + 1.0), 0.5 * (u(rng) + 1.0)};
  Vec2 a[3], b[3];
  for (int k = 0; k < 3; ++k)
  {
    a[k] = Vec2{u(rng), u(rng)} * (amplitude / (k + 1));
    b[k] = Vec2{u(rng), u(rng)} * (amplitude / (k + 1));
  }
  std::vector<Vec2> v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
  {
    const double t = double(i) / n;
    Vec2 x = origin + w.as_vector() * t;
    for (int k = 0; k < 3; ++k)
    {
      const double th = 2.0 * std::numbers::pi * (k + 1) * t;
      x += a[k] * std::cos(th) + b[k] * std::sin(th);
    }
    x += Vec2{u(rng), u(rng)} * (0.2 / n);
    v[i] = x;
  }
  return DiscreteLoop(std::move(v), w);
}

inline Winding random_winding(std::mt19937_64& rng, int max_abs = 2)
{
  std::uniform_int_distribution<int> d(-max_abs, max_abs);
  for (;;)
  {
    Winding w{d(rng), d(rng)};
    if (!w.trivial())
      return w;
  }
}

}  // namespace finslerlab::sampling

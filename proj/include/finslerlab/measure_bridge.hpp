#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "finslerlab/discrete_loop.hpp"
#include "finslerlab/error.hpp"
#include "finslerlab/finsler_metric.hpp"
#include "finslerlab/fourier_series.hpp"

namespace finslerlab
{
struct Cell
{
  int ix = 0;
  int iy = 0;
  friend constexpr bool operator==(const Cell&, const Cell&) = default;
};

/// Finite nonnegative measure on T^2 made of point masses per cell of an
/// m x m grid. Weights are stored row-major with rows indexed by y.
class GridMeasure
{
public:
  explicit GridMeasure(int resolution)
      : resolution_(resolution),
        weights_(static_cast<size_t>(resolution) * static_cast<size_t>(resolution), 0.0)
  {
    if (resolution < 1)
    {
      throw DomainError("GridMeasure: resolution must be positive");
    }
  }

  int resolution() const { return resolution_; }
  const std::vector<double>& weights() const { return weights_; }

  double weight(Cell c) const { return weights_[index(c)]; }

  void deposit(Cell c, double w)
  {
    if (!(w >= 0.0))
    {
      throw DomainError("GridMeasure: weights must be nonnegative");
    }
    weights_[index(c)] += w;
  }

  Cell cell_of(const Vec2& p) const
  {
    const Vec2 q = wrap(p);
    auto idx = [&](double s) { return std::min(resolution_ - 1, int(s * resolution_)); };
    return {idx(q.x), idx(q.y)};
  }

  Vec2 center(Cell c) const
  {
    return {(c.ix + 0.5) / resolution_, (c.iy + 0.5) / resolution_};
  }

  double total_mass() const
  {
    double s = 0.0;
    for (double w : weights_)
      s += w;
    return s;
  }

  double max_weight() const
  {
    double s = 0.0;
    for (double w : weights_)
      s = std::max(s, w);
    return s;
  }

  /// Samplewise convex combination a*this + (1-a)*other.
  GridMeasure mix(const GridMeasure& other, double a) const
  {
    if (other.resolution_ != resolution_)
      throw DomainError("GridMeasure: resolution mismatch");
    GridMeasure out(resolution_);
    for (size_t i = 0; i < weights_.size(); ++i)
    {
      out.weights_[i] = a * weights_[i] + (1.0 - a) * other.weights_[i];
    }
    return out;
  }

private:
  size_t index(Cell c) const
  {
    return static_cast<size_t>(c.iy) * static_cast<size_t>(resolution_) + static_cast<size_t>(c.ix);
  }

  int resolution_;
  std::vector<double> weights_;
};

/// pi_*^F mu: each sample (x, v) deposits F^2(x, v)/N into the cell of x.
inline GridMeasure pushforward(const FinslerMetric& metric, const LoopMeasure& mu, int resolution)
{
  if (resolution < 8)
  {
    throw DomainError("pushforward: resolution must be >= 8");
  }
  GridMeasure out(resolution);
  const double n = double(mu.samples.size());
  for (const auto& s : mu.samples)
  {
    const double f = metric.value(s.base, s.velocity);
    out.deposit(out.cell_of(s.base), f * f / n);
  }
  return out;
}

/// Weighted pushforward of a convex combination of loop measures (weights sum to 1).
inline GridMeasure pushforward(const FinslerMetric& metric, const std::vector<LoopMeasure>& parts,
                               const std::vector<double>& coefficients, int resolution)
{
  if (parts.size() != coefficients.size())
  {
    throw DomainError("pushforward: one coefficient per measure required");
  }
  GridMeasure out(resolution);
  for (size_t k = 0; k < parts.size(); ++k)
  {
    const double n = double(parts[k].samples.size());
    for (const auto& s : parts[k].samples)
    {
      const double f = metric.value(s.base, s.velocity);
      out.deposit(out.cell_of(s.base), coefficients[k] * (f * f / n));
    }
  }
  return out;
}

/// phi(lambda, mu) = sum over cells of lambda(center) * weight.
inline double pairing(const FourierSeries& lambda, const GridMeasure& mu)
{
  const int m = mu.resolution();
  double s = 0.0;
  for (int iy = 0; iy < m; ++iy)
  {
    for (int ix = 0; ix < m; ++ix)
    {
      const double w = mu.weight({ix, iy});
      if (w != 0.0)
      {
        s += lambda(mu.center({ix, iy})) * w;
      }
    }
  }
  return s;
}

/// |A_{sqrt(lambda) F}(c) - phi(lambda, pi_*^F mu_c)|. The two sides differ
/// only by evaluating lambda at segment midpoints versus cell centers.
inline double action_consistency(const FinslerMetric& metric, const ConformalFactor& lambda,
                                  const DiscreteLoop& loop, int resolution = 256)
{
  const FinslerMetric scaled = conformal_scale(metric, lambda);
  const LoopMeasure mu = loop_measure(loop, std::numeric_limits<double>::infinity());
  return std::abs(action(scaled, loop) - pairing(lambda, pushforward(metric, mu, resolution)));
}

/// Upper bound for action_consistency: Lip(lambda) * cell diagonal * mass.
inline double consistency_bound(const FourierSeries& lambda, double total_mass, int resolution)
{
  return lambda.lipschitz_bound() * (std::sqrt(2.0) / resolution) * total_mass;
}

struct SeparationVerdict
{
  bool equal = true;
  std::optional<Cell> witness;  // first differing cell in row-major order
  double difference = 0.0;      // |mu1 - mu2| at the witness
};

/// Two grid measures agree iff every cell agrees within tol (1 + max mass).
/// Otherwise the indicator of the witness cell is a discrete bump function
/// that separates them.
inline SeparationVerdict separation_test(const GridMeasure& a, const GridMeasure& b, double tol)
{
  if (a.resolution() != b.resolution())
  {
    throw DomainError("separation_test: resolution mismatch");
  }
  const double band = tol * (1.0 + std::max(a.max_weight(), b.max_weight()));
  const int m = a.resolution();
  for (int iy = 0; iy < m; ++iy)
  {
    for (int ix = 0; ix < m; ++ix)
    {
      const double d = std::abs(a.weight({ix, iy}) - b.weight({ix, iy}));
      if (d > band)
      {
        return {false, Cell{ix, iy}, d};
      }
    }
  }
  return {};
}

/// First line "resolution,total_mass", then m rows of m weights (row = y index).
inline void write_grid_csv(std::ostream& os, const GridMeasure& mu)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d,%.17g\n", mu.resolution(), mu.total_mass());
  os << buf;
  const int m = mu.resolution();
  for (int iy = 0; iy < m; ++iy)
  {
    for (int ix = 0; ix < m; ++ix)
    {
      std::snprintf(buf, sizeof buf, ix + 1 < m ? "%.17g," : "%.17g\n", mu.weight({ix, iy}));
      os << buf;
    }
  }
}

inline GridMeasure read_grid_csv(std::istream& is)
{
  std::string line;
  if (!std::getline(is, line))
  {
    throw DomainError("grid CSV: empty input");
  }
  int m = 0;
  double mass = 0.0;
  char comma = 0;
  std::istringstream hdr(line);
  if (!(hdr >> m >> comma >> mass) || comma != ',' || m < 1)
  {
    throw DomainError("grid CSV: bad header");
  }
  GridMeasure mu(m);
  for (int iy = 0; iy < m; ++iy)
  {
    if (!std::getline(is, line))
    {
      throw DomainError("grid CSV: missing row " + std::to_string(iy));
    }
    std::istringstream row(line);
    for (int ix = 0; ix < m; ++ix)
    {
      double w = 0.0;
      if (!(row >> w))
        throw DomainError("grid CSV: bad row " + std::to_string(iy));
      mu.deposit({ix, iy}, w);
      if (ix + 1 < m && !(row >> comma))
        throw DomainError("grid CSV: bad row " + std::to_string(iy));
    }
  }
  return mu;
}

}  // namespace finslerlab

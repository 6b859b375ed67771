#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "finslerlab/error.hpp"

namespace finslerlab
{
using Point = std::vector<double>;

inline double euclidean_distance(const Point& a, const Point& b)
{
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
  {
    s += (a[i] - b[i]) * (a[i] - b[i]);
  }
  return std::sqrt(s);
}

/// Compact convex set K in R^n given as the convex hull of finitely many points.
class ConvexBody
{
public:
  explicit ConvexBody(std::vector<Point> vertices) : vertices_(std::move(vertices))
  {
    if (vertices_.empty())
    {
      throw DomainError("ConvexBody: needs at least one vertex");
    }
    const size_t n = vertices_.front().size();
    if (n == 0)
    {
      throw DomainError("ConvexBody: dimension must be positive");
    }
    for (const auto& v : vertices_)
    {
      if (v.size() != n)
      {
        throw DomainError("ConvexBody: vertices of mixed dimension");
      }
      for (double c : v)
      {
        if (!std::isfinite(c))
          throw DomainError("ConvexBody: non-finite coordinate");
      }
    }
  }

  size_t dimension() const { return vertices_.front().size(); }
  size_t size() const { return vertices_.size(); }
  const std::vector<Point>& vertices() const { return vertices_; }
  const Point& vertex(size_t i) const { return vertices_[i]; }

  double diameter() const
  {
    double d = 0.0;
    for (size_t i = 0; i < vertices_.size(); ++i)
    {
      for (size_t j = i + 1; j < vertices_.size(); ++j)
      {
        d = std::max(d, euclidean_distance(vertices_[i], vertices_[j]));
      }
    }
    return d;
  }

  /// Hull of a subset of the vertices.
  ConvexBody face(const std::vector<size_t>& indices) const
  {
    std::vector<Point> v;
    v.reserve(indices.size());
    for (size_t i : indices)
    {
      v.push_back(vertices_.at(i));
    }
    return ConvexBody(std::move(v));
  }

private:
  std::vector<Point> vertices_;
};

/// Linear functional phi(f, x) = f . x. The coordinate functionals separate
/// points of R^n, so every element of the dual is a combination of them.
class Functional
{
public:
  Functional() = default;
  explicit Functional(std::vector<double> coefficients) : c_(std::move(coefficients))
  {
    for (double x : c_)
    {
      if (!std::isfinite(x))
        throw DomainError("Functional: non-finite coefficient");
    }
  }

  static Functional zero(size_t n) { return Functional(std::vector<double>(n, 0.0)); }

  size_t dimension() const { return c_.size(); }
  const std::vector<double>& coefficients() const { return c_; }

  double operator()(const Point& x) const
  {
    if (x.size() != c_.size())
    {
      throw DomainError("Functional: dimension mismatch");
    }
    double s = 0.0;
    for (size_t i = 0; i < c_.size(); ++i)
    {
      s += c_[i] * x[i];
    }
    return s;
  }

  double norm() const
  {
    double s = 0.0;
    for (double x : c_)
      s += x * x;
    return std::sqrt(s);
  }

  friend Functional operator+(const Functional& a, const Functional& b)
  {
    if (a.dimension() != b.dimension())
      throw DomainError("Functional: dimension mismatch");
    auto c = a.c_;
    for (size_t i = 0; i < c.size(); ++i)
      c[i] += b.c_[i];
    return Functional(std::move(c));
  }
  friend Functional operator-(const Functional& a, const Functional& b) { return a + (-1.0) * b; }
  friend Functional operator*(double s, const Functional& a)
  {
    auto c = a.c_;
    for (double& x : c)
      x *= s;
    return Functional(std::move(c));
  }

private:
  std::vector<double> c_;
};

/// M(f) represented by its active vertices: value m(f), the vertices within
/// tol (1 + |m|) of it, and the diameter of that vertex set (= diam of the
/// face they span).
struct ArgminSet
{
  double value = 0.0;
  std::vector<size_t> active_vertices;
  double diameter = 0.0;
};

inline ArgminSet argmin_set(const Functional& f, const ConvexBody& body, double tol = 1e-12)
{
  if (!(tol >= 0.0))
  {
    throw DomainError("argmin_set: tol must be nonnegative");
  }
  std::vector<double> values(body.size());
  double m = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < body.size(); ++i)
  {
    values[i] = f(body.vertex(i));
    m = std::min(m, values[i]);
  }
  ArgminSet out;
  out.value = m;
  const double band = tol * (1.0 + std::abs(m));
  for (size_t i = 0; i < body.size(); ++i)
  {
    if (values[i] - m <= band)
    {
      out.active_vertices.push_back(i);
    }
  }
  for (size_t a = 0; a < out.active_vertices.size(); ++a)
  {
    for (size_t b = a + 1; b < out.active_vertices.size(); ++b)
    {
      out.diameter = std::max(out.diameter, euclidean_distance(body.vertex(out.active_vertices[a]),
                                                               body.vertex(out.active_vertices[b])));
    }
  }
  return out;
}

struct SemicontinuityReport
{
  double base_value = 0.0;
  double base_diameter = 0.0;
  std::vector<double> value_deviation;  // |m(f_n) - m(f)|
  std::vector<double> diameters;        // diam M(f_n)
  double tail_max_deviation = 0.0;
  bool tail_monotone = true;
  int violations = 0;  // small scales with diam M(f_n) > diam M(f) + tol
};

/// Probes f_n = f + scale_n * perturbation_n. Scales at or below `small_scale`
/// form the tail, where |m(f_n) - m(f)| must be non-increasing and
/// diam M(f_n) <= diam M(f) + diam_tol (upper semicontinuity of diam M).
/// A single perturbation is reused for every scale.
inline SemicontinuityReport semicontinuity_probe(const Functional& f, const ConvexBody& body,
                                                 const std::vector<Functional>& perturbations,
                                                 const std::vector<double>& scales,
                                                 double small_scale, double diam_tol = 1e-9,
                                                 double argmin_tol = 1e-12)
{
  if (perturbations.empty() || (perturbations.size() != 1 && perturbations.size() != scales.size()))
  {
    throw DomainError("semicontinuity_probe: need one perturbation or one per scale");
  }
  for (size_t i = 0; i < scales.size(); ++i)
  {
    if (!(scales[i] > 0.0) || (i > 0 && !(scales[i] < scales[i - 1])))
    {
      throw DomainError("semicontinuity_probe: scales must be positive and strictly decreasing");
    }
  }
  const ArgminSet base = argmin_set(f, body, argmin_tol);
  SemicontinuityReport rep;
  rep.base_value = base.value;
  rep.base_diameter = base.diameter;
  double prev = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < scales.size(); ++i)
  {
    const Functional& p = perturbations.size() == 1 ? perturbations[0] : perturbations[i];
    const ArgminSet a = argmin_set(f + scales[i] * p, body, argmin_tol);
    const double dev = std::abs(a.value - base.value);
    rep.value_deviation.push_back(dev);
    rep.diameters.push_back(a.diameter);
    if (scales[i] <= small_scale)
    {
      rep.tail_max_deviation = std::max(rep.tail_max_deviation, dev);
      if (dev > prev)
      {
        rep.tail_monotone = false;
      }
      prev = dev;
      if (a.diameter > base.diameter + diam_tol)
      {
        ++rep.violations;
      }
    }
  }
  return rep;
}

/// A functional whose argmin over `face` has diameter <= eps.
struct ExposingDirection
{
  Functional g;
  int draws = 0;
  ArgminSet argmin;
};

/// Draws unit directions until one exposes a face of diameter <= eps. For a
/// polytope a generic direction exposes a single vertex, so failure within
/// `max_draws` indicates a numerical problem and raises ConstructionFailure.
inline ExposingDirection exposing_functional(const ConvexBody& face, double eps, std::uint64_t seed,
                                             int max_draws = 64, double argmin_tol = 1e-12)
{
  if (!(eps > 0.0))
  {
    throw DomainError("exposing_functional: eps must be > 0");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const size_t n = face.dimension();
  for (int draw = 1; draw <= max_draws; ++draw)
  {
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v)
    {
      x = gauss(rng);
      s += x * x;
    }
    if (s == 0.0)
    {
      continue;
    }
    for (auto& x : v)
    {
      x /= std::sqrt(s);
    }
    Functional g(std::move(v));
    ArgminSet a = argmin_set(g, face, argmin_tol);
    if (a.diameter <= eps)
    {
      return {std::move(g), draw, std::move(a)};
    }
  }
  throw ConstructionFailure("exposing_functional: no exposing direction within the draw budget");
}

/// One tested t of the perturbation line search.
struct PerturbationStep
{
  double t = 0.0;
  double value = 0.0;           // m(f + t g)
  double value_bound = 0.0;     // m(f) + t m0(g)
  double max_g_on_active = 0.0; // max of phi(g, .) over M(f + t g)
  double diameter = 0.0;
};

struct PerturbationResult
{
  Functional f_star;
  double t = 0.0;
  Functional g;
  double m0 = 0.0;  // min of phi(g, .) over the face M(f)
  ArgminSet before;
  ArgminSet after;
  std::vector<PerturbationStep> steps;
};

struct PerturbationOptions
{
  int max_halvings = 60;
  int max_draws = 64;
  double argmin_tol = 1e-12;
  double value_bound_tol = 1e-12;  // slack for m(f+tg) <= m(f) + t m0(g), relative
  double g_bound_tol = 1e-9;       // slack for phi(g,.) <= m0(g) on M(f+tg)
};

/// Finds f* = f + t g within distance delta of f whose argmin set has diameter
/// <= eps. g exposes a subface of M(f) of diameter <= eps/2; t runs down the
/// schedule delta / (|g| 2^k). At every tested t the two consequences of the
/// construction are checked,
///
///   m(f + t g) <= m(f) + t m0(g)           and
///   phi(g, x) <= m0(g)  for x in M(f + t g),
///
/// and a violation raises PerturbationFailure, as does exhausting the schedule.
inline PerturbationResult mane_perturb(const Functional& f, const ConvexBody& body, double eps,
                                       double delta, std::uint64_t seed,
                                       const PerturbationOptions& opt = {})
{
  if (!(eps > 0.0) || !(delta > 0.0))
  {
    throw DomainError("mane_perturb: eps and delta must be > 0");
  }
  PerturbationResult res;
  res.before = argmin_set(f, body, opt.argmin_tol);
  const ConvexBody face = body.face(res.before.active_vertices);
  ExposingDirection ex = exposing_functional(face, eps / 2.0, seed, opt.max_draws, opt.argmin_tol);
  res.g = ex.g;
  res.m0 = ex.argmin.value;
  const double gnorm = res.g.norm();

  for (int k = 0; k <= opt.max_halvings; ++k)
  {
    double t = delta / (gnorm * std::ldexp(1.0, k));
    Functional candidate = f + t * res.g;
    while ((candidate - f).norm() > delta)
    {
      t = std::nextafter(t, 0.0);
      candidate = f + t * res.g;
    }
    const ArgminSet a = argmin_set(candidate, body, opt.argmin_tol);
    PerturbationStep step;
    step.t = t;
    step.value = a.value;
    step.value_bound = res.before.value + t * res.m0;
    step.max_g_on_active = -std::numeric_limits<double>::infinity();
    for (size_t i : a.active_vertices)
    {
      step.max_g_on_active = std::max(step.max_g_on_active, res.g(body.vertex(i)));
    }
    step.diameter = a.diameter;
    res.steps.push_back(step);
    if (step.value > step.value_bound + opt.value_bound_tol * (1.0 + std::abs(step.value_bound)))
    {
      throw PerturbationFailure("mane_perturb: m(f+tg) exceeds m(f) + t m0(g) at t=" +
                                std::to_string(t));
    }
    if (step.max_g_on_active > res.m0 + opt.g_bound_tol)
    {
      throw PerturbationFailure("mane_perturb: phi(g,.) exceeds m0(g) on M(f+tg) at t=" +
                                std::to_string(t));
    }
    if (a.diameter <= eps)
    {
      res.t = t;
      res.f_star = std::move(candidate);
      res.after = a;
      return res;
    }
  }
  throw PerturbationFailure("mane_perturb: schedule exhausted without shrinking the argmin set");
}

/// Fraction of uniformly random unit functionals whose argmin set has diameter <= eps.
inline double genericity_sweep(const ConvexBody& body, int sample_count, double eps,
                               std::uint64_t seed, double argmin_tol = 1e-12)
{
  if (sample_count < 1)
  {
    throw DomainError("genericity_sweep: sample_count must be >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int hits = 0;
  for (int s = 0; s < sample_count; ++s)
  {
    std::vector<double> v(body.dimension());
    double norm2 = 0.0;
    for (auto& x : v)
    {
      x = gauss(rng);
      norm2 += x * x;
    }
    for (auto& x : v)
    {
      x /= std::sqrt(norm2);
    }
    if (argmin_set(Functional(std::move(v)), body, argmin_tol).diameter <= eps)
    {
      ++hits;
    }
  }
  return double(hits) / sample_count;
}

/// Random polytope with integer vertex coordinates in [0, range]; integer
/// functionals then produce exact ties, i.e. degenerate argmin faces.
inline ConvexBody random_integer_polytope(size_t dimension, size_t vertex_count, int range,
                                          std::mt19937_64& rng)
{
  std::uniform_int_distribution<int> coord(0, range);
  std::vector<Point> v(vertex_count, Point(dimension));
  for (auto& p : v)
  {
    for (auto& c : p)
    {
      c = coord(rng);
    }
  }
  return ConvexBody(std::move(v));
}

namespace detail
{
inline std::vector<std::vector<double>> read_csv_rows(std::istream& is)
{
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line))
  {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
    {
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
    {
      try
      {
        size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos)
          throw std::invalid_argument(cell);
      }
      catch (const std::exception&)
      {
        throw DomainError("CSV line " + std::to_string(lineno) + ": not a number: '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}
}  // namespace detail

/// One vertex per line, comma separated; '#' starts a comment line.
inline ConvexBody read_polytope_csv(std::istream& is)
{
  auto rows = detail::read_csv_rows(is);
  return ConvexBody(std::move(rows));
}

/// A single row of coefficients.
inline Functional read_functional_csv(std::istream& is)
{
  auto rows = detail::read_csv_rows(is);
  if (rows.size() != 1)
  {
    throw DomainError("functional CSV must contain exactly one coefficient row");
  }
  return Functional(std::move(rows.front()));
}

}  // namespace finslerlab

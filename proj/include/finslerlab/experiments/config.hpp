#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "finslerlab/discrete_loop.hpp"
#include "finslerlab/error.hpp"
#include "finslerlab/finsler_metric.hpp"
#include "finslerlab/fourier_series.hpp"
#include "finslerlab/geodesic_solver.hpp"

namespace finslerlab::experiments
{
/// Flat key = value configuration. Lines are trimmed; '#' starts a comment.
/// Later assignments (including command-line overrides) replace earlier ones.
///
/// Fourier fields use the keys
///   <field>.offset = c
///   <field>.mode_kx,ky = cos_coeff,sin_coeff
/// for field in {g11, g12, g22, beta_x, beta_y, lambda, perturbation}.
class Config
{
public:
  static Config parse(std::istream& is)
  {
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line))
    {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos)
      {
        line.erase(hash);
      }
      line = trim(line);
      if (line.empty())
      {
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
      {
        throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty())
      {
        throw ConfigError("line " + std::to_string(lineno) + ": empty key");
      }
      c.set(key, trim(line.substr(eq + 1)));
    }
    return c;
  }

  static Config load(const std::string& path)
  {
    std::ifstream in(path);
    if (!in)
    {
      throw ConfigError("cannot open config file '" + path + "'");
    }
    return parse(in);
  }

  void set(const std::string& key, const std::string& value) { entries_[key] = value; }

  /// Applies "key=value".
  void apply_override(const std::string& assignment)
  {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty())
    {
      throw ConfigError("override must look like key=value: '" + assignment + "'");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string get_string(const std::string& key, const std::string& fallback) const
  {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const
  {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_double(key, it->second);
  }

  double get_double_in(const std::string& key, double fallback, double lo, double hi) const
  {
    const double v = get_double(key, fallback);
    if (!(v >= lo && v <= hi))
    {
      throw ConfigError(key + " = " + std::to_string(v) + " is outside [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
    }
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const
  {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : to_int(key, it->second);
  }

  long long get_int_in(const std::string& key, long long fallback, long long lo, long long hi) const
  {
    const long long v = get_int(key, fallback);
    if (v < lo || v > hi)
    {
      throw ConfigError(key + " = " + std::to_string(v) + " is outside [" + std::to_string(lo) +
                        ", " + std::to_string(hi) + "]");
    }
    return v;
  }

  /// Comma separated reals.
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const
  {
    auto it = entries_.find(key);
    if (it == entries_.end())
    {
      return fallback;
    }
    std::vector<double> out;
    for (const auto& part : split(it->second, ','))
    {
      out.push_back(to_double(key, part));
    }
    return out;
  }

  /// "p,q" for one class; "p,q; p,q; ..." for a list.
  std::vector<Winding> get_windings(const std::string& key, std::vector<Winding> fallback) const
  {
    auto it = entries_.find(key);
    if (it == entries_.end())
    {
      return fallback;
    }
    std::vector<Winding> out;
    for (const auto& item : split(it->second, ';'))
    {
      const auto pq = split(item, ',');
      if (pq.size() != 2)
      {
        throw ConfigError(key + ": expected 'p,q' but got '" + item + "'");
      }
      out.push_back({int(to_int(key, pq[0])), int(to_int(key, pq[1]))});
    }
    return out;
  }

  /// Collects <field>.offset and <field>.mode_kx,ky lines; `present` reports
  /// whether any line for the field exists.
  FourierSeries get_series(const std::string& field, double default_offset,
                           bool* present = nullptr) const
  {
    static const std::regex mode_key(R"(mode_(-?\d+),(-?\d+))");
    FourierSeries h(default_offset);
    bool any = false;
    const std::string prefix = field + ".";
    if (auto it = entries_.find(field); it != entries_.end())
    {
      h.set_offset(to_double(field, it->second));
      any = true;
    }
    for (auto it = entries_.lower_bound(prefix); it != entries_.end(); ++it)
    {
      if (it->first.compare(0, prefix.size(), prefix) != 0)
      {
        break;
      }
      any = true;
      const std::string rest = it->first.substr(prefix.size());
      std::smatch m;
      if (rest == "offset")
      {
        h.set_offset(to_double(it->first, it->second));
      }
      else if (std::regex_match(rest, m, mode_key))
      {
        const auto ab = split(it->second, ',');
        if (ab.size() != 2)
        {
          throw ConfigError(it->first + ": expected 'cos_coeff,sin_coeff'");
        }
        h.add_term({std::stoi(m[1]), std::stoi(m[2])}, to_double(it->first, ab[0]),
                   to_double(it->first, ab[1]));
      }
      else
      {
        throw ConfigError("unknown Fourier key '" + it->first + "'");
      }
    }
    if (present != nullptr)
    {
      *present = any;
    }
    return h;
  }

  static std::string trim(const std::string& s)
  {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
      return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

private:
  static std::vector<std::string> split(const std::string& s, char sep)
  {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, sep))
    {
      part = trim(part);
      if (!part.empty())
        out.push_back(part);
    }
    return out;
  }

  static double to_double(const std::string& key, const std::string& v)
  {
    try
    {
      size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size() || !std::isfinite(d))
        throw std::invalid_argument(v);
      return d;
    }
    catch (const std::exception&)
    {
      throw ConfigError(key + ": not a finite number: '" + v + "'");
    }
  }

  static long long to_int(const std::string& key, const std::string& v)
  {
    long long out = 0;
    const auto t = trim(v);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (ec != std::errc() || ptr != t.data() + t.size())
    {
      throw ConfigError(key + ": not an integer: '" + v + "'");
    }
    return out;
  }

  std::map<std::string, std::string> entries_;
};

/// Metric described by the config:
///   metric = euclidean | riemannian | randers
///   g11/g12/g22 (riemannian and randers), beta_x/beta_y (randers),
///   lambda (optional conformal factor applied last).
inline FinslerMetric metric_from_config(const Config& c)
{
  const std::string kind = c.get_string("metric", "euclidean");
  FinslerMetric base = FinslerMetric::euclidean();
  if (kind == "riemannian" || kind == "randers")
  {
    base = FinslerMetric::riemannian(c.get_series("g11", 1.0), c.get_series("g12", 0.0),
                                     c.get_series("g22", 1.0));
    if (kind == "randers")
    {
      base = FinslerMetric::randers(base, c.get_series("beta_x", 0.0), c.get_series("beta_y", 0.0));
    }
  }
  else if (kind != "euclidean")
  {
    throw ConfigError("metric must be euclidean, riemannian or randers, got '" + kind + "'");
  }
  bool has_lambda = false;
  const FourierSeries lambda = c.get_series("lambda", 1.0, &has_lambda);
  return has_lambda ? conformal_scale(base, lambda) : base;
}

inline SolverConfig solver_from_config(const Config& c, std::uint64_t seed)
{
  SolverConfig s;
  s.n = int(c.get_int_in("N", s.n, 32, 1 << 16));
  s.max_iters = int(c.get_int_in("max_iters", s.max_iters, 1, 10'000'000));
  s.initial_step = c.get_double_in("initial_step", s.initial_step, 1e-12, 1e6);
  s.shrink = c.get_double_in("shrink", s.shrink, 1e-3, 0.999);
  s.armijo = c.get_double_in("armijo", s.armijo, 1e-12, 0.5);
  s.grad_tol = c.get_double_in("grad_tol", s.grad_tol, 1e-300, 1.0);
  s.num_starts = int(c.get_int_in("num_starts", s.num_starts, 1, 100000));
  s.cluster_tol = c.get_double_in("cluster_tol", s.cluster_tol, 1e-12, 1.0);
  s.length_tol = c.get_double_in("length_tol", s.length_tol, 0.0, 1.0);
  s.jitter = c.get_double_in("jitter", s.jitter, 0.0, 0.5);
  s.threads = int(c.get_int_in("threads", s.threads, 0, 1024));
  s.seed = seed;
  return s;
}

}  // namespace finslerlab::experiments

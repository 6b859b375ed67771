#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "finslerlab/discrete_loop.hpp"
#include "finslerlab/error.hpp"
#include "finslerlab/experiments/config.hpp"
#include "finslerlab/finsler_metric.hpp"
#include "finslerlab/geodesic_solver.hpp"
#include "finslerlab/mane_engine.hpp"
#include "finslerlab/measure_bridge.hpp"
#include "finslerlab/sampling.hpp"

namespace finslerlab::experiments
{
using Json = nlohmann::ordered_json;

inline const std::vector<std::string>& experiment_ids()
{
  static const std::vector<std::string> ids{"uniqueness",    "cs-property", "speed-cap",
                                            "mane-polytope", "consistency", "semicontinuity"};
  return ids;
}

/// Records plus named pass/fail verdicts, in emission order.
struct Outcome
{
  std::vector<Json> records;
  std::vector<std::pair<std::string, bool>> verdicts;

  void verdict(std::string name, bool ok) { verdicts.emplace_back(std::move(name), ok); }
};

inline Json loop_json(const DiscreteLoop& loop)
{
  Json v = Json::array();
  for (const auto& p : loop.vertices())
  {
    v.push_back({p.x, p.y});
  }
  return {{"winding", {loop.winding().p, loop.winding().q}}, {"vertices", std::move(v)}};
}

/// Shortest decimal form that round-trips.
inline std::string fmt_t(double t)
{
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, t);
  return std::string(buf, r.ptr);
}

/// Multi-start minimizer sets of sqrt(1 + t h) F for each t, compared with a
/// brute-force scan over 1000 straight translates of the class.
inline Outcome run_uniqueness(const Config& c, std::uint64_t seed)
{
  Outcome out;
  const FinslerMetric base = metric_from_config(c);
  const Winding w = c.get_windings("gamma", {{1, 0}}).at(0);
  require_nontrivial(w);
  const SolverConfig solver = solver_from_config(c, seed);
  std::vector<double> ts = c.get_doubles("t", {0.0, 0.05, 0.1, 0.2});
  std::sort(ts.begin(), ts.end());
  bool has_h = false;
  FourierSeries h = c.get_series("perturbation", 0.0, &has_h);
  if (!has_h)
  {
    h = trough_bump_y(c.get_double("trough_center", 0.25));
  }
  const double min_spread_zero = c.get_double("uniqueness.min_spread_at_zero", 0.3);
  const double max_spread = c.get_double("uniqueness.max_spread", 1e-2);
  const double oracle_tol = c.get_double("uniqueness.oracle_tol", 0.02);
  const double length_rel_tol = c.get_double("uniqueness.length_rel_tol", 5e-3);
  const int scan = int(c.get_int_in("uniqueness.oracle_translates", 1000, 1, 1'000'000));

  const double glen = std::hypot(double(w.p), double(w.q));
  const double period = std::gcd(std::abs(w.p), std::abs(w.q)) / glen;
  const Vec2 normal{-w.q / glen, w.p / glen};

  std::vector<double> spreads;
  bool all_ok = true;
  for (double t : ts)
  {
    if (t < 0.0)
    {
      throw ConfigError("t values must be >= 0");
    }
    const FourierSeries lambda = FourierSeries(1.0) + t * h;
    if (!lambda.is_positive())
    {
      throw ConfigError("1 + t*perturbation is not positive for t = " + fmt_t(t));
    }
    const FinslerMetric metric = t == 0.0 ? base : conformal_scale(base, lambda);

    // Oracle: best straight translate.
    double oracle_len = std::numeric_limits<double>::infinity();
    double oracle_offset = 0.0;
    for (int k = 0; k < scan; ++k)
    {
      const double s = period * k / scan;
      const double l = length(metric, DiscreteLoop::straight(w, solver.n, normal * s));
      if (l < oracle_len)
      {
        oracle_len = l;
        oracle_offset = s;
      }
    }
    const DiscreteLoop oracle_loop = DiscreteLoop::straight(w, solver.n, normal * oracle_offset);

    Json rec{{"type", "run"}, {"experiment", "uniqueness"}, {"t", t}};
    try
    {
      const MinimizerReport rep = minimizer_set(metric, w, solver);
      int converged = 0;
      for (const auto& s : rep.starts)
        converged += s.converged ? 1 : 0;
      Json clusters = Json::array();
      for (const auto& cl : rep.clusters)
      {
        clusters.push_back({{"members", cl.members},
                            {"length", cl.length},
                            {"mean_height", mean_height(cl.representative)}});
      }
      const DiscreteLoop& best_rep = rep.clusters.front().representative;
      const double oracle_distance = loop_distance(best_rep, oracle_loop);
      rec["starts"] = solver.num_starts;
      rec["converged"] = converged;
      rec["kept"] = rep.minima.size();
      rec["clusters"] = rep.clusters.size();
      rec["spread"] = rep.spread;
      rec["best_length"] = rep.best_length;
      rec["oracle_offset"] = oracle_offset;
      rec["oracle_length"] = oracle_len;
      rec["oracle_distance"] = oracle_distance;
      rec["cluster_list"] = std::move(clusters);
      rec["loop"] = loop_json(best_rep);
      spreads.push_back(rep.spread);

      if (t == 0.0)
      {
        out.verdict("multiplicity_at_t=0", rep.spread >= min_spread_zero);
      }
      else
      {
        out.verdict("oracle_match_t=" + fmt_t(t),
                    oracle_distance <= oracle_tol &&
                        std::abs(rep.best_length - oracle_len) <= length_rel_tol * oracle_len);
      }
    }
    catch (const Error& e)
    {
      rec["error"] = e.what();
      all_ok = false;
      spreads.push_back(std::numeric_limits<double>::infinity());
    }
    out.records.push_back(std::move(rec));
  }
  out.verdict("all_solves_succeeded", all_ok);
  if (!ts.empty() && ts.back() > 0.0 && all_ok)
  {
    const Json& last = out.records.back();
    out.verdict("unique_at_t=" + fmt_t(ts.back()),
                last["clusters"].get<size_t>() == 1 && last["spread"].get<double>() <= max_spread);
  }
  bool monotone = true;
  for (size_t i = 1; i < spreads.size(); ++i)
  {
    monotone = monotone && spreads[i] <= spreads[i - 1];
  }
  out.verdict("spread_nonincreasing", monotone && all_ok);
  return out;
}

/// Cauchy-Schwarz gap of random loops before and after constant-speed resampling.
inline Outcome run_cs_property(const Config& c, std::uint64_t seed)
{
  Outcome out;
  const int trials = int(c.get_int_in("trials", 10000, 1, 10'000'000));
  const int n = int(c.get_int_in("loop_N", 64, 8, 1 << 16));
  const sampling::MetricFamily families[] = {sampling::MetricFamily::flat,
                                             sampling::MetricFamily::randers,
                                             sampling::MetricFamily::conformal,
                                             sampling::MetricFamily::riemannian};
  struct Agg
  {
    int count = 0;
    double min_gap = std::numeric_limits<double>::infinity();
    double max_rel_after = 0.0;
  } agg[4];
  std::mt19937_64 rng(seed);
  for (int i = 0; i < trials; ++i)
  {
    const int fam = i % 4;
    const FinslerMetric metric = sampling::random_metric(families[fam], rng);
    const DiscreteLoop loop = sampling::random_loop(rng, sampling::random_winding(rng), n);
    const double gap = cs_gap(metric, loop);
    const DiscreteLoop re = reparametrize_constant_speed(metric, loop);
    const double rel = cs_gap(metric, re) / action(metric, re);
    agg[fam].count++;
    agg[fam].min_gap = std::min(agg[fam].min_gap, gap);
    agg[fam].max_rel_after = std::max(agg[fam].max_rel_after, rel);
  }
  double min_gap = std::numeric_limits<double>::infinity(), max_rel = 0.0;
  for (int f = 0; f < 4; ++f)
  {
    if (agg[f].count == 0)
      continue;
    out.records.push_back({{"type", "run"},
                           {"experiment", "cs-property"},
                           {"family", sampling::family_name(families[f])},
                           {"loops", agg[f].count},
                           {"min_gap", agg[f].min_gap},
                           {"max_relative_gap_after_reparametrization", agg[f].max_rel_after}});
    min_gap = std::min(min_gap, agg[f].min_gap);
    max_rel = std::max(max_rel, agg[f].max_rel_after);
  }
  out.verdict("cs_gap_nonnegative", min_gap >= -1e-9);
  out.verdict("constant_speed_after_reparametrization", max_rel <= 1e-6);
  return out;
}

/// Shortest loops per class and the a-priori speed cap C0 = c_F^2 * min l_g.
inline Outcome run_speed_cap(const Config& c, std::uint64_t seed)
{
  Outcome out;
  const FinslerMetric metric = metric_from_config(c);
  const auto classes = c.get_windings("classes", {{1, 0}, {1, 1}, {2, 1}, {3, 4}});
  SolverConfig solver = solver_from_config(c, seed);
  bool all = true;
  for (const Winding& w : classes)
  {
    require_nontrivial(w);
    const DescentResult r = shortest_loop(metric, w, solver);
    const int n = r.loop.size();
    double max_speed = 0.0;
    for (int i = 0; i < n; ++i)
    {
      max_speed = std::max(max_speed, norm(r.loop.segment(i) * double(n)));
    }
    const double c0 = speed_bound(metric, w);
    const bool ok = verify_speed_cap(metric, r.loop, w);
    all = all && ok && r.converged;
    out.records.push_back({{"type", "run"},
                           {"experiment", "speed-cap"},
                           {"class", {w.p, w.q}},
                           {"converged", r.converged},
                           {"length", length(metric, r.loop)},
                           {"max_speed", max_speed},
                           {"C0", c0},
                           {"within_cap", ok},
                           {"loop", loop_json(r.loop)}});
  }
  out.verdict("speed_cap_all_minimizers", all);
  return out;
}

/// Exhaustive exact enumeration of the minimizing vertices (tolerance 0).
inline std::vector<size_t> enumerate_exact_argmin(const Functional& f, const ConvexBody& body)
{
  std::vector<double> vals;
  for (const auto& v : body.vertices())
    vals.push_back(f(v));
  const double m = *std::min_element(vals.begin(), vals.end());
  std::vector<size_t> idx;
  for (size_t i = 0; i < vals.size(); ++i)
    if (vals[i] == m)
      idx.push_back(i);
  return idx;
}

/// Argmin-shrinking perturbation on random integer polytopes, or on a polytope
/// read from mane.polytope_file.
inline Outcome run_mane_polytope(const Config& c, std::uint64_t seed)
{
  Outcome out;
  const int trials = int(c.get_int_in("mane.trials", 100, 1, 1'000'000));
  const int max_dim = int(c.get_int_in("mane.n", 8, 1, 64));
  const int max_vertices = int(c.get_int_in("mane.vertices", 40, 1, 100000));
  const int range = int(c.get_int_in("mane.range", 4, 1, 1000));
  const double eps_rel = c.get_double_in("mane.epsilon", 1e-3, 1e-12, 1.0);
  const double delta = c.get_double_in("mane.delta", 0.1, 1e-12, 1e12);
  std::optional<ConvexBody> fixed_body;
  std::optional<Functional> fixed_f;
  if (c.has("mane.polytope_file"))
  {
    std::ifstream in(c.get_string("mane.polytope_file", ""));
    if (!in)
      throw ConfigError("cannot open mane.polytope_file");
    fixed_body = read_polytope_csv(in);
  }
  if (c.has("mane.functional_file"))
  {
    std::ifstream in(c.get_string("mane.functional_file", ""));
    if (!in)
      throw ConfigError("cannot open mane.functional_file");
    fixed_f = read_functional_csv(in);
  }

  std::mt19937_64 rng(seed);
  int successes = 0;
  bool diam_ok = true, dist_ok = true, t_ok = true, oracle_ok = true;
  for (int trial = 0; trial < trials; ++trial)
  {
    std::uniform_int_distribution<int> dim_d(1, max_dim);
    const size_t n = fixed_body ? fixed_body->dimension() : size_t(dim_d(rng));
    std::uniform_int_distribution<int> cnt_d(std::min<int>(max_vertices, int(n) + 1), max_vertices);
    const ConvexBody body =
        fixed_body ? *fixed_body : random_integer_polytope(n, size_t(cnt_d(rng)), range, rng);
    // Degenerate starting functionals: 0, e_1, e_1 + e_2.
    Functional f = Functional::zero(n);
    if (fixed_f)
    {
      f = *fixed_f;
    }
    else if (trial % 3 != 0)
    {
      std::vector<double> coef(n, 0.0);
      coef[0] = 1.0;
      if (trial % 3 == 2 && n > 1)
        coef[1] = 1.0;
      f = Functional(coef);
    }
    const double diam_k = body.diameter();
    const double eps = eps_rel * (diam_k > 0.0 ? diam_k : 1.0);
    Json rec{{"type", "run"},       {"experiment", "mane-polytope"}, {"trial", trial},
             {"n", n},              {"vertices", body.size()},       {"diam_K", diam_k},
             {"epsilon", eps}};
    try
    {
      const PerturbationResult r = mane_perturb(f, body, eps, delta, rng());
      const double dist = (r.f_star - f).norm();
      const double t_max = delta / r.g.norm();
      const bool agree =
          enumerate_exact_argmin(f, body) == argmin_set(f, body, 0.0).active_vertices &&
          enumerate_exact_argmin(r.f_star, body) == argmin_set(r.f_star, body, 0.0).active_vertices;
      ++successes;
      diam_ok = diam_ok && r.after.diameter <= eps;
      dist_ok = dist_ok && dist <= delta;
      t_ok = t_ok && r.t <= t_max;
      oracle_ok = oracle_ok && agree;
      rec["success"] = true;
      rec["diam_before"] = r.before.diameter;
      rec["diam_after"] = r.after.diameter;
      rec["t"] = r.t;
      rec["t_max"] = t_max;
      rec["distance"] = dist;
      rec["line_search_steps"] = r.steps.size();
      rec["oracle_agrees"] = agree;
    }
    catch (const Error& e)
    {
      rec["success"] = false;
      rec["error"] = e.what();
    }
    out.records.push_back(std::move(rec));
  }
  out.verdict("all_trials_succeeded", successes == trials);
  out.verdict("diameter_within_epsilon", diam_ok);
  out.verdict("perturbation_within_delta", dist_ok && t_ok);
  out.verdict("argmin_matches_enumeration", oracle_ok);
  return out;
}

/// A_{sqrt(lambda) F}(c) against phi(lambda, pi_*^F mu_c) on random triples.
inline Outcome run_consistency(const Config& c, std::uint64_t seed)
{
  Outcome out;
  const int trials = int(c.get_int_in("trials", 100, 1, 1'000'000));
  const int res = int(c.get_int_in("resolution", 256, 8, 1 << 14));
  const int n = int(c.get_int_in("loop_N", 128, 8, 1 << 16));
  std::mt19937_64 rng(seed);
  bool gap_ok = true, mass_ok = true, const_ok = true;
  for (int trial = 0; trial < trials; ++trial)
  {
    const auto fam = static_cast<sampling::MetricFamily>(trial % 4);
    const FinslerMetric metric = sampling::random_metric(fam, rng);
    const ConformalFactor lambda = sampling::random_factor(rng);
    const DiscreteLoop loop = sampling::random_loop(rng, sampling::random_winding(rng), n);
    const LoopMeasure mu = loop_measure(loop, std::numeric_limits<double>::infinity());
    const GridMeasure push = pushforward(metric, mu, res);
    const double a = action(metric, loop);
    const double mass_err = std::abs(push.total_mass() - a);
    const double gap = action_consistency(metric, lambda, loop, res);
    const double bound = consistency_bound(lambda, push.total_mass(), res);
    std::uniform_real_distribution<double> kappa_d(0.25, 4.0);
    const double kappa = kappa_d(rng);
    const double const_gap = action_consistency(metric, FourierSeries(kappa), loop, res);
    gap_ok = gap_ok && gap <= bound;
    mass_ok = mass_ok && mass_err <= 1e-12 * std::max(1.0, a);
    const_ok = const_ok && const_gap <= 1e-12 * std::max(1.0, kappa * a);
    out.records.push_back({{"type", "run"},
                           {"experiment", "consistency"},
                           {"trial", trial},
                           {"family", sampling::family_name(fam)},
                           {"action", a},
                           {"mass_error", mass_err},
                           {"gap", gap},
                           {"bound", bound},
                           {"constant_factor", kappa},
                           {"constant_gap", const_gap}});
  }
  out.verdict("gap_within_quantization_bound", gap_ok);
  out.verdict("mass_identity", mass_ok);
  out.verdict("constant_factor_exact", const_ok);
  return out;
}

/// m(f + 2^-k p) and diam M(f + 2^-k p) on random integer polytopes.
inline Outcome run_semicontinuity(const Config& c, std::uint64_t seed)
{
  Outcome out;
  const int trials = int(c.get_int_in("trials", 100, 1, 1'000'000));
  const int kmax = int(c.get_int_in("kmax", 20, 1, 60));
  const int tail_from = int(c.get_int_in("tail_from", 10, 1, 60));
  const int max_dim = int(c.get_int_in("mane.n", 8, 1, 64));
  const int max_vertices = int(c.get_int_in("mane.vertices", 40, 2, 100000));
  const int range = int(c.get_int_in("mane.range", 4, 1, 1000));
  std::mt19937_64 rng(seed);
  std::vector<double> scales;
  for (int k = 1; k <= kmax; ++k)
    scales.push_back(std::ldexp(1.0, -k));
  const double small = std::ldexp(1.0, -tail_from);
  bool monotone = true, no_violation = true, bounded = true;
  for (int trial = 0; trial < trials; ++trial)
  {
    std::uniform_int_distribution<int> dim_d(1, max_dim);
    const size_t n = size_t(dim_d(rng));
    std::uniform_int_distribution<int> cnt_d(std::min<int>(max_vertices, int(n) + 1), max_vertices);
    const ConvexBody body = random_integer_polytope(n, size_t(cnt_d(rng)), range, rng);
    std::vector<double> fc(n, 0.0);
    if (trial % 2 == 1)
      fc[0] = 1.0;
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> pc(n);
    for (auto& x : pc)
      x = g(rng);
    const Functional p(pc);
    const SemicontinuityReport rep =
        semicontinuity_probe(Functional(fc), body, {p}, scales, small);
    double rmax = 0.0;
    for (const auto& v : body.vertices())
      rmax = std::max(rmax, std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)));
    bool b = true;
    for (size_t i = 0; i < scales.size(); ++i)
      b = b && rep.value_deviation[i] <= scales[i] * p.norm() * rmax * (1.0 + 1e-12) + 1e-15;
    monotone = monotone && rep.tail_monotone;
    no_violation = no_violation && rep.violations == 0;
    bounded = bounded && b;
    out.records.push_back({{"type", "run"},
                           {"experiment", "semicontinuity"},
                           {"trial", trial},
                           {"n", n},
                           {"vertices", body.size()},
                           {"base_diameter", rep.base_diameter},
                           {"tail_max_deviation", rep.tail_max_deviation},
                           {"final_deviation", rep.value_deviation.back()},
                           {"tail_monotone", rep.tail_monotone},
                           {"violations", rep.violations}});
  }
  out.verdict("deviation_monotone_in_tail", monotone);
  out.verdict("deviation_within_lipschitz_envelope", bounded);
  out.verdict("no_diameter_violations", no_violation);
  return out;
}

inline Outcome run_experiment(const std::string& id, const Config& c, std::uint64_t seed)
{
  if (id == "uniqueness")
    return run_uniqueness(c, seed);
  if (id == "cs-property")
    return run_cs_property(c, seed);
  if (id == "speed-cap")
    return run_speed_cap(c, seed);
  if (id == "mane-polytope")
    return run_mane_polytope(c, seed);
  if (id == "consistency")
    return run_consistency(c, seed);
  if (id == "semicontinuity")
    return run_semicontinuity(c, seed);
  throw ConfigError("unknown experiment '" + id + "'");
}

/// Runs the configured experiment and writes the JSON-lines report: a
/// timestamp header, the config echo, one record per run and a summary.
/// Returns 0 iff every verdict passed. Configuration errors propagate as
/// ConfigError before anything is written.
inline int run(const Config& c, std::ostream& report, const std::string& timestamp)
{
  const std::string id = c.get_string("experiment", "");
  if (std::find(experiment_ids().begin(), experiment_ids().end(), id) == experiment_ids().end())
  {
    throw ConfigError("experiment must be one of uniqueness, cs-property, speed-cap, "
                      "mane-polytope, consistency, semicontinuity (got '" + id + "')");
  }
  const auto seed = static_cast<std::uint64_t>(c.get_int_in("seed", 1, 0, INT64_MAX));
  // Validate shared keys up front so errors surface before any output.
  metric_from_config(c);
  solver_from_config(c, seed);

  Outcome outcome;
  std::string error;
  try
  {
    outcome = run_experiment(id, c, seed);
  }
  catch (const ConfigError&)
  {
    throw;
  }
  catch (const Error& e)
  {
    error = e.what();
  }

  report << Json{{"type", "header"}, {"tool", "finslerlab"}, {"timestamp", timestamp}}.dump()
         << '\n';
  Json entries = Json::object();
  for (const auto& [k, v] : c.entries())
    entries[k] = v;
  report << Json{{"type", "config"}, {"experiment", id}, {"seed", seed}, {"entries", entries}}.dump()
         << '\n';
  for (const auto& r : outcome.records)
  {
    report << r.dump() << '\n';
  }
  Json verdicts = Json::object();
  bool passed = error.empty() && !outcome.verdicts.empty();
  for (const auto& [name, ok] : outcome.verdicts)
  {
    verdicts[name] = ok;
    passed = passed && ok;
  }
  Json summary{{"type", "summary"}, {"experiment", id}, {"verdicts", verdicts}, {"passed", passed}};
  if (!error.empty())
    summary["error"] = error;
  report << summary.dump() << '\n';
  return passed ? 0 : 1;
}

/// Extracts CSV tables from a report:
///   spread.csv       t,spread               (uniqueness runs)
///   mane_trials.csv  trial,diam_before,diam_after  (mane-polytope runs)
///   loops/loop_<k>.csv  vertex dumps of every record carrying a loop
/// Throws Error on malformed input.
inline void emit_plot_data(std::istream& report, const std::filesystem::path& dir)
{
  std::vector<Json> lines;
  std::string line;
  int lineno = 0;
  while (std::getline(report, line))
  {
    ++lineno;
    if (Config::trim(line).empty())
      continue;
    try
    {
      lines.push_back(Json::parse(line));
    }
    catch (const Json::exception& e)
    {
      throw Error("report line " + std::to_string(lineno) + " is not valid JSON: " + e.what());
    }
    if (!lines.back().is_object() || !lines.back().contains("type"))
    {
      throw Error("report line " + std::to_string(lineno) + " is not a report record");
    }
  }
  std::filesystem::create_directories(dir / "loops");
  std::ofstream spread(dir / "spread.csv"), mane(dir / "mane_trials.csv");
  spread << "t,spread\n";
  mane << "trial,diam_before,diam_after\n";
  int loop_count = 0;
  try
  {
    for (const auto& rec : lines)
    {
      if (rec["type"] != "run")
        continue;
      const std::string exp = rec.value("experiment", "");
      if (exp == "uniqueness" && rec.contains("spread"))
      {
        spread << fmt_t(rec["t"].get<double>()) << ',' << fmt_t(rec["spread"].get<double>()) << '\n';
      }
      if (exp == "mane-polytope" && rec.value("success", false))
      {
        mane << rec["trial"].get<int>() << ',' << fmt_t(rec["diam_before"].get<double>()) << ','
             << fmt_t(rec["diam_after"].get<double>()) << '\n';
      }
      if (rec.contains("loop"))
      {
        const auto& l = rec["loop"];
        std::vector<Vec2> v;
        for (const auto& p : l["vertices"])
          v.push_back({p[0].get<double>(), p[1].get<double>()});
        const DiscreteLoop loop(std::move(v), {l["winding"][0].get<int>(), l["winding"][1].get<int>()});
        std::ofstream f(dir / "loops" / ("loop_" + std::to_string(loop_count++) + ".csv"));
        write_loop_csv(f, loop);
      }
    }
  }
  catch (const Json::exception& e)
  {
    throw Error(std::string("malformed report record: ") + e.what());
  }
}

}  // namespace finslerlab::experiments

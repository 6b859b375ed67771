#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "finslerlab/geodesic_solver.hpp"
#include "finslerlab/sampling.hpp"

using namespace finslerlab;

namespace
{
// 1 + a cos^2(2 pi y) = (1 + a/2) + (a/2) cos(4 pi y): troughs at y = 0.25, 0.75.
FinslerMetric two_trough_metric(double a)
{
  return conformal_scale(FinslerMetric::euclidean(),
                         FourierSeries(1.0 + 0.5 * a).add_term({0, 2}, 0.5 * a, 0.0));
}

FinslerMetric one_trough_metric(double t)
{
  return conformal_scale(FinslerMetric::euclidean(), FourierSeries(1.0) + t * trough_bump_y(0.25));
}

DiscreteLoop horizontal(double y, int n = 64) { return DiscreteLoop::straight({1, 0}, n, {0.0, y}); }

// Doubles N by inserting segment midpoints.
DiscreteLoop refine(const DiscreteLoop& c)
{
  std::vector<Vec2> v;
  for (int i = 0; i < c.size(); ++i)
  {
    v.push_back(c.vertex(i));
    v.push_back(c.midpoint(i));
  }
  return DiscreteLoop(std::move(v), c.winding());
}

SolverConfig quick(int starts = 12)
{
  SolverConfig cfg;
  cfg.num_starts = starts;
  cfg.n = 64;
  return cfg;
}
}  // namespace

TEST(ReferenceLength, Examples)
{
  EXPECT_EQ(min_reference_length({1, 0}), 1.0);
  EXPECT_EQ(min_reference_length({3, 4}), 5.0);
  EXPECT_NEAR(min_reference_length({1, 1}), 1.41421356, 1e-8);
  EXPECT_THROW(min_reference_length({0, 0}), DegenerateLoopError);
}

TEST(SpeedBound, Examples)
{
  EXPECT_DOUBLE_EQ(speed_bound(FinslerMetric::euclidean(), {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(speed_bound(FinslerMetric::euclidean(), {3, 4}), 5.0);
  EXPECT_NEAR(speed_bound(FinslerMetric::randers_constant(0.5, 0.0), {1, 0}), 4.0, 1e-8);
}

TEST(Gradient, MatchesCentralDifferences)
{
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 12; ++trial)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(trial % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 32);
    std::vector<Vec2> g;
    const double a = action_gradient(m, c, g);
    EXPECT_NEAR(a, action(m, c), 1e-13 * a);
    const double h = 1e-6;
    for (int i = 0; i < c.size(); i += 5)
    {
      auto v = c.vertices();
      v[i].y += h;
      const double ap = action(m, DiscreteLoop(v, c.winding()));
      v[i].y -= 2 * h;
      const double am = action(m, DiscreteLoop(v, c.winding()));
      const double fd = (ap - am) / (2 * h);
      EXPECT_NEAR(g[i].y, fd, 1e-5 * std::max({std::abs(fd), std::abs(g[i].y), 1e-3}));
    }
  }
}

TEST(CyclicTridiagonal, SolvesPreconditionerSystem)
{
  const int n = 10;
  std::vector<double> rhs(n);
  for (int i = 0; i < n; ++i)
    rhs[i] = std::sin(i) + 0.3;
  const double diag = 2.5, off = 1.0;
  const auto x = detail::solve_cyclic_tridiagonal(diag, off, rhs);
  for (int i = 0; i < n; ++i)
  {
    const double ax = diag * x[i] - off * (x[(i + 1) % n] + x[(i + n - 1) % n]);
    EXPECT_NEAR(ax, rhs[i], 1e-12);
  }
}

TEST(ShortestLoop, FlatClasses)
{
  SolverConfig cfg;
  for (Winding w : {Winding{1, 0}, Winding{1, 1}})
  {
    const auto r = shortest_loop(FinslerMetric::euclidean(), w, cfg);
    EXPECT_TRUE(r.converged);
    const double l = length(FinslerMetric::euclidean(), r.loop);
    EXPECT_NEAR(l, std::hypot(w.p, w.q), 5e-3 * std::hypot(w.p, w.q));
    // Collinearity: distance of vertices to the line through vertex 0.
    const Vec2 dir = w.as_vector() * (1.0 / std::hypot(w.p, w.q));
    for (int i = 0; i < r.loop.size(); ++i)
    {
      const Vec2 d = r.loop.vertex(i) - r.loop.vertex(0);
      EXPECT_LE(std::abs(d.x * dir.y - d.y * dir.x), 1e-3);
    }
  }
}

TEST(ShortestLoop, ConformalTroughs)
{
  // Oracle: horizontal loops at height y have length sqrt(1 + 0.5 cos^2(2 pi y));
  // brute force over 1000 heights puts the minimum 1.0 at y = 0.25 and 0.75.
  double best = 1e9;
  for (int k = 0; k < 1000; ++k)
  {
    const double y = k / 1000.0;
    best = std::min(best, std::sqrt(1 + 0.5 * std::pow(std::cos(2 * std::numbers::pi * y), 2)));
  }
  ASSERT_NEAR(best, 1.0, 1e-12);
  SolverConfig cfg;
  const auto m = two_trough_metric(0.5);
  const auto r = shortest_loop(m, {1, 0}, cfg);
  EXPECT_TRUE(r.converged);
  const double h = mean_height(r.loop);
  EXPECT_LE(std::min(std::abs(h - 0.25), std::abs(h - 0.75)), 0.02);
  EXPECT_NEAR(length(m, r.loop), 1.0, 5e-3);
}

TEST(ShortestLoop, ActionTraceIsNonIncreasing)
{
  std::mt19937_64 rng(2);
  SolverConfig cfg = quick();
  for (int trial = 0; trial < 6; ++trial)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(trial % 4), rng);
    const auto r = shortest_loop(m, sampling::random_winding(rng), cfg);
    for (size_t i = 1; i < r.action_trace.size(); ++i)
    {
      // Steps in the rounding regime may move by the rounding level of A.
      EXPECT_LE(r.action_trace[i], r.action_trace[i - 1] * (1 + 1e-14));
    }
    EXPECT_LE(r.final_action, r.initial_action);
  }
}

TEST(ShortestLoop, RandersClassLengthsShiftByClosedForm)
{
  const double b = 0.3;
  const auto m = FinslerMetric::randers_constant(b, 0.0);
  SolverConfig cfg;
  for (Winding w : {Winding{1, 0}, Winding{2, 1}})
  {
    const double plus = length(m, shortest_loop(m, w, cfg).loop);
    const double minus = length(m, shortest_loop(m, -w, cfg).loop);
    EXPECT_NEAR(plus - minus, 2 * b * w.p, 1e-2);
  }
}

TEST(ShortestLoop, RefinementConsistency)
{
  SolverConfig coarse = quick();
  SolverConfig fine = coarse;
  fine.n = 128;
  for (const auto& m : {FinslerMetric::randers_constant(0.2, 0.1), two_trough_metric(0.5)})
  {
    const auto a = shortest_loop(m, {1, 1}, coarse);
    const auto b = shortest_loop(m, {1, 1}, fine, refine(a.loop));
    const double la = length(m, a.loop), lb = length(m, b.loop);
    EXPECT_LE(std::abs(la - lb), 5e-3 * lb);
  }
}

TEST(ShortestLoop, RejectsInitialLoopOfOtherClass)
{
  EXPECT_THROW(shortest_loop(FinslerMetric::euclidean(), {1, 0}, quick(), DiscreteLoop::straight({0, 1}, 64)),
               MalformedLoopError);
}

TEST(LoopDistance, Examples)
{
  EXPECT_EQ(loop_distance(horizontal(0.1), horizontal(0.1)), 0.0);
  EXPECT_NEAR(loop_distance(horizontal(0.1), horizontal(0.4)), 0.3, 1e-12);
  EXPECT_NEAR(loop_distance(horizontal(0.1), horizontal(0.7)), 0.4, 1e-12);
  EXPECT_NEAR(loop_distance(horizontal(0.1), horizontal(0.1).cyclic_shift(5)), 0.0, 1e-12);
  EXPECT_THROW(loop_distance(horizontal(0.1), DiscreteLoop::straight({0, 1}, 64)), DomainError);
}

TEST(MinimizerSet, FlatTorusWitnessesContinuum)
{
  SolverConfig cfg;
  cfg.num_starts = 50;
  const auto rep = minimizer_set(FinslerMetric::euclidean(), {1, 0}, cfg);
  EXPECT_GE(rep.spread, 0.3);
  EXPECT_NEAR(rep.best_length, 1.0, 1e-9);
}

TEST(MinimizerSet, SingleStartHasZeroSpread)
{
  const auto rep = minimizer_set(FinslerMetric::euclidean(), {1, 0}, quick(1));
  EXPECT_EQ(rep.spread, 0.0);
  EXPECT_EQ(rep.clusters.size(), 1u);
}

TEST(MinimizerSet, UniqueTroughGivesOneCluster)
{
  const auto rep = minimizer_set(one_trough_metric(0.5), {1, 0}, quick());
  EXPECT_EQ(rep.clusters.size(), 1u);
  EXPECT_LE(rep.spread, 1e-2);
  EXPECT_NEAR(mean_height(rep.clusters.front().representative), 0.25, 0.02);
}

TEST(MinimizerSet, SymmetricBumpKeepsTwoMinimizers)
{
  // cos^2(2 pi (y - 0.25)) has period 1/2: its troughs at y = 0 and 0.5 are
  // equally deep, so the perturbation does not select a single loop.
  const auto m = conformal_scale(FinslerMetric::euclidean(),
                                 FourierSeries(1.1).add_term({0, 2}, -0.1, 0.0));
  const auto rep = minimizer_set(m, {1, 0}, quick(24));
  ASSERT_EQ(rep.clusters.size(), 2u);
  EXPECT_NEAR(rep.spread, 0.5, 1e-3);
}

TEST(MinimizerSet, ReportInvariants)
{
  const SolverConfig cfg = quick();
  const auto m = one_trough_metric(0.2);
  const auto rep = minimizer_set(m, {1, 0}, cfg);
  for (const auto& r : rep.minima)
  {
    EXPECT_LE(r.gradient_norm, cfg.grad_tol);
    EXPECT_LE(length(m, r.loop), rep.best_length * (1 + cfg.length_tol));
    EXPECT_TRUE(verify_speed_cap(m, r.loop, {1, 0}));
    EXPECT_LE(cs_gap(m, r.loop), 1e-6 * action(m, r.loop));
  }
  int members = 0;
  for (const auto& c : rep.clusters)
    members += c.members;
  EXPECT_EQ(size_t(members), rep.minima.size());
}

TEST(MinimizerSet, ScalingEquivariance)
{
  const double kappa = 1.7;
  const SolverConfig cfg = quick();
  const auto m = two_trough_metric(0.5);
  const auto scaled = conformal_scale(m, FourierSeries(kappa * kappa));
  const auto a = minimizer_set(m, {1, 0}, cfg);
  const auto b = minimizer_set(scaled, {1, 0}, cfg);
  ASSERT_EQ(a.clusters.size(), b.clusters.size());
  for (size_t i = 0; i < a.clusters.size(); ++i)
  {
    EXPECT_LE(loop_distance(a.clusters[i].representative, b.clusters[i].representative), cfg.cluster_tol);
    EXPECT_NEAR(b.clusters[i].length, kappa * a.clusters[i].length, 1e-6 * b.clusters[i].length);
  }
}

TEST(MinimizerSet, IndependentOfThreadCount)
{
  SolverConfig one = quick(), many = quick();
  one.threads = 1;
  many.threads = 4;
  const auto m = one_trough_metric(0.1);
  const auto a = minimizer_set(m, {1, 0}, one);
  const auto b = minimizer_set(m, {1, 0}, many);
  ASSERT_EQ(a.minima.size(), b.minima.size());
  EXPECT_EQ(a.spread, b.spread);
  for (size_t i = 0; i < a.minima.size(); ++i)
    EXPECT_EQ(a.minima[i].loop.vertices().front().y, b.minima[i].loop.vertices().front().y);
}

TEST(SpeedCap, Examples)
{
  SolverConfig cfg;
  const auto e = FinslerMetric::euclidean();
  EXPECT_TRUE(verify_speed_cap(e, shortest_loop(e, {1, 0}, cfg).loop, {1, 0}));
  const auto r = FinslerMetric::randers_constant(0.5, 0.0);
  EXPECT_TRUE(verify_speed_cap(r, shortest_loop(r, {1, 0}, cfg).loop, {1, 0}));
  auto v = horizontal(0.0, 16).vertices();
  v[3].x += 9.0 / 16;  // one segment at speed 10, the next one backwards
  EXPECT_FALSE(verify_speed_cap(e, DiscreteLoop(v, {1, 0}), {1, 0}));
}

TEST(SolverConfig, Validation)
{
  SolverConfig c;
  c.n = 16;
  EXPECT_THROW(c.validate(), DomainError);
  c = SolverConfig{};
  c.grad_tol = 0;
  EXPECT_THROW(c.validate(), DomainError);
}

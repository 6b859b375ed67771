#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "finslerlab/discrete_loop.hpp"
#include "finslerlab/sampling.hpp"

using namespace finslerlab;

namespace
{
// Horizontal loop in class (2,0) whose first half moves at speed 1 and second
// half at speed 3 (16 vertices, 8 segments each).
DiscreteLoop one_and_three_loop()
{
  std::vector<Vec2> v;
  double x = 0.0;
  for (int i = 0; i < 16; ++i)
  {
    v.push_back({x, 0.5});
    x += (i < 8 ? 1.0 : 3.0) / 16.0;
  }
  // Total displacement 0.5 + 1.5 = 2: class (2,0).
  return DiscreteLoop(std::move(v), {2, 0});
}

// Direct-summation oracle for Randers with constant beta.
double randers_length_oracle(const DiscreteLoop& c, double bx, double by)
{
  double l = 0.0;
  for (int i = 0; i < c.size(); ++i)
  {
    const Vec2 d = c.segment(i);
    l += std::hypot(d.x, d.y) + bx * d.x + by * d.y;
  }
  return l;
}
}  // namespace

TEST(WindingClass, Examples)
{
  EXPECT_EQ(winding_class(DiscreteLoop::straight({1, 0}, 8)), (Winding{1, 0}));
  std::vector<Vec2> lift;
  for (int i = 0; i <= 8; ++i)
    lift.push_back(Vec2{0.3, 0.7} + Vec2{2.0, 1.0} * (i / 8.0));
  EXPECT_EQ(winding_class(std::span<const Vec2>(lift)), (Winding{2, 1}));
  const std::vector<Vec2> constant(9, Vec2{0.4, 0.4});
  const Winding zero = winding_class(std::span<const Vec2>(constant));
  EXPECT_TRUE(zero.trivial());
  EXPECT_THROW(require_nontrivial(zero), DegenerateLoopError);
}

TEST(WindingClass, ClosureViolationIsMalformed)
{
  std::vector<Vec2> lift;
  for (int i = 0; i <= 8; ++i)
    lift.push_back({i / 8.0, 0.0});
  lift.back().x += 1e-6;
  EXPECT_THROW(winding_class(std::span<const Vec2>(lift)), MalformedLoopError);
}

TEST(DiscreteLoop, RequiresEightVertices)
{
  EXPECT_THROW(DiscreteLoop::straight({1, 0}, 7), MalformedLoopError);
}

TEST(Length, Examples)
{
  const auto e = FinslerMetric::euclidean();
  EXPECT_NEAR(length(e, DiscreteLoop::straight({1, 0}, 32)), 1.0, 1e-15);
  EXPECT_NEAR(length(e, DiscreteLoop::straight({3, 4}, 32)), 5.0, 1e-14);
  const auto r = FinslerMetric::randers_constant(0.5, 0.0);
  const auto c = DiscreteLoop::straight({1, 0}, 32);
  EXPECT_NEAR(length(r, c), 1.5, 1e-14);
  EXPECT_NEAR(length(r, c.reversed()), 0.5, 1e-14);
}

TEST(Length, RandersMatchesDirectSummation)
{
  std::mt19937_64 rng(1);
  const auto r = FinslerMetric::randers_constant(0.2, -0.3);
  for (int i = 0; i < 50; ++i)
  {
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 40);
    EXPECT_NEAR(length(r, c), randers_length_oracle(c, 0.2, -0.3), 1e-13);
  }
}

TEST(Action, Examples)
{
  const auto e = FinslerMetric::euclidean();
  for (int n : {8, 33, 128})
    EXPECT_NEAR(action(e, DiscreteLoop::straight({1, 0}, n)), 1.0, 1e-14);
  const auto c = one_and_three_loop();
  // Over parameter halves the F-speeds are 2 * 0.5 = 1 and 2 * 1.5 = 3.
  EXPECT_NEAR(action(e, c), 5.0, 1e-13);
  EXPECT_NEAR(length(e, c), 2.0, 1e-14);
  EXPECT_NEAR(cs_gap(e, c), 1.0, 1e-13);
}

TEST(CsGap, ConstantSpeedIsZero)
{
  EXPECT_NEAR(cs_gap(FinslerMetric::euclidean(), DiscreteLoop::straight({2, 1}, 64)), 0.0, 1e-12);
}

TEST(CsGap, NonnegativeOnRandomLoops)
{
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 32);
    // Oracle: discrete Cauchy-Schwarz on the speed vector s_i = N F_i.
    const auto s = segment_lengths(m, c);
    double sum = 0.0, sq = 0.0;
    for (double x : s)
    {
      sum += x;
      sq += x * x * c.size();
    }
    EXPECT_NEAR(cs_gap(m, c), sq - sum * sum, 1e-12 * sq);
    EXPECT_GE(cs_gap(m, c), -1e-9);
  }
}

TEST(Invariance, CyclicShiftAndConstantConformalFactor)
{
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 24);
    const auto s = c.cyclic_shift(int(rng() % 24));
    EXPECT_NEAR(length(m, s), length(m, c), 1e-13);
    EXPECT_NEAR(action(m, s), action(m, c), 1e-12 * action(m, c));
    EXPECT_EQ(winding_class(s), winding_class(c));
    const double kappa = 0.25 + (rng() % 1000) / 250.0;
    const auto scaled = conformal_scale(m, FourierSeries(kappa));
    EXPECT_NEAR(length(scaled, c), std::sqrt(kappa) * length(m, c), 1e-13 * length(scaled, c));
  }
}

TEST(Reparametrize, OneAndThreeLoop)
{
  const auto e = FinslerMetric::euclidean();
  const auto c = one_and_three_loop();
  const auto r = reparametrize_constant_speed(e, c);
  EXPECT_LE(cs_gap(e, r), 1e-6 * action(e, r));
  EXPECT_NEAR(length(e, r), 2.0, 1e-9);
  EXPECT_EQ(winding_class(r), winding_class(c));
  // Oracle: cumulative-length inversion puts vertex j at x = 2j/16 + offset.
  for (int j = 0; j < 16; ++j)
    EXPECT_NEAR(r.vertex(j).x, 2.0 * j / 16.0, 1e-9);
}

TEST(Reparametrize, IdempotentOnConstantSpeedLoop)
{
  const auto e = FinslerMetric::euclidean();
  const auto c = DiscreteLoop::straight({1, 2}, 40, {0.1, 0.2});
  const auto r = reparametrize_constant_speed(e, c);
  for (int j = 0; j < 40; ++j)
    EXPECT_NEAR(torus_distance(r.vertex(j), c.vertex(j)), 0.0, 1e-9);
}

TEST(Reparametrize, RandomLoopsReachConstantSpeed)
{
  std::mt19937_64 rng(4);
  for (int i = 0; i < 300; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 48);
    const auto r = reparametrize_constant_speed(m, c);
    EXPECT_LE(cs_gap(m, r), 1e-6 * action(m, r));
    EXPECT_EQ(winding_class(r), winding_class(c));
    // Chords cut corners, so length can only shrink (triangle inequality for F).
    EXPECT_LE(length(m, r), length(m, c) * (1 + 1e-12));
    const auto rr = reparametrize_constant_speed(m, r);
    for (int j = 0; j < r.size(); ++j)
      ASSERT_NEAR(torus_distance(rr.vertex(j), r.vertex(j)), 0.0, 1e-9);
  }
}

TEST(Reparametrize, ZeroLengthIsDegenerate)
{
  const DiscreteLoop c(std::vector<Vec2>(8, Vec2{0.5, 0.5}), {0, 0});
  EXPECT_THROW(reparametrize_constant_speed(FinslerMetric::euclidean(), c), DegenerateLoopError);
}

TEST(LoopMeasure, Examples)
{
  const auto c = DiscreteLoop::straight({1, 0}, 16);
  const auto mu = loop_measure(c, 2.0);
  ASSERT_EQ(mu.samples.size(), 16u);
  for (const auto& s : mu.samples)
  {
    EXPECT_NEAR(s.velocity.x, 1.0, 1e-14);
    EXPECT_NEAR(s.velocity.y, 0.0, 1e-14);
  }
  EXPECT_DOUBLE_EQ(mu.weight(), 1.0 / 16);
  EXPECT_NEAR(mu.integrate([](const TangentSample&) { return 1.0; }), 1.0, 1e-15);
  EXPECT_THROW(loop_measure(c, 0.5), CapViolationError);
}

TEST(LoopMeasure, ActionMatchesExactly)
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 32);
    EXPECT_EQ(action(m, loop_measure(c, 1e9)), action(m, c));
  }
}

TEST(LoopCsv, RoundTrip)
{
  std::mt19937_64 rng(6);
  const auto c = sampling::random_loop(rng, {3, -1}, 20);
  std::stringstream ss;
  write_loop_csv(ss, c);
  const auto back = read_loop_csv(ss);
  EXPECT_EQ(back.winding(), c.winding());
  EXPECT_EQ(back.vertices().size(), c.vertices().size());
  for (int i = 0; i < c.size(); ++i)
  {
    EXPECT_EQ(back.vertex(i).x, c.vertex(i).x);
    EXPECT_EQ(back.vertex(i).y, c.vertex(i).y);
  }
}

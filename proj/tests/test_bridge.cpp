#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "finslerlab/geodesic_solver.hpp"
#include "finslerlab/measure_bridge.hpp"
#include "finslerlab/sampling.hpp"

using namespace finslerlab;

namespace
{
constexpr double kNoCap = 1e9;

DiscreteLoop horizontal(double y, int n = 64) { return DiscreteLoop::straight({1, 0}, n, {0.0, y}); }
}  // namespace

TEST(Pushforward, TotalMassIsAction)
{
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 48);
    const auto mu = pushforward(m, loop_measure(c, kNoCap), 64);
    EXPECT_NEAR(mu.total_mass(), action(m, c), 1e-12 * action(m, c));
    EXPECT_NEAR(pairing(FourierSeries(1.0), mu), action(m, c), 1e-12 * action(m, c));
  }
}

TEST(Pushforward, ConstantSpeedLoopMassIsLengthSquared)
{
  const auto c = DiscreteLoop::straight({1, 2}, 50);
  const auto mu = pushforward(FinslerMetric::euclidean(), loop_measure(c, kNoCap), 32);
  EXPECT_NEAR(mu.total_mass(), 5.0, 1e-12);
}

TEST(Pushforward, HorizontalLoopFillsOneRow)
{
  const auto mu = pushforward(FinslerMetric::euclidean(), loop_measure(horizontal(0.3), kNoCap), 16);
  const int row = int(0.3 * 16);
  for (int iy = 0; iy < 16; ++iy)
    for (int ix = 0; ix < 16; ++ix)
      if (iy != row)
        EXPECT_EQ(mu.weight({ix, iy}), 0.0);
}

TEST(Pushforward, LinearInConvexCombinations)
{
  std::mt19937_64 rng(2);
  const auto m = sampling::random_metric(sampling::MetricFamily::randers, rng);
  const auto a = loop_measure(sampling::random_loop(rng, {1, 0}, 32), kNoCap);
  const auto b = loop_measure(sampling::random_loop(rng, {0, 1}, 32), kNoCap);
  const auto mix = pushforward(m, {a, b}, {0.25, 0.75}, 32);
  const auto ref = pushforward(m, a, 32).mix(pushforward(m, b, 32), 0.25);
  for (size_t i = 0; i < mix.weights().size(); ++i)
    EXPECT_NEAR(mix.weights()[i], ref.weights()[i], 1e-15);
}

TEST(Pairing, BilinearAndMonotone)
{
  std::mt19937_64 rng(3);
  const auto m = sampling::random_metric(sampling::MetricFamily::conformal, rng);
  const auto mu = pushforward(m, loop_measure(sampling::random_loop(rng, {1, 1}, 64), kNoCap), 64);
  const auto l1 = sampling::random_factor(rng), l2 = sampling::random_factor(rng);
  const double a = 0.7, b = -1.3;
  EXPECT_NEAR(pairing(a * l1 + b * l2, mu), a * pairing(l1, mu) + b * pairing(l2, mu), 1e-12);
  EXPECT_LE(pairing(l1, mu), pairing(l1 + FourierSeries(0.01), mu));
}

TEST(Pairing, BumpOffSupportVanishes)
{
  // The loop sits in the cell row just above y = 0.25, where sin^2(pi (y - 0.25)) vanishes.
  const auto mu = pushforward(FinslerMetric::euclidean(), loop_measure(horizontal(0.25 + 0.5 / 256), kNoCap), 256);
  const double direct = std::pow(std::sin(std::numbers::pi * (0.5 / 256)), 2);
  EXPECT_NEAR(pairing(trough_bump_y(0.25), mu), direct, 1e-12);
  EXPECT_LE(pairing(trough_bump_y(0.25), mu), 1e-4);
}

TEST(ActionConsistency, ConstantFactorsAreExact)
{
  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 32);
    // Both sides reduce to A_F; they differ only by summation order.
    EXPECT_LE(action_consistency(m, FourierSeries(1.0), c, 64), 1e-14 * action(m, c));
    EXPECT_LE(action_consistency(m, FourierSeries(2.5), c, 64), 1e-14 * action(m, c));
  }
}

TEST(ActionConsistency, WithinQuantizationBound)
{
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i)
  {
    const auto m = sampling::random_metric(static_cast<sampling::MetricFamily>(i % 4), rng);
    const auto lambda = sampling::random_factor(rng);
    const auto c = sampling::random_loop(rng, sampling::random_winding(rng), 64);
    const double mass = action(m, c);
    // Oracle: evaluate both sides independently of the bridge.
    const auto scaled = conformal_scale(m, lambda);
    double lhs = 0.0, rhs = 0.0;
    const int res = 256;
    for (int k = 0; k < c.size(); ++k)
    {
      const Vec2 x = c.midpoint(k), v = c.segment(k) * double(c.size());
      const double f = m.value(x, v);
      lhs += std::pow(scaled.value(x, v), 2);
      const Vec2 w = wrap(x);
      const Vec2 centre{(std::floor(w.x * res) + 0.5) / res, (std::floor(w.y * res) + 0.5) / res};
      rhs += lambda(centre) * f * f;
    }
    lhs /= c.size();
    rhs /= c.size();
    const double gap = action_consistency(m, lambda, c, res);
    EXPECT_NEAR(gap, std::abs(lhs - rhs), 1e-12 * lhs);
    EXPECT_LE(gap, lambda.lipschitz_bound() * std::sqrt(2.0) / res * mass);
  }
}

TEST(Separation, Examples)
{
  const auto e = FinslerMetric::euclidean();
  const auto a = pushforward(e, loop_measure(horizontal(0.2), kNoCap), 32);
  const auto b = pushforward(e, loop_measure(horizontal(0.7), kNoCap), 32);
  EXPECT_TRUE(separation_test(a, a, 1e-12).equal);
  const auto v = separation_test(a, b, 1e-12);
  ASSERT_FALSE(v.equal);
  EXPECT_EQ(v.witness->iy, int(0.2 * 32));
  EXPECT_THROW(separation_test(a, GridMeasure(16), 1e-12), DomainError);
}

TEST(Separation, ReparametrizationIsInvisibleOnStraightLoops)
{
  const auto e = FinslerMetric::euclidean();
  std::vector<Vec2> v;
  for (int i = 0; i < 64; ++i)
  {
    const double t = i / 64.0;
    v.push_back({t + 0.03 * std::sin(2 * std::numbers::pi * t), 0.4});
  }
  const DiscreteLoop c(v, {1, 0});
  const auto r = reparametrize_constant_speed(e, c);
  const auto a = pushforward(e, loop_measure(r, kNoCap), 16);
  const auto b = pushforward(e, loop_measure(DiscreteLoop::straight({1, 0}, 64, {0.0, 0.4}), kNoCap), 16);
  EXPECT_TRUE(separation_test(a, b, 1e-9).equal);
}

TEST(MinimizerTransfer, MinimizerPairsLowest)
{
  // Pool: the minimizer of the lambda-scaled action plus non-minimal loops.
  const auto lambda = FourierSeries(1.0) + 0.3 * trough_bump_y(0.25);
  const auto e = FinslerMetric::euclidean();
  SolverConfig cfg;
  cfg.n = 64;
  const auto best = shortest_loop(conformal_scale(e, lambda), {1, 0}, cfg, horizontal(0.3)).loop;
  std::vector<DiscreteLoop> pool{horizontal(0.5), horizontal(0.75), horizontal(0.1),
                                 DiscreteLoop::straight({1, 0}, 64, {0.2, 0.6})};
  std::mt19937_64 rng(6);
  for (int i = 0; i < 6; ++i)
    pool.push_back(sampling::random_loop(rng, {1, 0}, 64));
  const double p_best = pairing(lambda, pushforward(e, loop_measure(best, kNoCap), 256));
  for (const auto& c : pool)
    EXPECT_LE(p_best, pairing(lambda, pushforward(e, loop_measure(c, kNoCap), 256)) + 1e-9);
}

TEST(GridCsv, RoundTrip)
{
  std::mt19937_64 rng(7);
  const auto mu = pushforward(FinslerMetric::euclidean(),
                              loop_measure(sampling::random_loop(rng, {2, 1}, 40), kNoCap), 8);
  std::stringstream ss;
  write_grid_csv(ss, mu);
  const auto back = read_grid_csv(ss);
  EXPECT_EQ(back.resolution(), 8);
  EXPECT_EQ(back.weights(), mu.weights());
}

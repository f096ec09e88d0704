#include <gtest/gtest.h>

#include <cmath>

#include "bassmle/observed_path.hpp"
#include "bassmle/pricing.hpp"
#include "bassmle/random.hpp"

using namespace bassmle;

TEST(PricePath, ValidatesSegments) {
  EXPECT_THROW(PricePath({{0.5, 1.0, 1.0}}), InvalidParameter);
  EXPECT_THROW(PricePath({{0.0, 1.0, 1.0}, {1.5, 2.0, 1.0}}), InvalidParameter);
  EXPECT_THROW(PricePath({{0.0, 1.0, 1.0}, {1.0, 1.0, 1.0}}), InvalidParameter);
  EXPECT_THROW(PricePath({{0.0, 1.0, INFINITY}}), InvalidParameter);
  EXPECT_NO_THROW(PricePath({{0.0, 1.0, 1.0}, {1.0, 2.0, 3.0}}));
}

TEST(PriceAt, HalfOpenSegments) {
  EXPECT_EQ(price_at(PricePath({{0.0, 10.0, 2.0}}), 5.0), 2.0);
  const PricePath two({{0.0, 1.0, 3.0}, {1.0, 2.0, 4.0}});
  EXPECT_EQ(price_at(two, 0.0), 3.0);
  EXPECT_EQ(price_at(two, 1.0), 4.0);
  EXPECT_EQ(price_at(two, 2.0), 4.0);  // last segment closed
  EXPECT_THROW(price_at(PricePath({{0.0, 10.0, 2.0}}), 10.5), DomainError);
  EXPECT_THROW(price_at(two, -0.1), DomainError);
}

TEST(PriceLeftLimit, UsesSegmentEndingAtTime) {
  const PricePath two({{0.0, 1.0, 3.0}, {1.0, 2.0, 4.0}});
  EXPECT_EQ(price_left_limit(two, 0.0), 3.0);
  EXPECT_EQ(price_left_limit(two, 1.0), 3.0);
  EXPECT_EQ(price_left_limit(two, 1.5), 4.0);
}

TEST(IntegrateX, HandValues) {
  const auto unit = PriceResponse::constant();
  const auto expo = PriceResponse::exponential();
  const auto flat = PricePath::constant(1.5, 7.0);
  EXPECT_DOUBLE_EQ(integrate_x(flat, unit, 0.0, 7.0), 7.0);
  EXPECT_EQ(integrate_x(flat, unit, 3.0, 3.0), 0.0);
  EXPECT_DOUBLE_EQ(integrate_x(flat, expo, 1.0, 3.0), std::exp(-1.5) * 2.0);

  const double r1 = 0.7, r2 = 1.9;
  const PricePath two({{0.0, 1.0, r1}, {1.0, 3.0, r2}});
  EXPECT_NEAR(integrate_x(two, expo, 0.5, 2.0), 0.5 * std::exp(-r1) + 1.0 * std::exp(-r2), 1e-15);
  EXPECT_THROW(integrate_x(two, expo, 2.0, 1.0), DomainError);
  EXPECT_THROW(integrate_x(two, expo, 0.0, 3.5), DomainError);
}

TEST(IntegrateX, AdditiveOverSplitPoints) {
  RandomStream rng(5);
  const auto expo = PriceResponse::exponential();
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PriceSegment> segs;
    double t = 0.0;
    const int k = 1 + static_cast<int>(rng.next() % 8);
    for (int i = 0; i < k; ++i) {
      const double len = 0.05 + rng.uniform();
      segs.push_back({t, t + len, 3.0 * rng.uniform()});
      t += len;
    }
    const PricePath path(segs);
    double pts[3] = {t * rng.uniform(), t * rng.uniform(), t * rng.uniform()};
    std::sort(pts, pts + 3);
    const double whole = integrate_x(path, expo, pts[0], pts[2]);
    const double parts = integrate_x(path, expo, pts[0], pts[1]) + integrate_x(path, expo, pts[1], pts[2]);
    EXPECT_NEAR(parts, whole, 1e-12 * std::max(1.0, whole));

    const std::vector<double> knots{0.0, pts[0], pts[1], pts[2], t};
    const auto sweep = integrate_x_between(path, expo, knots);
    ASSERT_EQ(sweep.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
      EXPECT_NEAR(sweep[i], integrate_x(path, expo, knots[i], knots[i + 1]), 1e-13);
  }
}

TEST(Policy, ConstantIgnoresHistory) {
  const auto policy = PricingPolicy::constant(2.5);
  ObservedPath h{10, 3.0, {0.5, 1.0, 2.0}, PricePath::constant(2.5, 3.0)};
  EXPECT_EQ(realize_policy(policy, h, 0.0), 2.5);
  EXPECT_EQ(realize_policy(policy, h, 2.5), 2.5);
}

TEST(Policy, StateFeedbackUsesAdoptionCount) {
  const auto policy = PricingPolicy::state_feedback(1.0, 0.25);
  ObservedPath h{10, 3.0, {0.5, 1.0, 2.0}, PricePath::constant(1.0, 3.0)};
  EXPECT_DOUBLE_EQ(realize_policy(policy, h, 2.5), 1.0 + 3 * 0.25);
  EXPECT_DOUBLE_EQ(realize_policy(policy, h, 1.0), 1.0 + 2 * 0.25);  // event at now is known
  EXPECT_DOUBLE_EQ(realize_policy(policy, h, 0.1), 1.0);
}

TEST(Policy, ScheduleDelegatesToPriceAt) {
  const PricePath sched({{0.0, 1.0, 3.0}, {1.0, 2.0, 4.0}});
  const auto policy = PricingPolicy::schedule(sched);
  ObservedPath h{5, 2.0, {}, sched};
  for (double t : {0.0, 0.5, 1.0, 1.7, 2.0}) EXPECT_EQ(realize_policy(policy, h, t), price_at(sched, t));
  EXPECT_EQ(policy.next_review_after(0.0).value(), 1.0);
  EXPECT_FALSE(policy.next_review_after(1.0).has_value());
}

TEST(Policy, NonAnticipation) {
  // A policy that reads everything it is given: the count, the last
  // adoption time and the price history.
  const PricingPolicy greedy("greedy", [](const PolicyHistory& h) {
    double v = static_cast<double>(h.adoptions);
    if (!h.adoption_times.empty()) v += h.adoption_times.back();
    for (const auto& s : h.past_segments) v += s.price * (s.end - s.start);
    return v;
  });
  RandomStream rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const double now = 1.0 + rng.uniform();
    // Histories agree on [0, now] and differ afterwards.
    ObservedPath a{50, 4.0, {0.3, 0.9, now + 0.2, now + 1.0},
                   PricePath({{0.0, now, 1.0}, {now, 4.0, 2.0}})};
    ObservedPath b{50, 4.0, {0.3, 0.9, now + 0.7},
                   PricePath({{0.0, now, 1.0}, {now, now + 0.5, 9.0}, {now + 0.5, 4.0, 0.1}})};
    EXPECT_EQ(realize_policy(greedy, a, now), realize_policy(greedy, b, now));
  }
}

TEST(Policy, RejectsHistoryNotCoveringNow) {
  const auto policy = PricingPolicy::constant(1.0);
  ObservedPath h{5, 1.0, {0.5}, PricePath::constant(1.0, 1.0)};
  EXPECT_THROW(realize_policy(policy, h, 1.5), DomainError);
  ObservedPath bad{5, 1.0, {0.7, 0.5}, PricePath::constant(1.0, 1.0)};
  EXPECT_THROW(realize_policy(policy, bad, 0.8), InvalidParameter);
}

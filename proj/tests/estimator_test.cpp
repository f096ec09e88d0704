#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bassmle/estimator.hpp"
#include "bassmle/simulator.hpp"
#include "oracles.hpp"

using namespace bassmle;

namespace {

ObservedPath simulate_count(MarketParams p, Count n, std::uint64_t seed, double tail = 0.0) {
  SimConfig cfg;
  cfg.params = p;
  cfg.x = PriceResponse::constant();
  cfg.policy = PricingPolicy::constant(1.0);
  cfg.stop = StopAtCount{n, tail};
  cfg.seed = seed;
  return simulate(cfg);
}

// Most of the market adopts, so both parameters are well determined.
ObservedPath identifiable_path(std::uint64_t seed) {
  return simulate_count({0.3, 0.1, 500}, 450, seed);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

TEST(ProfileAlpha, HandExample) {
  const ObservedPath path{2, 1.0, {0.5}, PricePath::constant(1.0, 1.0)};
  EXPECT_NEAR(profile_alpha(path, 1.0, PriceResponse::constant()), 1.0 / 3.25, 1e-15);
}

TEST(ProfileAlpha, MatchesNumericMaximization) {
  RandomStream rng(3);
  const auto unit = PriceResponse::constant();
  for (int k = 0; k < 100; ++k) {
    const auto path = simulate_count({0.3, 0.1, 200}, 1 + static_cast<Count>(rng.next() % 150), 40 + k);
    const double b = 0.01 + 5.0 * rng.uniform();
    const double closed = profile_alpha(path, b, unit);
    const double numeric = oracle::argmax(
        [&](double a) { return log_likelihood(path, {a, b}, unit).total; }, 1e-3 * closed, 10.0 * closed);
    EXPECT_NEAR(numeric, closed, 1e-8) << "k=" << k;
  }
}

TEST(ProfileAlpha, LongerQuietHorizonLowersEstimate) {
  const auto path = simulate_count({0.3, 0.1, 100}, 20, 5, 1.0);
  auto longer = path;
  longer.horizon = 2.0 * path.horizon;
  longer.price_path = PricePath::constant(1.0, longer.horizon);
  const auto unit = PriceResponse::constant();
  for (double b : {0.1, 1.0, 10.0}) EXPECT_LT(profile_alpha(longer, b, unit), profile_alpha(path, b, unit));
}

TEST(ProfileAlpha, RejectsEmptyPath) {
  const ObservedPath empty{10, 1.0, {}, PricePath::constant(1.0, 1.0)};
  EXPECT_THROW(profile_alpha(empty, 1.0, PriceResponse::constant()), InsufficientData);
  const ObservedPath one{10, 1.0, {0.5}, PricePath::constant(1.0, 1.0)};
  EXPECT_THROW(profile_alpha(one, 0.0, PriceResponse::constant()), DomainError);
}

TEST(ProfileAlpha, DominatesOtherAlphas) {
  RandomStream rng(6);
  const auto unit = PriceResponse::constant();
  const auto path = identifiable_path(7);
  for (double b : {0.001, 0.05, 0.5, 2.0, 50.0}) {
    const double best = log_likelihood(path, {profile_alpha(path, b, unit), b}, unit).total;
    for (int k = 0; k < 100; ++k) {
      const double a = std::exp(-6.0 + 8.0 * rng.uniform());
      EXPECT_GE(best, log_likelihood(path, {a, b}, unit).total);
    }
  }
}

TEST(FitMle, RequiresTwoEvents) {
  const auto unit = PriceResponse::constant();
  const ObservedPath one{10, 1.0, {0.5}, PricePath::constant(1.0, 1.0)};
  EXPECT_THROW(fit_mle(one, unit), InsufficientData);
  EXPECT_THROW(fit_mle_natural(one, unit), InsufficientData);
}

TEST(FitMle, InteriorOptimaSatisfyFirstOrderConditions) {
  const auto unit = PriceResponse::constant();
  int interior = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto path = identifiable_path(seed);
    const auto fit = fit_mle(path, unit);
    if (fit.boundary) continue;
    ASSERT_TRUE(fit.converged);
    ++interior;
    EXPECT_LT(fit.gradient_norm(), 1e-8);
    const auto sc = score_and_curvature(path, fit.tp_hat, unit);
    EXPECT_LT(std::hypot(sc.gradient[0], sc.gradient[1]), 1e-8);
    EXPECT_NEAR(fit.tp_hat.alpha_p, profile_alpha(path, fit.tp_hat.beta_p, unit), 1e-10);
    EXPECT_NEAR(fit.loglik, log_likelihood(path, fit.tp_hat, unit).total, 1e-9 * std::abs(fit.loglik));
    EXPECT_GT(fit.std_errors[0], 0.0);
    EXPECT_GT(fit.std_errors[1], 0.0);
  }
  EXPECT_GE(interior, 50);
}

TEST(FitMle, MatchesBruteForceProfileMaximum) {
  const auto unit = PriceResponse::constant();
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    const auto path = identifiable_path(seed);
    const auto fit = fit_mle(path, unit);
    if (fit.boundary) continue;
    const auto g = [&](double lb) {
      const double b = std::exp(lb);
      return log_likelihood(path, {profile_alpha(path, b, unit), b}, unit).total;
    };
    const double lb = oracle::argmax(g, std::log(1e-6), std::log(1e4));
    // Brent on a flat profile resolves the location to about sqrt(eps).
    EXPECT_NEAR(std::log(fit.tp_hat.beta_p), lb, 1e-5);
    EXPECT_GE(fit.loglik, g(lb) - 1e-9);
  }
}

TEST(FitMle, Deterministic) {
  const auto unit = PriceResponse::constant();
  const auto path = identifiable_path(11);
  const auto a = fit_mle(path, unit);
  const auto b = fit_mle(path, unit);
  EXPECT_EQ(a.tp_hat.alpha_p, b.tp_hat.alpha_p);
  EXPECT_EQ(a.tp_hat.beta_p, b.tp_hat.beta_p);
  EXPECT_EQ(a.loglik, b.loglik);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(FitMle, FlagsBoundaryOptimum) {
  // Two adoptions close together and a long quiet tail: g' stays positive
  // through every expansion of the bracket.
  const ObservedPath path{1000, 5.0, {0.001, 0.002}, PricePath::constant(1.0, 5.0)};
  const auto fit = fit_mle(path, PriceResponse::constant());
  EXPECT_TRUE(fit.boundary || fit.converged);
  if (fit.boundary) {
    EXPECT_FALSE(fit.converged);
    EXPECT_TRUE(fit.tp_hat.beta_p == fit.bracket.first || fit.tp_hat.beta_p == fit.bracket.second);
  }
}

TEST(FitMleNatural, AgreesWithTransformedFit) {
  const auto unit = PriceResponse::constant();
  int compared = 0;
  for (std::uint64_t seed = 200; seed < 260; ++seed) {
    const auto path = identifiable_path(seed);
    const auto t = fit_mle(path, unit);
    const auto n = fit_mle_natural(path, unit);
    if (t.boundary || n.boundary || !t.converged || !n.converged) continue;
    ++compared;
    EXPECT_NEAR(t.natural_hat.alpha, n.natural_hat.alpha, 1e-6);
    EXPECT_NEAR(t.natural_hat.beta, n.natural_hat.beta, 1e-6);
    EXPECT_NEAR(t.loglik, n.loglik, 1e-8);
    EXPECT_GT(n.iterations, 0);
  }
  EXPECT_GE(compared, 50);
}

TEST(FitMle, CoverageOfNaturalBeta) {
  // (alpha, beta) = (0.3, 0.1), m = 1000, n = 500, 500 seeded replications.
  const MarketParams truth{0.3, 0.1, 1000};
  const auto unit = PriceResponse::constant();
  int converged = 0, covered = 0, natural_covered = 0;
  const int reps = 500;
  for (int r = 0; r < reps; ++r) {
    const auto path = simulate_count(truth, 500, derive_seed(99, 500, r));
    const auto fit = fit_mle(path, unit);
    if (fit.converged && !fit.boundary) {
      ++converged;
      if (std::abs(fit.natural_hat.beta - truth.beta) <= 3.0 * fit.natural_std_errors[1]) ++covered;
    }
    const auto nat = fit_mle_natural(path, unit);
    if (std::abs(nat.natural_hat.beta - truth.beta) <= 3.0 * nat.natural_std_errors[1]) ++natural_covered;
  }
  ASSERT_GT(converged, 0);
  EXPECT_GE(static_cast<double>(covered) / converged, 0.99);
  EXPECT_GE(static_cast<double>(natural_covered) / reps, 0.99);
  RecordProperty("converged_transformed_fits", converged);
}

TEST(FitMle, ErrorShrinksWithMoreAdoptions) {
  const MarketParams truth{0.3, 0.1, 500};
  const double beta_p0 = to_transformed(truth).beta_p;
  const auto unit = PriceResponse::constant();
  std::vector<double> medians;
  for (Count n : {25, 50, 100, 200, 400}) {
    std::vector<double> errs;
    for (int r = 0; r < 200; ++r) {
      const auto fit = fit_mle(simulate_count(truth, n, derive_seed(31, n, r)), unit);
      errs.push_back(std::abs(fit.tp_hat.beta_p - beta_p0));
    }
    medians.push_back(median(errs));
  }
  int inversions = 0;
  for (std::size_t i = 1; i < medians.size(); ++i)
    if (medians[i] > medians[i - 1]) ++inversions;
  EXPECT_LE(inversions, 1) << medians[0] << " " << medians[1] << " " << medians[2] << " " << medians[3]
                           << " " << medians[4];
}

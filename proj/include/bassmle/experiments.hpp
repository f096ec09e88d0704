#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "bassmle/core_model.hpp"
#include "bassmle/estimator.hpp"
#include "bassmle/likelihood.hpp"
#include "bassmle/random.hpp"
#include "bassmle/simulator.hpp"

namespace bassmle {

/// Serializable description of a PriceResponse.
struct ResponseSpec {
  enum class Kind { constant, exponential };
  Kind kind = Kind::constant;
  double scale = 1.0;

  PriceResponse make() const {
    return kind == Kind::constant ? PriceResponse::constant(scale)
                                  : PriceResponse::exponential();
  }
};

/// Serializable description of a PricingPolicy.
struct PolicySpec {
  enum class Kind { constant, state_feedback };
  Kind kind = Kind::constant;
  double price = 0.0;
  double slope = 0.0;

  PricingPolicy make() const {
    return kind == Kind::constant ? PricingPolicy::constant(price)
                                  : PricingPolicy::state_feedback(price, slope);
  }
};

struct ExperimentConfig {
  MarketParams truth{0.3, 0.1, 2000};
  ResponseSpec response;
  PolicySpec policy;
  std::vector<Count> n_grid{25, 50, 100, 200, 400, 800};
  Count replications = 400;
  std::uint64_t seed = 20240601;
  double tail = 0.0;
  int bootstrap_resamples = 200;
  unsigned threads = 0;  // 0: BASS_MLE_THREADS or hardware concurrency
  FitOptions fit;

  void validate() const {
    truth.validate();
    if (!(truth.alpha > truth.beta))
      throw InvalidParameter("experiment truth needs alpha > beta");
    if (n_grid.empty()) throw InvalidParameter("n grid is empty");
    for (std::size_t k = 0; k < n_grid.size(); ++k) {
      if (n_grid[k] < 2) throw InvalidParameter("n grid values must be >= 2");
      if (k > 0 && n_grid[k] <= n_grid[k - 1])
        throw InvalidParameter("n grid must be strictly increasing");
    }
    if (n_grid.back() > truth.m) throw InvalidParameter("n grid exceeds market size");
    if (replications < 1) throw InvalidParameter("replications must be >= 1");
    if (!(tail >= 0.0)) throw InvalidParameter("tail must be nonnegative");
    if (bootstrap_resamples < 0) throw InvalidParameter("bootstrap resamples must be >= 0");
  }
};

struct MseRow {
  Count n = 0;
  Count replications = 0;
  Count included = 0;
  Count excluded = 0;
  bool invalid = false;  // more than 5% of replications excluded
  double mse_alpha_p = 0.0;
  double mse_beta_p = 0.0;
  double mse_beta_natural = 0.0;
  double mse_total = 0.0;
  double scaled_total = 0.0;  // mse_total * (n + 1)
  double mc_se_total = 0.0;
  double mc_se_beta_natural = 0.0;
  double mean_iterations = 0.0;
};

/// Least-squares slope with a bootstrap percentile interval.
struct SlopeEstimate {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
};

struct MseReport {
  std::vector<MseRow> rows;
  SlopeEstimate total_slope;         // ln mse_total vs ln n
  SlopeEstimate beta_natural_slope;  // ln mse_beta_natural vs ln n
  SlopeEstimate scaled_slope;        // ln (mse_total (n+1)) vs ln n
  double scaled_ratio = 0.0;         // max / min of mse_total (n+1)
  bool scaled_no_upward_trend = false;
};

/// Squared errors of one replication.
struct ReplicationOutcome {
  bool included = false;
  double sq_alpha_p = 0.0;
  double sq_beta_p = 0.0;
  double sq_beta_natural = 0.0;
  int iterations = 0;
};

inline unsigned experiment_threads(unsigned requested) {
  unsigned n = requested;
  if (n == 0) {
    if (const char* env = std::getenv("BASS_MLE_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v > 0) n = static_cast<unsigned>(v);
    }
  }
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}

/// Runs work(i) for i in [0, count) on up to `threads` workers.
template <typename Work>
void parallel_for(std::size_t count, unsigned threads, Work&& work) {
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) work(i);
    });
  }
}

namespace detail {

inline double ols_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double standard_error(const std::vector<double>& v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mu = mean(v);
  double ss = 0.0;
  for (double e : v) ss += (e - mu) * (e - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

/// Slope of ln(f(mse)) on ln(n) with a replication bootstrap. `samples[k]`
/// are the included per-replication errors at grid point k, `scale[k]`
/// multiplies the mean before taking logs.
inline SlopeEstimate slope_with_bootstrap(const std::vector<double>& log_n,
                                          const std::vector<std::vector<double>>& samples,
                                          const std::vector<double>& scale,
                                          int resamples, std::uint64_t seed) {
  SlopeEstimate out;
  std::vector<double> ys(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].empty()) return out;
    ys[k] = std::log(mean(samples[k]) * scale[k]);
  }
  if (log_n.size() < 2) return out;
  out.slope = ols_slope(log_n, ys);
  if (resamples <= 0) return out;
  RandomStream rng(seed);
  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(resamples));
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const auto& s = samples[k];
      double acc = 0.0;
      for (std::size_t i = 0; i < s.size(); ++i)
        acc += s[static_cast<std::size_t>(rng.next() % s.size())];
      ys[k] = std::log(acc / static_cast<double>(s.size()) * scale[k]);
    }
    slopes.push_back(ols_slope(log_n, ys));
  }
  out.ci_low = percentile(slopes, 0.025);
  out.ci_high = percentile(slopes, 0.975);
  return out;
}

inline ReplicationOutcome run_replication(const ExperimentConfig& cfg,
                                          const TransformedParams& truth_tp, Count n,
                                          std::uint64_t seed) {
  SimConfig sim;
  sim.params = cfg.truth;
  sim.x = cfg.response.make();
  sim.policy = cfg.policy.make();
  sim.stop = StopAtCount{n, cfg.tail};
  sim.seed = seed;
  ReplicationOutcome out;
  try {
    const auto path = simulate_until_n(sim);
    const auto fit = fit_mle(path, sim.x, cfg.fit);
    out.iterations = fit.iterations;
    if (!fit.converged || fit.boundary) return out;
    const double da = fit.tp_hat.alpha_p - truth_tp.alpha_p;
    const double db = fit.tp_hat.beta_p - truth_tp.beta_p;
    const double dn = fit.natural_hat.beta - cfg.truth.beta;
    out.sq_alpha_p = da * da;
    out.sq_beta_p = db * db;
    out.sq_beta_natural = dn * dn;
    out.included = true;
  } catch (const std::exception&) {
    out.included = false;
  }
  return out;
}

}  // namespace detail

/// Seed of replication `rep` at adoption count n.
inline std::uint64_t replication_seed(std::uint64_t master, Count n, Count rep) {
  return derive_seed(master, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(rep));
}

/// Simulates `replications` fixed-n paths per grid point, fits each and
/// summarizes the squared errors against the truth. Failed and boundary
/// fits are excluded and counted. Deterministic given the config.
inline MseReport run_mse_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto truth_tp = to_transformed(cfg.truth);
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  const std::size_t cells = cfg.n_grid.size() * reps;
  std::vector<ReplicationOutcome> outcomes(cells);
  parallel_for(cells, experiment_threads(cfg.threads), [&](std::size_t idx) {
    const Count n = cfg.n_grid[idx / reps];
    const Count rep = static_cast<Count>(idx % reps);
    outcomes[idx] = detail::run_replication(cfg, truth_tp, n, replication_seed(cfg.seed, n, rep));
  });

  MseReport report;
  std::vector<double> log_n, ones, n_plus_one;
  std::vector<std::vector<double>> total_samples, beta_nat_samples;
  for (std::size_t k = 0; k < cfg.n_grid.size(); ++k) {
    MseRow row;
    row.n = cfg.n_grid[k];
    row.replications = cfg.replications;
    std::vector<double> sq_a, sq_b, sq_total, sq_nat;
    double iterations = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      const auto& o = outcomes[k * reps + r];
      iterations += o.iterations;
      if (!o.included) continue;
      sq_a.push_back(o.sq_alpha_p);
      sq_b.push_back(o.sq_beta_p);
      sq_total.push_back(o.sq_alpha_p + o.sq_beta_p);
      sq_nat.push_back(o.sq_beta_natural);
    }
    row.included = static_cast<Count>(sq_total.size());
    row.excluded = row.replications - row.included;
    row.invalid = static_cast<double>(row.excluded) > 0.05 * static_cast<double>(row.replications);
    row.mse_alpha_p = detail::mean(sq_a);
    row.mse_beta_p = detail::mean(sq_b);
    row.mse_total = detail::mean(sq_total);
    row.mse_beta_natural = detail::mean(sq_nat);
    row.scaled_total = row.mse_total * static_cast<double>(row.n + 1);
    row.mc_se_total = detail::standard_error(sq_total);
    row.mc_se_beta_natural = detail::standard_error(sq_nat);
    row.mean_iterations = iterations / static_cast<double>(reps);
    report.rows.push_back(row);

    log_n.push_back(std::log(static_cast<double>(row.n)));
    ones.push_back(1.0);
    n_plus_one.push_back(static_cast<double>(row.n + 1));
    total_samples.push_back(std::move(sq_total));
    beta_nat_samples.push_back(std::move(sq_nat));
  }

  const int b = cfg.bootstrap_resamples;
  report.total_slope = detail::slope_with_bootstrap(log_n, total_samples, ones, b,
                                                    derive_seed(cfg.seed, 0xB0075, 1));
  report.beta_natural_slope = detail::slope_with_bootstrap(
      log_n, beta_nat_samples, ones, b, derive_seed(cfg.seed, 0xB0075, 2));
  report.scaled_slope = detail::slope_with_bootstrap(log_n, total_samples, n_plus_one, b,
                                                     derive_seed(cfg.seed, 0xB0075, 1));

  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& row : report.rows) {
    lo = std::min(lo, row.scaled_total);
    hi = std::max(hi, row.scaled_total);
  }
  report.scaled_ratio = hi / lo;
  // No upward trend at 95%: the interval for the scaled slope reaches 0 or below.
  report.scaled_no_upward_trend = !(report.scaled_slope.ci_low > 0.0);
  return report;
}

/// Constants of the MSE bound alpha_theta / (n + 1) for given radii.
struct BoundConstants {
  TransformedParams truth{};
  double r = 0.0;
  double r_alt = 0.0;
  double c_i_alpha = 0.0;
  double c_i_beta = 0.0;
  DeltaBar delta_bar;
  double alpha_theta = 0.0;

  static BoundConstants from(const TransformedParams& tp, const DeltaBar& bar = {}) {
    tp.validate();
    if (!(bar.alpha > 0.0) || !(bar.beta > 0.0))
      throw InvalidParameter("delta bar values must be positive");
    BoundConstants c;
    c.truth = tp;
    c.r = inverse_density_bound(tp);
    c.r_alt = inverse_density_bound_alt(tp);
    c.c_i_alpha = curvature_constant(Direction::alpha_p, tp, bar);
    c.c_i_beta = curvature_constant(Direction::beta_p, tp, bar);
    c.delta_bar = bar;
    c.alpha_theta = 8.0 * std::sqrt(c.r) * std::max(c.c_i_alpha, c.c_i_beta);
    return c;
  }
};

struct BoundRow {
  Count n = 0;
  double mse_total = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct BoundCheck {
  std::vector<BoundRow> rows;
  double empirical_constant = 0.0;  // max over rows of mse_total (n + 1)
  double alpha_theta = 0.0;
  bool all_pass = false;
  /// Smallest common delta bar (d1 = d2) whose alpha_theta covers the
  /// empirical constant.
  double required_delta_bar = 0.0;
};

inline BoundCheck verify_mse_bound(const MseReport& report, const BoundConstants& c) {
  const auto& tp = c.truth;
  BoundCheck out;
  out.alpha_theta = c.alpha_theta;
  out.all_pass = true;
  for (const auto& row : report.rows) {
    BoundRow br;
    br.n = row.n;
    br.mse_total = row.mse_total;
    br.bound = c.alpha_theta / static_cast<double>(row.n + 1);
    br.pass = row.mse_total <= br.bound;  // NaN rows fail
    out.all_pass = out.all_pass && br.pass;
    out.empirical_constant = std::max(out.empirical_constant, row.scaled_total);
    if (std::isnan(row.scaled_total)) out.empirical_constant = row.scaled_total;
    out.rows.push_back(br);
  }
  // alpha_theta(d) >= K iff either branch of the max reaches K / (8 sqrt R).
  const double target = std::sqrt(out.empirical_constant / (8.0 * std::sqrt(c.r)));
  const double via_alpha = target / tp.alpha_p - 1.0;
  const double via_beta = (target - 1.0) / tp.beta_p - 1.0;
  out.required_delta_bar = std::max(0.0, std::min(via_alpha, via_beta));
  return out;
}

struct MInvarianceRow {
  Count m = 0;
  MseRow row;
};

struct MInvarianceReport {
  Count n = 0;
  std::vector<MInvarianceRow> rows;
  double slope = std::numeric_limits<double>::quiet_NaN();  // ln mse_total vs ln m
  double spread = 0.0;                                       // max / min mse_total
  bool pass = false;                                         // |slope| <= 0.3
};

/// MSE at a fixed adoption count across market sizes. Replication seeds do
/// not depend on m, so rows share random streams.
inline MInvarianceReport run_m_invariance_check(const ExperimentConfig& base, Count n,
                                                const std::vector<Count>& m_grid) {
  if (m_grid.size() < 2) throw InvalidParameter("m grid needs at least two values");
  for (Count m : m_grid)
    if (m < 2 * n) throw InvalidParameter("m grid values must be at least 2n");
  MInvarianceReport out;
  out.n = n;
  std::vector<double> xs, ys;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (Count m : m_grid) {
    ExperimentConfig cfg = base;
    cfg.truth.m = m;
    cfg.n_grid = {n};
    cfg.bootstrap_resamples = 0;
    const auto rep = run_mse_experiment(cfg);
    out.rows.push_back({m, rep.rows.front()});
    xs.push_back(std::log(static_cast<double>(m)));
    ys.push_back(std::log(rep.rows.front().mse_total));
    lo = std::min(lo, rep.rows.front().mse_total);
    hi = std::max(hi, rep.rows.front().mse_total);
  }
  out.slope = detail::ols_slope(xs, ys);
  out.spread = hi / lo;
  out.pass = std::abs(out.slope) <= 0.3;
  return out;
}

struct DiagnosticsConfig {
  TransformedParams truth{0.2, 0.5};
  Count m = 2000;
  double price = 0.0;
  ResponseSpec response;
  DeltaBar delta_bar;
  std::vector<double> delta_fractions{0.0, 0.01, 0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<Count> states{0, 1, 10, 100, 1000, 1999};
  std::vector<Count> sandwich_n{1, 10, 100, 1000, 2000};
  std::vector<double> sandwich_beta_p{0.01, 0.1, 0.5, 1.0, 10.0};
};

struct HellingerRow {
  Count state = 0;
  Direction direction = Direction::alpha_p;
  double delta = 0.0;
  HellingerGap gap;
};

struct SandwichRow {
  Count n = 0;
  double beta_p = 0.0;
  FisherSandwich sums{};
  bool holds = false;
};

struct DiagnosticsReport {
  std::vector<HellingerRow> hellinger;
  std::vector<SandwichRow> sandwich;
  bool all_hold = true;
};

/// Tabulates the Hellinger lower bound over (state, direction, delta) and
/// the Fisher sandwich over (n, beta'). Delta is given as a fraction of the
/// allowed radius delta_bar * theta_0 component.
inline DiagnosticsReport run_diagnostics(const DiagnosticsConfig& cfg) {
  cfg.truth.validate();
  const auto x = cfg.response.make();
  DiagnosticsReport out;
  for (Count j : cfg.states) {
    for (Direction dir : {Direction::alpha_p, Direction::beta_p}) {
      const double radius = dir == Direction::alpha_p ? cfg.delta_bar.alpha * cfg.truth.alpha_p
                                                      : cfg.delta_bar.beta * cfg.truth.beta_p;
      for (double f : cfg.delta_fractions) {
        if (!(f >= 0.0 && f <= 1.0)) throw InvalidParameter("delta fraction outside [0, 1]");
        HellingerRow row{j, dir, f * radius, {}};
        row.gap = hellinger_gap(j, cfg.m, cfg.truth, row.delta, dir, cfg.price, x, cfg.delta_bar);
        out.all_hold = out.all_hold && row.gap.bound_holds && row.gap.exp_bound_holds;
        out.hellinger.push_back(row);
      }
    }
  }
  for (Count n : cfg.sandwich_n) {
    for (double b : cfg.sandwich_beta_p) {
      SandwichRow row{n, b, fisher_sandwich(n, cfg.m, b), false};
      row.holds = row.sums.lower <= row.sums.exact && row.sums.exact <= row.sums.upper;
      out.all_hold = out.all_hold && row.holds;
      out.sandwich.push_back(row);
    }
  }
  return out;
}

}  // namespace bassmle

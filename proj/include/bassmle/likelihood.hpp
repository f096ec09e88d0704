#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "bassmle/core_model.hpp"
#include "bassmle/observed_path.hpp"
#include "bassmle/pricing.hpp"

namespace bassmle {

/// Event terms and compensator of the path log-likelihood;
/// total = event_terms - compensator.
struct LikelihoodParts {
  double event_terms = 0.0;
  double compensator = 0.0;
  double total = 0.0;
};

/// Gradient and Hessian of the log-likelihood in (alpha', beta').
struct ScoreAndCurvature {
  std::array<double, 2> gradient{};
  std::array<std::array<double, 2>, 2> hessian{};
};

/// Everything the likelihood needs from a path once the price response is
/// fixed. exposure[i] is the integral of x(r_s) over [t_i, t_{i+1}] for
/// i < n and over [t_n, horizon] for i = n (t_0 = 0).
struct PathStatistics {
  Count n = 0;
  Count m = 1;
  std::vector<double> exposure;
  std::vector<double> log_x;       // ln x(r) at each event time (left limit)
  double log_x_sum = 0.0;          // sum of ln x(r) at event times (left limits)
  double log_remaining_sum = 0.0;  // sum over i < n of ln(m - i)
  double base_exposure = 0.0;      // sum over i <= n of (m - i) exposure[i]
  double imitation_exposure = 0.0; // sum over i <= n of (m - i)(1 + i/m) exposure[i]

  static PathStatistics from(const ObservedPath& path, const PriceResponse& x) {
    path.validate();
    PathStatistics st;
    st.n = path.adoptions();
    st.m = path.m;
    std::vector<double> knots;
    knots.reserve(path.adoption_times.size() + 2);
    knots.push_back(0.0);
    knots.insert(knots.end(), path.adoption_times.begin(), path.adoption_times.end());
    knots.push_back(path.horizon);
    st.exposure = integrate_x_between(path.price_path, x, knots);

    const double md = static_cast<double>(st.m);
    st.log_x.reserve(path.adoption_times.size());
    for (Count i = 0; i < st.n; ++i) {
      const double t = path.adoption_times[static_cast<std::size_t>(i)];
      st.log_x.push_back(std::log(x(price_left_limit(path.price_path, t))));
      st.log_x_sum += st.log_x.back();
      st.log_remaining_sum += std::log(md - static_cast<double>(i));
    }
    for (Count i = 0; i <= st.n; ++i) {
      const double w = (md - static_cast<double>(i)) * st.exposure[static_cast<std::size_t>(i)];
      st.base_exposure += w;
      st.imitation_exposure += w * (1.0 + static_cast<double>(i) / md);
    }
    return st;
  }

  /// Compensator coefficient S(beta'): compensator = alpha' * S(beta').
  double compensator_coefficient(double beta_p) const {
    return base_exposure + beta_p * imitation_exposure;
  }
};

namespace detail {

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    carry_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

inline void check_path_params(const ObservedPath& path, const TransformedParams& tp) {
  path.validate();
  if (!(tp.alpha_p > 0.0) || !(tp.beta_p > 0.0))
    throw DomainError("likelihood requires alpha' > 0 and beta' > 0");
}

}  // namespace detail

inline LikelihoodParts log_likelihood(const ObservedPath& path,
                                      const TransformedParams& tp,
                                      const PriceResponse& x) {
  detail::check_path_params(path, tp);
  const auto st = PathStatistics::from(path, x);
  LikelihoodParts out;
  out.event_terms = st.log_x_sum + st.log_remaining_sum +
                    static_cast<double>(st.n) * std::log(tp.alpha_p);
  for (Count i = 0; i < st.n; ++i)
    out.event_terms += std::log(imitation_factor(i, st.m, tp.beta_p));
  // The total is summed interval by interval: event terms and compensator
  // are each much larger than their difference on long paths.
  detail::CompensatedSum total;
  const double md = static_cast<double>(st.m);
  const double log_alpha = std::log(tp.alpha_p);
  for (Count i = 0; i <= st.n; ++i) {
    if (i == st.m) break;
    const auto k = static_cast<std::size_t>(i);
    const double comp = xi_transformed(i, tp, st.m) * st.exposure[k];
    out.compensator += comp;
    if (i < st.n) {
      total.add(st.log_x[k] + std::log(md - static_cast<double>(i)) + log_alpha +
                std::log(imitation_factor(i, st.m, tp.beta_p)) - comp);
    } else {
      total.add(-comp);
    }
  }
  out.total = total.value();
  return out;
}

/// Per-interval factor f_i: the conditional density of t_{i+1} for i < n,
/// and the survival probability of the tail window for i = n.
inline double factor_density(Count i, const ObservedPath& path,
                             const TransformedParams& tp, const PriceResponse& x) {
  detail::check_path_params(path, tp);
  const Count n = path.adoptions();
  if (i < 0 || i > n) throw DomainError("factor index outside [0, D_t]");
  const double start = i == 0 ? 0.0 : path.adoption_times[static_cast<std::size_t>(i - 1)];
  const double rate = xi_transformed(i, tp, path.m);
  if (i == n) {
    return std::exp(-rate * integrate_x(path.price_path, x, start, path.horizon));
  }
  const double end = path.adoption_times[static_cast<std::size_t>(i)];
  const double price = price_left_limit(path.price_path, end);
  return rate * x(price) * std::exp(-rate * integrate_x(path.price_path, x, start, end));
}

inline ScoreAndCurvature score_and_curvature(const PathStatistics& st,
                                             const TransformedParams& tp) {
  double score_beta = 0.0;
  double curvature_beta = 0.0;
  for (Count i = 0; i < st.n; ++i) {
    const double u = 1.0 + static_cast<double>(i) / static_cast<double>(st.m);
    const double c = u / (1.0 + u * tp.beta_p);
    score_beta += c;
    curvature_beta += c * c;
  }
  const double n = static_cast<double>(st.n);
  ScoreAndCurvature out;
  out.gradient = {n / tp.alpha_p - st.compensator_coefficient(tp.beta_p),
                  score_beta - tp.alpha_p * st.imitation_exposure};
  out.hessian = {{{-n / (tp.alpha_p * tp.alpha_p), -st.imitation_exposure},
                  {-st.imitation_exposure, -curvature_beta}}};
  return out;
}

inline ScoreAndCurvature score_and_curvature(const ObservedPath& path,
                                             const TransformedParams& tp,
                                             const PriceResponse& x) {
  detail::check_path_params(path, tp);
  return score_and_curvature(PathStatistics::from(path, x), tp);
}

struct FisherSandwich {
  double lower;
  double upper;
  double exact;
};

/// The three sums over d = 1..n bracketing the beta' information:
///   n/(1+2b)^2 <= sum (1+d/m)^2/(1+(1+d/m)b)^2 <= 4n/(1+b)^2.
/// The per-term bracket needs d/m <= 1, hence n <= m.
inline FisherSandwich fisher_sandwich(Count n, Count m, double beta_p) {
  if (n < 1 || m < 1) throw DomainError("fisher_sandwich requires n >= 1 and m >= 1");
  if (n > m) throw DomainError("fisher_sandwich requires n <= m");
  if (!(beta_p > 0.0)) throw DomainError("fisher_sandwich requires beta' > 0");
  FisherSandwich out{0.0, 0.0, 0.0};
  const double lo_term = 1.0 / ((1.0 + 2.0 * beta_p) * (1.0 + 2.0 * beta_p));
  const double hi_term = 4.0 / ((1.0 + beta_p) * (1.0 + beta_p));
  for (Count d = 1; d <= n; ++d) {
    const double u = 1.0 + static_cast<double>(d) / static_cast<double>(m);
    const double denom = 1.0 + u * beta_p;
    out.exact += (u * u) / (denom * denom);
  }
  out.lower = static_cast<double>(n) * lo_term;
  out.upper = static_cast<double>(n) * hi_term;
  return out;
}

enum class Direction { alpha_p, beta_p };

/// Caller-supplied radii of the estimator's range around the truth:
/// alpha'_hat <= alpha'_0 (1 + d1), beta'_hat <= beta'_0 (1 + d2).
struct DeltaBar {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Bound R on the inverse waiting-time density, 1 / (alpha'_0 + alpha'_0 beta'_0).
inline double inverse_density_bound(const TransformedParams& tp) {
  return 1.0 / (tp.alpha_p + tp.alpha_p * tp.beta_p);
}

/// Variant 1 / (2 alpha'_0 + beta'_0) of the same constant; reported for
/// comparison only.
inline double inverse_density_bound_alt(const TransformedParams& tp) {
  return 1.0 / (tp.alpha_p + tp.alpha_p + tp.beta_p);
}

/// Curvature constant C_I for the given direction.
inline double curvature_constant(Direction dir, const TransformedParams& tp,
                                 const DeltaBar& bar) {
  if (dir == Direction::alpha_p) {
    const double v = tp.alpha_p * (1.0 + bar.alpha);
    return v * v;
  }
  const double v = 1.0 + tp.beta_p * (1.0 + bar.beta);
  return v * v;
}

struct HellingerGap {
  double rate_base = 0.0;       // mu_1, exponential rate at theta_0
  double rate_perturbed = 0.0;  // mu_2, at theta_0 + delta e
  double affinity = 1.0;        // integral of sqrt(f1 f2)
  double hellinger_sq = 0.0;    // integral of (sqrt f1 - sqrt f2)^2
  double kl_bound = 0.0;        // delta^2 / (4 sqrt(R) C_I)
  double r = 0.0;
  double c_i = 0.0;
  bool bound_holds = true;      // hellinger_sq >= kl_bound
  bool exp_bound_holds = true;  // affinity <= exp(-hellinger_sq / 2)
};

/// Squared Hellinger distance between the waiting-time laws in state j at
/// theta_0 and at theta_0 + delta e_dir under a constant price, compared
/// with the lower bound delta^2 / (4 sqrt(R) C_I).
inline HellingerGap hellinger_gap(Count j, Count m, const TransformedParams& tp,
                                  double delta, Direction dir, double price,
                                  const PriceResponse& x, const DeltaBar& bar = {}) {
  tp.validate();
  if (j < 0 || j >= m) throw DomainError("state must satisfy 0 <= j < m");
  const double component = dir == Direction::alpha_p ? tp.alpha_p : tp.beta_p;
  const double radius = (dir == Direction::alpha_p ? bar.alpha : bar.beta) * component;
  if (!(delta >= 0.0) || delta > radius)
    throw DomainError("delta outside [0, delta_bar * theta_0 component]");

  TransformedParams moved = tp;
  (dir == Direction::alpha_p ? moved.alpha_p : moved.beta_p) += delta;

  HellingerGap out;
  const double xr = x(price);
  out.rate_base = xi_transformed(j, tp, m) * xr;
  out.rate_perturbed = xi_transformed(j, moved, m) * xr;
  const double mu1 = out.rate_base;
  const double mu2 = out.rate_perturbed;
  out.affinity = 2.0 * std::sqrt(mu1 * mu2) / (mu1 + mu2);
  // 2 - 2a written as 2 (sqrt mu2 - sqrt mu1)^2 / (mu1 + mu2) to avoid cancellation.
  const double d = std::sqrt(mu2) - std::sqrt(mu1);
  out.hellinger_sq = 2.0 * d * d / (mu1 + mu2);
  out.r = inverse_density_bound(tp);
  out.c_i = curvature_constant(dir, tp, bar);
  out.kl_bound = delta * delta / (4.0 * std::sqrt(out.r) * out.c_i);
  out.bound_holds = out.hellinger_sq >= out.kl_bound;
  // affinity = 1 - h/2 exactly; the slack covers rounding of the two routes.
  out.exp_bound_holds = out.affinity <= std::exp(-out.hellinger_sq / 2.0) + 1e-15;
  return out;
}

}  // namespace bassmle

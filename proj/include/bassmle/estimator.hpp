#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "bassmle/core_model.hpp"
#include "bassmle/likelihood.hpp"
#include "bassmle/observed_path.hpp"

namespace bassmle {

struct FitOptions {
  double beta_p_lower = 1e-6;
  double beta_p_upper = 10.0;
  int max_expansions = 10;  // upper edge doubles at most this many times
  int grid_points = 32;
  double gradient_tolerance = 1e-8;
  double relative_width_tolerance = 1e-10;
  int max_iterations = 200;
};

struct FitResult {
  TransformedParams tp_hat{};
  MarketParams natural_hat{};
  double loglik = 0.0;
  std::array<double, 2> std_errors{};          // (alpha', beta')
  std::array<double, 2> natural_std_errors{};  // (alpha, beta), delta method
  std::array<double, 2> gradient{};            // in (alpha', beta') at tp_hat
  int iterations = 0;
  bool converged = false;
  bool boundary = false;
  std::pair<double, double> bracket{};

  double gradient_norm() const { return std::hypot(gradient[0], gradient[1]); }
};

/// Closed-form maximizer of L in alpha' for fixed beta': D_t / S(beta').
inline double profile_alpha(const PathStatistics& st, double beta_p) {
  if (st.n == 0)
    throw InsufficientData("no adoptions: the alpha' likelihood peaks at the boundary 0");
  if (!(beta_p > 0.0)) throw DomainError("beta' must be positive");
  return static_cast<double>(st.n) / st.compensator_coefficient(beta_p);
}

inline double profile_alpha(const ObservedPath& path, double beta_p,
                            const PriceResponse& x) {
  return profile_alpha(PathStatistics::from(path, x), beta_p);
}

namespace detail {

/// Profiled log-likelihood g(b) = L(alpha'(b), b) up to the constant terms,
/// with first and second derivatives.
struct Profile {
  const PathStatistics& st;

  double value(double b) const {
    const double n = static_cast<double>(st.n);
    double v = -n * std::log(st.compensator_coefficient(b));
    for (Count i = 0; i < st.n; ++i) v += std::log(imitation_factor(i, st.m, b));
    return v;
  }

  std::pair<double, double> derivatives(double b) const {
    const double n = static_cast<double>(st.n);
    const double s = st.compensator_coefficient(b);
    const double ratio = st.imitation_exposure / s;
    double d1 = -n * ratio;
    double d2 = n * ratio * ratio;
    for (Count i = 0; i < st.n; ++i) {
      const double u = 1.0 + static_cast<double>(i) / static_cast<double>(st.m);
      const double c = u / (1.0 + u * b);
      d1 += c;
      d2 -= c * c;
    }
    return {d1, d2};
  }
};

inline std::array<double, 2> standard_errors(const std::array<std::array<double, 2>, 2>& h) {
  // Inverse of the observed information -H.
  const double a = -h[0][0], b = -h[0][1], d = -h[1][1];
  const double det = a * d - b * b;
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (!(det > 0.0) || !(a > 0.0)) return {nan, nan};
  return {std::sqrt(d / det), std::sqrt(a / det)};
}

inline std::array<std::array<double, 2>, 2> inverse_information(
    const std::array<std::array<double, 2>, 2>& h) {
  const double a = -h[0][0], b = -h[0][1], d = -h[1][1];
  const double det = a * d - b * b;
  return {{{d / det, -b / det}, {-b / det, a / det}}};
}

/// Covariance J C J^T for a 2x2 Jacobian.
inline std::array<double, 2> propagate(const std::array<std::array<double, 2>, 2>& cov,
                                       const std::array<std::array<double, 2>, 2>& jac) {
  std::array<double, 2> out{};
  for (int r = 0; r < 2; ++r) {
    double v = 0.0;
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k) v += jac[r][i] * cov[i][k] * jac[r][k];
    out[r] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

inline double full_loglik(const PathStatistics& st, const TransformedParams& tp) {
  double v = st.log_x_sum + st.log_remaining_sum +
             static_cast<double>(st.n) * std::log(tp.alpha_p) -
             tp.alpha_p * st.compensator_coefficient(tp.beta_p);
  for (Count i = 0; i < st.n; ++i) v += std::log(imitation_factor(i, st.m, tp.beta_p));
  return v;
}

inline void finish_transformed(const PathStatistics& st, FitResult& fit) {
  fit.natural_hat = from_transformed(fit.tp_hat, st.m);
  fit.loglik = full_loglik(st, fit.tp_hat);
  const auto sc = score_and_curvature(st, fit.tp_hat);
  fit.gradient = sc.gradient;
  fit.std_errors = standard_errors(sc.hessian);
  const double a = fit.tp_hat.alpha_p, b = fit.tp_hat.beta_p;
  // alpha = a (1 + b), beta = a b
  fit.natural_std_errors =
      propagate(inverse_information(sc.hessian), {{{1.0 + b, a}, {b, a}}});
}

inline void require_two_events(const PathStatistics& st) {
  if (st.n < 2)
    throw InsufficientData("fitting needs at least two adoptions, got " +
                           std::to_string(st.n));
}

}  // namespace detail

/// Maximum likelihood in (alpha', beta'). alpha' is profiled out in closed
/// form; the profiled likelihood in beta' is maximized by bracket expansion,
/// a log-spaced grid scan and a safeguarded Newton iteration on g'(beta').
inline FitResult fit_mle(const PathStatistics& st, const FitOptions& opt = {}) {
  detail::require_two_events(st);
  const detail::Profile g{st};
  FitResult fit;

  double lo = opt.beta_p_lower;
  double hi = opt.beta_p_upper;
  for (int k = 0; k < opt.max_expansions && g.derivatives(hi).first > 0.0; ++k) hi *= 2.0;

  auto boundary_fit = [&](double b) {
    fit.tp_hat = {profile_alpha(st, b), b};
    fit.boundary = true;
    fit.converged = false;
    fit.bracket = {lo, hi};
    detail::finish_transformed(st, fit);
    return fit;
  };
  if (g.derivatives(hi).first > 0.0) return boundary_fit(hi);
  if (g.derivatives(lo).first < 0.0) return boundary_fit(lo);

  // Coarse scan to localize the maximum.
  const int npts = std::max(opt.grid_points, 3);
  std::vector<double> grid(static_cast<std::size_t>(npts));
  const double step = std::log(hi / lo) / (npts - 1);
  for (int k = 0; k < npts; ++k) grid[static_cast<std::size_t>(k)] = lo * std::exp(step * k);
  grid.back() = hi;
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double v = g.value(grid[k]);
    if (v > best_value) {
      best_value = v;
      best = k;
    }
  }
  double left = grid[best == 0 ? 0 : best - 1];
  double right = grid[std::min(best + 1, grid.size() - 1)];
  // g' >= 0 at left and <= 0 at right for a unimodal profile; widen to the
  // full bracket if rounding in the scan says otherwise.
  if (g.derivatives(left).first < 0.0) left = lo;
  if (g.derivatives(right).first > 0.0) right = hi;

  double b = grid[best];
  int it = 0;
  bool done = false;
  for (; it < opt.max_iterations; ++it) {
    const auto [d1, d2] = g.derivatives(b);
    if (std::abs(d1) < opt.gradient_tolerance) {
      done = true;
      break;
    }
    if (d1 > 0.0) left = b; else right = b;
    if (right - left < opt.relative_width_tolerance * b) {
      done = true;
      break;
    }
    double next = d2 < 0.0 ? b - d1 / d2 : 0.5 * (left + right);
    if (!(next > left && next < right)) next = 0.5 * (left + right);
    b = next;
  }
  fit.iterations = it;
  fit.tp_hat = {profile_alpha(st, b), b};
  fit.bracket = {left, right};
  detail::finish_transformed(st, fit);
  fit.converged = done;
  return fit;
}

inline FitResult fit_mle(const ObservedPath& path, const PriceResponse& x,
                         const FitOptions& opt = {}) {
  return fit_mle(PathStatistics::from(path, x), opt);
}

/// Maximum likelihood directly in (alpha, beta) by damped Newton ascent.
/// The log-likelihood is jointly concave there. The result counts as
/// interior (boundary == false) only when 0 < beta_hat < alpha_hat, the
/// region where the transformed parameters exist.
inline FitResult fit_mle_natural(const PathStatistics& st, const FitOptions& opt = {}) {
  detail::require_two_events(st);
  const double md = static_cast<double>(st.m);
  // Linear compensator: alpha * a0 + beta * a1.
  const double a0 = st.base_exposure;
  const double a1 = st.imitation_exposure - st.base_exposure;
  const Count last_rate = std::min(st.n, st.m - 1);
  const bool tail_counts = st.n < st.m && st.exposure.back() > 0.0;

  auto feasible = [&](double alpha, double beta) {
    const Count top = tail_counts ? last_rate : st.n - 1;
    // rate is linear in i, so the two extremes suffice
    return alpha > 0.0 && alpha + beta * static_cast<double>(top) / md > 0.0;
  };
  auto value = [&](double alpha, double beta) {
    double v = -alpha * a0 - beta * a1;
    for (Count i = 0; i < st.n; ++i) v += std::log(alpha + beta * static_cast<double>(i) / md);
    return v;
  };

  double alpha = static_cast<double>(st.n) / a0;
  double beta = 0.0;
  FitResult fit;
  int it = 0;
  bool done = false;
  std::array<double, 2> grad{};
  std::array<std::array<double, 2>, 2> hess{};
  for (; it < opt.max_iterations; ++it) {
    grad = {-a0, -a1};
    hess = {};
    for (Count i = 0; i < st.n; ++i) {
      const double u = static_cast<double>(i) / md;
      const double inv = 1.0 / (alpha + beta * u);
      grad[0] += inv;
      grad[1] += u * inv;
      hess[0][0] -= inv * inv;
      hess[0][1] -= u * inv * inv;
      hess[1][1] -= u * u * inv * inv;
    }
    hess[1][0] = hess[0][1];
    if (std::hypot(grad[0], grad[1]) < opt.gradient_tolerance) {
      done = true;
      break;
    }
    const double det = hess[0][0] * hess[1][1] - hess[0][1] * hess[0][1];
    double da, db;
    if (det > 0.0) {
      da = -(hess[1][1] * grad[0] - hess[0][1] * grad[1]) / det;
      db = -(-hess[1][0] * grad[0] + hess[0][0] * grad[1]) / det;
    } else {
      da = grad[0] / -hess[0][0];
      db = 0.0;
    }
    const double current = value(alpha, beta);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const double na = alpha + t * da, nb = beta + t * db;
      if (feasible(na, nb) && value(na, nb) >= current - 1e-12 * std::abs(current)) {
        moved = na != alpha || nb != beta;
        alpha = na;
        beta = nb;
        break;
      }
    }
    if (!moved) break;
  }
  fit.iterations = it;
  fit.natural_hat = {alpha, beta, st.m};
  fit.natural_std_errors = detail::standard_errors(hess);
  fit.converged = done;
  fit.boundary = !(beta > 0.0 && beta < alpha);
  if (!fit.boundary) {
    fit.tp_hat = {alpha - beta, beta / (alpha - beta)};
    const auto sc = score_and_curvature(st, fit.tp_hat);
    fit.gradient = sc.gradient;
    fit.std_errors = detail::standard_errors(sc.hessian);
    fit.loglik = detail::full_loglik(st, fit.tp_hat);
  } else {
    fit.converged = false;
    fit.gradient = grad;
    fit.loglik = value(alpha, beta) + st.log_x_sum + st.log_remaining_sum;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    fit.tp_hat = {nan, nan};
    fit.std_errors = {nan, nan};
  }
  fit.bracket = {fit.tp_hat.beta_p, fit.tp_hat.beta_p};
  return fit;
}

inline FitResult fit_mle_natural(const ObservedPath& path, const PriceResponse& x,
                                 const FitOptions& opt = {}) {
  return fit_mle_natural(PathStatistics::from(path, x), opt);
}

}  // namespace bassmle

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>

#include "bassmle/errors.hpp"

namespace bassmle {

using Count = std::int64_t;

/// Natural Bass parameters: innovation rate alpha, imitation rate beta and
/// market size m.
struct MarketParams {
  double alpha;
  double beta;
  Count m;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw InvalidParameter("alpha must be positive and finite");
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw InvalidParameter("beta must be positive and finite");
    if (m < 1) throw InvalidParameter("market size m must be >= 1");
  }
};

/// Reparametrization used by the estimator:
///   alpha_p = alpha - beta,  beta_p = beta / (alpha - beta).
struct TransformedParams {
  double alpha_p;
  double beta_p;

  void validate() const {
    if (!(alpha_p > 0.0) || !std::isfinite(alpha_p))
      throw InvalidParameter("alpha' must be positive and finite");
    if (!(beta_p > 0.0) || !std::isfinite(beta_p))
      throw InvalidParameter("beta' must be positive and finite");
  }
};

/// Price response x(r) > 0. Evaluation throws DomainError if the wrapped
/// function leaves (0, inf) for the requested price.
class PriceResponse {
 public:
  PriceResponse(std::string name, std::function<double(double)> fn)
      : name_(std::move(name)), fn_(std::move(fn)) {}

  /// x(r) = c for every price.
  static PriceResponse constant(double c = 1.0) {
    if (!(c > 0.0) || !std::isfinite(c))
      throw InvalidParameter("constant price response must be positive");
    return PriceResponse("const", [c](double) { return c; });
  }

  /// x(r) = exp(-r).
  static PriceResponse exponential() {
    return PriceResponse("exp", [](double r) { return std::exp(-r); });
  }

  double operator()(double price) const {
    if (!std::isfinite(price)) throw DomainError("price must be finite");
    const double v = fn_(price);
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError("price response is not positive at price " +
                        std::to_string(price));
    return v;
  }

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  std::function<double(double)> fn_;
};

inline void check_state(Count j, Count m) {
  if (j < 0 || j > m)
    throw DomainError("adoption count " + std::to_string(j) +
                      " outside [0, " + std::to_string(m) + "]");
}

/// Price-free part of the adoption rate, (m - j)(alpha + beta j / m).
inline double xi(Count j, const MarketParams& p) {
  check_state(j, p.m);
  const double md = static_cast<double>(p.m);
  const double jd = static_cast<double>(j);
  return (md - jd) * (p.alpha + p.beta * jd / md);
}

/// Transition rate to the (j+1)-st adoption at the posted price.
inline double lambda(Count j, double price, const MarketParams& p,
                     const PriceResponse& x) {
  return xi(j, p) * x(price);
}

inline TransformedParams to_transformed(const MarketParams& p) {
  p.validate();
  if (!(p.alpha > p.beta))
    throw InvalidParameter("transform requires alpha > beta");
  const double ap = p.alpha - p.beta;
  return {ap, p.beta / ap};
}

inline MarketParams from_transformed(const TransformedParams& tp, Count m) {
  tp.validate();
  if (m < 1) throw InvalidParameter("market size m must be >= 1");
  const double beta = tp.beta_p * tp.alpha_p;
  return {tp.alpha_p + beta, beta, m};
}

/// 1 + (1 + j/m) beta', the multiplier of alpha' in the transformed rate.
inline double imitation_factor(Count j, Count m, double beta_p) {
  return 1.0 + (1.0 + static_cast<double>(j) / static_cast<double>(m)) * beta_p;
}

/// xi written in transformed coordinates: (m - j) alpha' (1 + (1 + j/m) beta').
inline double xi_transformed(Count j, const TransformedParams& tp, Count m) {
  check_state(j, m);
  return static_cast<double>(m - j) * tp.alpha_p *
         imitation_factor(j, m, tp.beta_p);
}

}  // namespace bassmle

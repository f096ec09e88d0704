#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "bassmle/core_model.hpp"
#include "bassmle/observed_path.hpp"
#include "bassmle/pricing.hpp"
#include "bassmle/random.hpp"

namespace bassmle {

/// Stop at a fixed observation horizon.
struct StopAtHorizon {
  double horizon;
};

/// Stop at the n-th adoption; the observation window then extends `tail`
/// past t_n without further adoptions.
struct StopAtCount {
  Count n;
  double tail = 0.0;
};

using StopRule = std::variant<StopAtHorizon, StopAtCount>;

struct SimConfig {
  MarketParams params;
  PriceResponse x = PriceResponse::constant();
  PricingPolicy policy = PricingPolicy::constant(0.0);
  StopRule stop = StopAtHorizon{1.0};
  std::uint64_t seed = 0;

  void validate() const {
    params.validate();
    if (const auto* h = std::get_if<StopAtHorizon>(&stop)) {
      if (!(h->horizon >= 0.0) || !std::isfinite(h->horizon))
        throw InvalidParameter("horizon must be finite and nonnegative");
    } else {
      const auto& c = std::get<StopAtCount>(stop);
      if (c.n < 0 || c.n > params.m)
        throw InvalidParameter("target adoption count must lie in [0, m]");
      if (!(c.tail >= 0.0) || !std::isfinite(c.tail))
        throw InvalidParameter("tail window must be finite and nonnegative");
    }
  }
};

namespace detail {

/// Records the posted price as contiguous segments, merging repeats.
class PriceRecorder {
 public:
  void post(double now, double price) {
    if (!open_) {
      open_ = Open{now, price};
      return;
    }
    if (price == open_->price) return;
    if (now > open_->start) segments_.push_back({open_->start, now, open_->price});
    open_ = Open{now, price};
  }

  PolicyHistory history(double now, Count adoptions,
                        const std::vector<double>& times) {
    scratch_ = segments_;
    if (open_ && now > open_->start) scratch_.push_back({open_->start, now, open_->price});
    PolicyHistory h;
    h.now = now;
    h.adoptions = adoptions;
    h.adoption_times = times;
    h.past_segments = scratch_;
    if (!scratch_.empty()) h.current_price = scratch_.back().price;
    return h;
  }

  double price() const { return open_->price; }

  PricePath close(double horizon) {
    if (open_ && horizon > open_->start)
      segments_.push_back({open_->start, horizon, open_->price});
    open_.reset();
    return PricePath(std::move(segments_));
  }

 private:
  struct Open {
    double start;
    double price;
  };
  std::optional<Open> open_;
  std::vector<PriceSegment> segments_;
  std::vector<PriceSegment> scratch_;
};

}  // namespace detail

/// Exact sample path of the adoption process. From state j at time s the
/// next adoption time u solves xi(j) * int_s^u x(r_v) dv = E, E ~ Exp(1),
/// which is inverted in closed form across constant-price stretches. The
/// policy is re-queried after every adoption and at its review times.
inline ObservedPath simulate(const SimConfig& config) {
  config.validate();
  const auto& p = config.params;
  RandomStream rng(config.seed);

  const auto* until_horizon = std::get_if<StopAtHorizon>(&config.stop);
  const auto* until_count = std::get_if<StopAtCount>(&config.stop);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double limit = until_horizon ? until_horizon->horizon : kInf;
  const Count target = until_count ? until_count->n : p.m;

  ObservedPath path;
  path.m = p.m;
  std::vector<double>& times = path.adoption_times;
  times.reserve(static_cast<std::size_t>(std::min<Count>(target, 1 << 20)));
  detail::PriceRecorder prices;

  double s = 0.0;
  Count j = 0;
  auto requery = [&] {
    prices.post(s, config.policy(prices.history(s, j, times)));
  };
  requery();
  double budget = rng.exponential();

  while (j < target && s < limit) {
    const double review = config.policy.next_review_after(s).value_or(kInf);
    const double stretch_end = std::min(review, limit);
    const double rate = xi(j, p) * config.x(prices.price());
    const double arrival = rate > 0.0 ? s + budget / rate : kInf;

    if (arrival < stretch_end || (arrival == stretch_end && stretch_end == limit)) {
      s = arrival > s ? arrival : std::nextafter(s, kInf);
      ++j;
      times.push_back(s);
      requery();
      budget = rng.exponential();
      continue;
    }
    if (stretch_end == kInf) break;  // rate is zero and nothing changes
    budget -= rate * (stretch_end - s);
    if (budget < 0.0) budget = 0.0;
    s = stretch_end;
    if (s < limit) requery();
  }

  if (until_count) {
    // Adoption-free observation window after the n-th event.
    const double end = s + until_count->tail;
    while (true) {
      const double review = config.policy.next_review_after(s).value_or(kInf);
      if (!(review < end)) break;
      s = review;
      requery();
    }
    s = end;
  } else {
    s = limit;
  }
  path.horizon = s;
  path.price_path = prices.close(s);
  return path;
}

/// Path with exactly n adoptions; horizon t_n plus the configured tail.
inline ObservedPath simulate_until_n(const SimConfig& config) {
  if (!std::holds_alternative<StopAtCount>(config.stop))
    throw InvalidParameter("simulate_until_n requires a target adoption count");
  return simulate(config);
}

}  // namespace bassmle

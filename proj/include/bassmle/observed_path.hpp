#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "bassmle/core_model.hpp"
#include "bassmle/pricing.hpp"

namespace bassmle {

/// Observed record of one market: adoption times t_1 < ... < t_n on
/// (0, horizon] and the price path over [0, horizon]. D_0 = 0 by convention.
struct ObservedPath {
  Count m = 1;
  double horizon = 0.0;
  std::vector<double> adoption_times;
  PricePath price_path;

  Count adoptions() const noexcept {
    return static_cast<Count>(adoption_times.size());
  }

  void validate() const {
    if (m < 1) throw InvalidParameter("market size m must be >= 1");
    if (!(horizon >= 0.0) || !std::isfinite(horizon))
      throw InvalidParameter("horizon must be finite and nonnegative");
    if (adoptions() > m) throw InvalidParameter("more adoptions than market size");
    if (price_path.horizon() != horizon)
      throw InvalidParameter("price path does not cover [0, horizon]");
    double prev = 0.0;
    for (double t : adoption_times) {
      if (!(t > prev))
        throw InvalidParameter("adoption times must be strictly increasing and positive");
      prev = t;
    }
    if (prev > horizon) throw InvalidParameter("adoption after the horizon");
  }

  bool operator==(const ObservedPath&) const = default;
};

/// View of `path` restricted to the information available at `now`.
/// Adoption times are a span into `path`; `past` receives the price
/// segments clipped to [0, now].
inline PolicyHistory history_at(const ObservedPath& path, double now,
                                std::vector<PriceSegment>& past) {
  if (!(now >= 0.0 && now <= path.horizon))
    throw DomainError("history does not cover time " + std::to_string(now));
  PolicyHistory h;
  h.now = now;
  const auto end = std::upper_bound(path.adoption_times.begin(),
                                    path.adoption_times.end(), now);
  h.adoptions = static_cast<Count>(end - path.adoption_times.begin());
  h.adoption_times = std::span<const double>(path.adoption_times.data(),
                                             static_cast<std::size_t>(h.adoptions));
  past.clear();
  for (const auto& seg : path.price_path.segments()) {
    if (seg.start >= now) break;
    past.push_back({seg.start, std::min(seg.end, now), seg.price});
  }
  if (!past.empty()) h.current_price = past.back().price;
  h.past_segments = past;
  return h;
}

/// Price a policy posts at `now` given an observed history. Only the part of
/// `history` on [0, now] is shown to the policy.
inline double realize_policy(const PricingPolicy& policy,
                             const ObservedPath& history, double now) {
  history.validate();
  std::vector<PriceSegment> past;
  return policy(history_at(history, now, past));
}

}  // namespace bassmle

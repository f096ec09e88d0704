#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bassmle/core_model.hpp"
#include "bassmle/errors.hpp"

namespace bassmle {

/// Constant price on [start, end).
struct PriceSegment {
  double start;
  double end;
  double price;

  bool operator==(const PriceSegment&) const = default;
};

/// Piecewise-constant price trajectory covering [0, horizon]. Segments are
/// half-open except the last, which is closed at the horizon. A path with
/// horizon 0 has no segments.
class PricePath {
 public:
  PricePath() = default;

  explicit PricePath(std::vector<PriceSegment> segments)
      : segments_(std::move(segments)) {
    if (segments_.empty()) return;
    if (segments_.front().start != 0.0)
      throw InvalidParameter("price path must start at time 0");
    for (std::size_t k = 0; k < segments_.size(); ++k) {
      const auto& s = segments_[k];
      if (!std::isfinite(s.price) || !std::isfinite(s.end))
        throw InvalidParameter("price segment must be finite");
      if (!(s.end > s.start))
        throw InvalidParameter("price segment must have end > start");
      if (k > 0 && s.start != segments_[k - 1].end)
        throw InvalidParameter("price segments must be contiguous");
    }
  }

  /// One segment [0, horizon] at a fixed price.
  static PricePath constant(double price, double horizon) {
    if (horizon == 0.0) return {};
    return PricePath({{0.0, horizon, price}});
  }

  double horizon() const noexcept {
    return segments_.empty() ? 0.0 : segments_.back().end;
  }
  std::span<const PriceSegment> segments() const noexcept { return segments_; }
  bool empty() const noexcept { return segments_.empty(); }

  bool operator==(const PricePath&) const = default;

 private:
  std::vector<PriceSegment> segments_;
};

namespace detail {

inline void check_time(const PricePath& path, double s) {
  if (path.empty()) throw DomainError("price path is empty");
  if (!(s >= 0.0 && s <= path.horizon()))
    throw DomainError("time " + std::to_string(s) + " outside [0, " +
                      std::to_string(path.horizon()) + "]");
}

}  // namespace detail

/// Price posted at time s.
inline double price_at(const PricePath& path, double s) {
  detail::check_time(path, s);
  const auto segs = path.segments();
  auto it = std::upper_bound(
      segs.begin(), segs.end(), s,
      [](double t, const PriceSegment& seg) { return t < seg.end; });
  if (it == segs.end()) return segs.back().price;
  return it->price;
}

/// Price in force just before s (left limit); at s = 0 the first price.
inline double price_left_limit(const PricePath& path, double s) {
  detail::check_time(path, s);
  const auto segs = path.segments();
  auto it = std::lower_bound(
      segs.begin(), segs.end(), s,
      [](const PriceSegment& seg, double t) { return seg.end < t; });
  if (it == segs.end()) return segs.back().price;
  return it->price;
}

/// Exact integral of x(r_s) over [a, b].
inline double integrate_x(const PricePath& path, const PriceResponse& x,
                          double a, double b) {
  if (!(a <= b)) throw DomainError("integration interval is inverted");
  if (path.empty() && a == 0.0 && b == 0.0) return 0.0;
  detail::check_time(path, a);
  detail::check_time(path, b);
  if (a == b) return 0.0;
  double total = 0.0;
  for (const auto& seg : path.segments()) {
    if (seg.end <= a) continue;
    if (seg.start >= b) break;
    const double lo = std::max(a, seg.start);
    const double hi = std::min(b, seg.end);
    total += x(seg.price) * (hi - lo);
  }
  return total;
}

/// Integrals of x(r_s) between consecutive knots. `knots` must be
/// nondecreasing and lie in [0, horizon]. Single sweep over segments.
inline std::vector<double> integrate_x_between(const PricePath& path,
                                               const PriceResponse& x,
                                               std::span<const double> knots) {
  std::vector<double> out;
  if (knots.size() < 2) return out;
  out.reserve(knots.size() - 1);
  if (!(knots.front() >= 0.0) || knots.back() > path.horizon())
    throw DomainError("integration knots outside the price path");
  const auto segs = path.segments();
  std::vector<double> rates(segs.size());
  for (std::size_t k = 0; k < segs.size(); ++k) rates[k] = x(segs[k].price);

  std::size_t k = 0;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
    const double a = knots[i];
    const double b = knots[i + 1];
    if (!(a <= b)) throw DomainError("integration knots must be nondecreasing");
    while (k < segs.size() && segs[k].end <= a) ++k;
    double total = 0.0;
    for (std::size_t q = k; q < segs.size() && segs[q].start < b; ++q) {
      total += rates[q] * (std::min(b, segs[q].end) - std::max(a, segs[q].start));
    }
    out.push_back(total);
  }
  return out;
}

/// Information available to a pricing policy at time `now`: adoptions up to
/// and including `now`, the price segments on [0, now], and the price in
/// force just before `now` (absent at time 0).
struct PolicyHistory {
  double now = 0.0;
  Count adoptions = 0;
  std::span<const double> adoption_times;
  std::span<const PriceSegment> past_segments;
  std::optional<double> current_price;
};

/// Non-anticipating pricing rule. The rule sees only a PolicyHistory, and is
/// re-queried after every adoption and at each review time.
class PricingPolicy {
 public:
  using Rule = std::function<double(const PolicyHistory&)>;

  PricingPolicy(std::string name, Rule rule, std::vector<double> review_times = {})
      : name_(std::move(name)), rule_(std::move(rule)),
        reviews_(std::move(review_times)) {
    std::sort(reviews_.begin(), reviews_.end());
  }

  static PricingPolicy constant(double price) {
    return PricingPolicy("constant", [price](const PolicyHistory&) { return price; });
  }

  /// r(j) = base + slope * j.
  static PricingPolicy state_feedback(double base, double slope) {
    return PricingPolicy("state_feedback", [base, slope](const PolicyHistory& h) {
      return base + slope * static_cast<double>(h.adoptions);
    });
  }

  /// Follows a fixed schedule; the last price is held past its horizon.
  static PricingPolicy schedule(PricePath path) {
    if (path.empty()) throw InvalidParameter("schedule needs at least one segment");
    std::vector<double> reviews;
    const auto segs = path.segments();
    for (std::size_t k = 1; k < segs.size(); ++k) reviews.push_back(segs[k].start);
    return PricingPolicy(
        "schedule",
        [p = std::move(path)](const PolicyHistory& h) {
          return price_at(p, std::min(h.now, p.horizon()));
        },
        std::move(reviews));
  }

  double operator()(const PolicyHistory& h) const { return rule_(h); }

  /// First review time strictly after `now`.
  std::optional<double> next_review_after(double now) const {
    auto it = std::upper_bound(reviews_.begin(), reviews_.end(), now);
    if (it == reviews_.end()) return std::nullopt;
    return *it;
  }

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
  Rule rule_;
  std::vector<double> reviews_;
};

}  // namespace bassmle

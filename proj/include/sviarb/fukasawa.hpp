#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "sviarb/error.hpp"
#include "sviarb/numerics.hpp"
#include "sviarb/svi.hpp"

// Fukasawa necessary conditions for SVI in normalized coordinates: both
// factors of G1 positive on the whole line. For fixed (b, rho) this gives a
// threshold F(b, rho) on alpha and an open interval I for mu.
namespace sviarb::fukasawa {

enum class Side { Minus, Plus };

/// Tolerance used to route b(1 +- rho) = 2 to the boundary-regime formulas.
inline constexpr double kRegimeTol = 1e-12;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Minimum of N: l* = -rho / sqrt(1 - rho^2).
inline double l_star(double rho) {
  if (!(std::abs(rho) < 1.0)) fail(ErrorCode::DomainError, "l_star needs |rho| < 1");
  return -rho / std::sqrt(1.0 - rho * rho);
}

namespace detail {

// l* with the conventions l* = +inf at rho = -1 and -inf at rho = +1.
inline double l_star_ext(double rho) {
  if (rho <= -1.0) return kInf;
  if (rho >= 1.0) return -kInf;
  return l_star(rho);
}

inline void require_b_rho(double b, double rho) {
  if (!(b > 0.0) || !std::isfinite(b)) fail(ErrorCode::DomainError, "b must be positive and finite");
  if (!(std::abs(rho) <= 1.0)) fail(ErrorCode::DomainError, "|rho| must be <= 1");
}

// 2(N - lN') + N(2 -+ N') over 2N', i.e. L_-/L_+ without large cancellations.
inline double L_value(double l, double alpha, double b, double rho, Side side) {
  const auto st = sviarb::detail::n_stable(alpha, b, rho, l);
  const double n_minus_lnp = alpha + b / st.s;
  const double wing = side == Side::Minus ? st.two_plus : st.two_minus;
  return (2.0 * n_minus_lnp + st.n * wing) / (2.0 * st.d1);
}

}  // namespace detail

/// L_-(l) = 2N(l)(1/N'(l) + 1/4) - l on l < l*.
inline double L_minus(double l, double alpha, double b, double rho) {
  detail::require_b_rho(b, rho);
  if (!(l < detail::l_star_ext(rho))) fail(ErrorCode::DomainError, "L_minus is defined on l < l*");
  return detail::L_value(l, alpha, b, rho, Side::Minus);
}

/// L_+(l) = 2N(l)(1/N'(l) - 1/4) - l on l > l*.
inline double L_plus(double l, double alpha, double b, double rho) {
  detail::require_b_rho(b, rho);
  if (!(l > detail::l_star_ext(rho))) fail(ErrorCode::DomainError, "L_plus is defined on l > l*");
  return detail::L_value(l, alpha, b, rho, Side::Plus);
}

/// g_-(b,rho) on (-inf, l*] and g_+(b,rho) on [l*, +inf); L_-'(l) = 0 iff
/// g_-(l) = alpha/b (resp. L_+).
inline double g_pm(double b, double rho, double l, Side side) {
  detail::require_b_rho(b, rho);
  const double ls = detail::l_star_ext(rho);
  if (side == Side::Minus ? !(l <= ls) : !(l >= ls)) {
    fail(ErrorCode::DomainError, "g_pm evaluated outside its half-line");
  }
  const double s = std::hypot(l, 1.0);
  const double al = std::abs(l);
  const double r = 1.0 / (s + al);
  double lin, quad, tail;  // rho*s + l, the bracketed factor, rho*l + s
  if (side == Side::Minus) {
    if (l < 0.0) {
      lin = rho * r - al * (1.0 - rho);
      quad = (0.5 + 0.25 * b * rho) * r + 0.25 * al * (2.0 - b * (1.0 - rho));
      tail = r + al * (1.0 - rho);
    } else {
      lin = rho * s + l;
      quad = s * (0.5 + 0.25 * b * rho) + 0.25 * b * l;
      tail = rho * l + s;
    }
  } else {
    if (l > 0.0) {
      lin = rho * r + l * (1.0 + rho);
      quad = (0.5 - 0.25 * b * rho) * r + 0.25 * l * (2.0 - b * (1.0 + rho));
      tail = r + l * (1.0 + rho);
    } else {
      lin = rho * s + l;
      quad = s * (0.5 - 0.25 * b * rho) - 0.25 * b * l;
      tail = rho * l + s;
    }
  }
  return lin * lin * quad - tail;
}

/// Shape of g_+-: monotone, or a single minimum at the stationary abscissa
/// m_+-. `s` is l* when monotone, otherwise the other point where
/// g = -sqrt(1 - rho^2). On the boundary slope (b(1 -+ rho) = 2) g is
/// monotone the "wrong" way and `wing_boundary` is set: no finite l_+- exists.
struct GShape {
  bool monotone = true;
  std::optional<double> m_threshold;
  double s = 0.0;
  bool wing_boundary = false;
};

inline GShape g_shape(double b, double rho, Side side) {
  detail::require_b_rho(b, rho);
  const double ls = detail::l_star_ext(rho);
  if (side == Side::Minus && rho >= 1.0) fail(ErrorCode::DomainError, "g_- has an empty domain at rho = 1");
  if (side == Side::Plus && rho <= -1.0) fail(ErrorCode::DomainError, "g_+ has an empty domain at rho = -1");

  const double slope = side == Side::Minus ? b * (1.0 - rho) : b * (1.0 + rho);
  if (slope > 2.0 + kRegimeTol) fail(ErrorCode::DomainError, "wing slope above 2");

  GShape shape;
  shape.s = ls;
  if (std::abs(slope - 2.0) <= kRegimeTol) {
    shape.wing_boundary = true;
    return shape;
  }
  const double level = -std::sqrt(std::max(0.0, 1.0 - rho * rho));
  if (side == Side::Minus) {
    const double lead = 2.0 + b * rho;
    const double m = -b / std::sqrt((lead - b) * (lead + b));
    shape.m_threshold = m;
    if (m >= ls) return shape;
    auto f = [&](double l) { return g_pm(b, rho, l, Side::Minus) - level; };
    if (f(m) >= 0.0) return shape;
    shape.monotone = false;
    shape.s = numerics::find_root(f, numerics::expand_bracket(f, m, -1), 0.0);
  } else {
    const double lead = 2.0 - b * rho;
    const double m = b / std::sqrt((lead - b) * (lead + b));
    shape.m_threshold = m;
    if (m <= ls) return shape;
    auto f = [&](double l) { return g_pm(b, rho, l, Side::Plus) - level; };
    if (f(m) >= 0.0) return shape;
    shape.monotone = false;
    shape.s = numerics::find_root(f, numerics::expand_bracket(f, m, +1), 0.0);
  }
  return shape;
}

/// The unique l_- < s_- (resp. l_+ > s_+) with b*g_+-(l) = alpha: the point
/// where L_- attains its supremum (resp. L_+ its infimum).
inline double l_pm_of_alpha(double alpha, double b, double rho, Side side, const GShape& shape) {
  if (shape.wing_boundary) {
    fail(ErrorCode::NoFiniteOptimum, "extremum of L is attained at infinity on a boundary wing");
  }
  const double level = -std::sqrt(std::max(0.0, 1.0 - rho * rho));
  const double target = alpha / b;
  if (!std::isfinite(target) || target < level) {
    fail(ErrorCode::DomainError, "alpha must be >= -b*sqrt(1-rho^2)");
  }
  if (target == level) return shape.s;
  const int dir = side == Side::Minus ? -1 : +1;
  auto f = [&](double l) { return g_pm(b, rho, l, side) - target; };
  if (f(shape.s) >= 0.0) return shape.s;
  return numerics::find_root(f, numerics::expand_bracket(f, shape.s, dir), 0.0);
}

inline double l_pm_of_alpha(double alpha, double b, double rho, Side side) {
  return l_pm_of_alpha(alpha, b, rho, side, g_shape(b, rho, side));
}

namespace detail {

// sup_{l<l*} L_- (or -alpha/2 on a boundary left wing).
inline double lower_bound(double alpha, double b, double rho, const GShape& minus_shape) {
  if (minus_shape.wing_boundary) return -0.5 * alpha;
  const double l = l_pm_of_alpha(alpha, b, rho, Side::Minus, minus_shape);
  return L_value(l, alpha, b, rho, Side::Minus);
}

// inf_{l>l*} L_+ (or alpha/2 on a boundary right wing).
inline double upper_bound(double alpha, double b, double rho, const GShape& plus_shape) {
  if (plus_shape.wing_boundary) return 0.5 * alpha;
  const double l = l_pm_of_alpha(alpha, b, rho, Side::Plus, plus_shape);
  return L_value(l, alpha, b, rho, Side::Plus);
}

}  // namespace detail

/// Fukasawa threshold F(b, rho): the interval for mu is non-empty iff
/// alpha > F. F(2, 0) = 0 and F(b, +-1) = 0 by convention.
inline double fukasawa_threshold(double b, double rho) {
  detail::require_b_rho(b, rho);
  const WingRegime regime = wing_regime(b, rho, kRegimeTol);
  if (regime == WingRegime::OverLimit) fail(ErrorCode::DomainError, "wing slope above 2: no threshold");
  if (std::abs(rho) == 1.0 || regime == WingRegime::B4) return 0.0;

  const GShape minus = g_shape(b, rho, Side::Minus);
  const GShape plus = g_shape(b, rho, Side::Plus);
  auto width = [&](double alpha) {
    return detail::upper_bound(alpha, b, rho, plus) - detail::lower_bound(alpha, b, rho, minus);
  };
  const double floor = -b * std::sqrt(1.0 - rho * rho);
  const double start = floor + 1e-9;
  const double w_start = width(start);
  if (w_start > 0.0) return floor;

  double offset = std::max(1.0, b) - floor;
  double w_hi = width(floor + offset);
  for (int i = 0; w_hi <= 0.0; ++i) {
    if (i == 60) fail(ErrorCode::BracketFailure, "interval width never became positive");
    offset *= 2.0;
    w_hi = width(floor + offset);
  }
  return numerics::find_root(width, numerics::Bracket{start, floor + offset, w_start, w_hi}, 0.0);
}

/// Open interval ]lower, upper[ of admissible mu; empty when alpha <= F.
struct MuInterval {
  double lower = 0.0;
  double upper = 0.0;
  WingRegime regime = WingRegime::B1;

  bool empty() const noexcept { return !(lower < upper); }
  bool contains(double mu) const noexcept { return lower < mu && mu < upper; }
};

inline MuInterval mu_interval(double alpha, double b, double rho) {
  detail::require_b_rho(b, rho);
  const WingRegime regime = wing_regime(b, rho, kRegimeTol);
  if (regime == WingRegime::OverLimit) fail(ErrorCode::DomainError, "wing slope above 2: no interval");
  if (rho >= 1.0) {
    // Mirror of rho = -1: (a, b, 1, m) <-> (a, b, -1, -m).
    const MuInterval mirrored = mu_interval(alpha, b, -1.0);
    return {-mirrored.upper, -mirrored.lower, regime};
  }
  if (rho <= -1.0) {
    if (alpha < 0.0) fail(ErrorCode::DomainError, "alpha must be >= 0 when |rho| = 1");
    return {detail::lower_bound(alpha, b, rho, g_shape(b, rho, Side::Minus)), kInf, regime};
  }
  if (!(alpha > -b * std::sqrt(1.0 - rho * rho))) {
    fail(ErrorCode::DomainError, "alpha must be > -b*sqrt(1-rho^2)");
  }
  return {detail::lower_bound(alpha, b, rho, g_shape(b, rho, Side::Minus)),
          detail::upper_bound(alpha, b, rho, g_shape(b, rho, Side::Plus)), regime};
}

/// F(b, 0) in closed form: b * g_-(b,0)(-6b / sqrt(b^4 - 20b^2 + 64)).
inline double f_b0_closed_form(double b) {
  if (!(b > 0.0 && b < 2.0)) fail(ErrorCode::DomainError, "closed form for F(b,0) needs 0 < b < 2");
  const double b2 = b * b;
  const double l = -6.0 * b / std::sqrt(b2 * b2 - 20.0 * b2 + 64.0);
  const double s = std::hypot(l, 1.0);
  return b * (0.25 * l * l * (2.0 * s + b * l) - s);
}

/// Memo for F(b, rho) keyed on the exact bit patterns; safe to share.
class ThresholdCache {
 public:
  double threshold(double b, double rho) {
    const Key key{bits(b), bits(rho)};
    {
      std::lock_guard lock(mutex_);
      if (auto it = map_.find(key); it != map_.end()) return it->second;
    }
    const double f = fukasawa_threshold(b, rho);
    std::lock_guard lock(mutex_);
    if (map_.size() > 100000) map_.clear();
    map_.emplace(key, f);
    return f;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return map_.size();
  }

 private:
  struct Key {
    std::uint64_t b;
    std::uint64_t rho;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      return std::hash<std::uint64_t>{}(k.b * 0x9E3779B97F4A7C15ULL ^ k.rho);
    }
  };
  static std::uint64_t bits(double x) {
    std::uint64_t out;
    std::memcpy(&out, &x, sizeof out);
    return out;
  }
  mutable std::mutex mutex_;
  std::unordered_map<Key, double, KeyHash> map_;
};

}  // namespace sviarb::fukasawa

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sviarb/error.hpp"

// Black-Scholes in forward-normalized units: spot/forward 1, prices in the
// numeraire of the maturity, log-forward moneyness k and total volatility
// theta = sigma_implied * sqrt(t).
namespace sviarb::bs {

struct MoneyVol {
  double k;
  double theta;
};

enum class OptionKind { Call, Put };

inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct D12 {
  double d1;
  double d2;
};

inline D12 d1_d2(const MoneyVol& mv) {
  if (!(mv.theta > 0.0)) fail(ErrorCode::DomainError, "d1_d2 requires theta > 0");
  const double base = -mv.k / mv.theta;
  return {base + 0.5 * mv.theta, base - 0.5 * mv.theta};
}

inline double call_price(const MoneyVol& mv) {
  if (mv.theta <= 0.0) return std::max(1.0 - std::exp(mv.k), 0.0);
  const auto [d1, d2] = d1_d2(mv);
  return norm_cdf(d1) - std::exp(mv.k) * norm_cdf(d2);
}

inline double put_price(const MoneyVol& mv) {
  if (mv.theta <= 0.0) return std::max(std::exp(mv.k) - 1.0, 0.0);
  const auto [d1, d2] = d1_d2(mv);
  return std::exp(mv.k) * norm_cdf(-d2) - norm_cdf(-d1);
}

inline double price(const MoneyVol& mv, OptionKind kind) {
  return kind == OptionKind::Call ? call_price(mv) : put_price(mv);
}

/// dC/dtheta = phi(d1); identical for puts.
inline double vega_total(const MoneyVol& mv) {
  const auto [d1, d2] = d1_d2(mv);
  (void)d2;
  return norm_pdf(d1);
}

inline constexpr double kThetaMin = 1e-9;
inline constexpr double kThetaMax = 50.0;

/// Inverts the normalized price for the total volatility with Newton steps
/// kept inside a shrinking bisection bracket on [1e-9, 50]. Throws
/// PriceOutOfRange when the price is not strictly inside the attainable range.
inline double implied_total_vol(double k, double target, OptionKind kind) {
  if (!std::isfinite(k) || !std::isfinite(target)) fail(ErrorCode::PriceOutOfRange, "non-finite input");
  const double intrinsic = kind == OptionKind::Call ? std::max(1.0 - std::exp(k), 0.0)
                                                    : std::max(std::exp(k) - 1.0, 0.0);
  const double cap = kind == OptionKind::Call ? 1.0 : std::exp(k);
  if (!(target > intrinsic && target < cap)) {
    fail(ErrorCode::PriceOutOfRange, "price outside the no-arbitrage range (intrinsic, cap)");
  }
  double lo = kThetaMin, hi = kThetaMax;
  const double p_lo = price({k, lo}, kind);
  const double p_hi = price({k, hi}, kind);
  if (!(target > p_lo && target < p_hi)) {
    fail(ErrorCode::PriceOutOfRange, "price not attainable for theta in [1e-9, 50]");
  }

  // Start at the inflection point of theta -> price, where Newton is globally
  // well behaved.
  double theta = std::clamp(std::sqrt(2.0 * std::abs(k)), 0.05, 10.0);
  for (int iter = 0; iter < 200; ++iter) {
    const MoneyVol mv{k, theta};
    const double diff = price(mv, kind) - target;
    if (diff == 0.0) return theta;
    if (diff > 0.0) {
      hi = theta;
    } else {
      lo = theta;
    }
    const double vega = vega_total(mv);
    double next = theta - diff / vega;
    if (!(vega > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - theta) <= 4.0 * std::numeric_limits<double>::epsilon() * theta ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) {
      return next;
    }
    theta = next;
  }
  return theta;
}

}  // namespace sviarb::bs

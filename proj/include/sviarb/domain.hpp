#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "sviarb/error.hpp"
#include "sviarb/fukasawa.hpp"
#include "sviarb/numerics.hpp"
#include "sviarb/svi.hpp"

namespace sviarb {

/// Zeros of G2; G2 > 0 exactly on (l1, l2). l1 = -inf at rho = 1 and
/// l2 = +inf at rho = -1.
struct G2Zeros {
  double l1;
  double l2;
};

namespace detail {

inline void require_g2_domain(double alpha, double b, double rho) {
  if (!(b > 0.0) || !(std::abs(rho) <= 1.0)) fail(ErrorCode::DomainError, "need b > 0 and |rho| <= 1");
  if (std::abs(rho) == 1.0) {
    if (!(alpha >= 0.0)) fail(ErrorCode::DomainError, "alpha must be >= 0 when |rho| = 1");
  } else if (!(alpha + b * std::sqrt(1.0 - rho * rho) > 0.0)) {
    fail(ErrorCode::DomainError, "alpha + b*sqrt(1-rho^2) must be > 0");
  }
}

// 2N - b*s*(rho*s + l)^2: same sign as G2 = (b/s^3)(2N - b s (rho s + l)^2)/(2N),
// and no cancellation in the wings.
inline double g2_sign_function(double alpha, double b, double rho, double l) {
  const double s = std::hypot(l, 1.0);
  const double al = std::abs(l);
  const double r = 1.0 / (s + al);
  const double lin = l < 0.0 ? rho * r - al * (1.0 - rho) : rho * r + al * (1.0 + rho);
  const double n = alpha + b * (l < 0.0 ? r + al * (1.0 - rho) : r + al * (1.0 + rho));
  return 2.0 * n - b * s * lin * lin;
}

}  // namespace detail

inline G2Zeros g2_zeros(double alpha, double b, double rho) {
  detail::require_g2_domain(alpha, b, rho);
  if (rho == 1.0) {
    const G2Zeros mirrored = g2_zeros(alpha, b, -1.0);
    return {-mirrored.l2, -mirrored.l1};
  }
  auto z = [&](double l) { return detail::g2_sign_function(alpha, b, rho, l); };
  const double ls = fukasawa::detail::l_star_ext(rho);
  G2Zeros out{};
  out.l1 = numerics::find_root(z, numerics::expand_bracket(z, std::min(ls, 0.0), -1), 0.0);
  out.l2 = rho == -1.0 ? fukasawa::kInf
                       : numerics::find_root(z, numerics::expand_bracket(z, std::max(ls, 0.0), +1), 0.0);
  return out;
}

/// -G2(l) / (2 G1(l)); sigma* is its supremum outside (l1, l2).
inline double sigma_objective(const NormalizedParams& np, double l) {
  const GSplit gs = g_split(np, l);
  return -gs.g2 / (2.0 * gs.g1);
}

namespace detail {

// Far-wing probes: on a boundary wing the objective tends to a non-zero
// limit, which the grid in h = 1/l only approaches.
inline constexpr double kFarWing[] = {1e4, 1e6, 1e8};

// sigma* without checking the Fukasawa conditions; G1 > 0 is assumed.
inline double sigma_star_unchecked(double alpha, double b, double rho, double mu, const G2Zeros& zeros) {
  const NormalizedParams np{alpha, b, rho, mu, 1.0};
  // mu on (or rounded onto) an end of I: G1 reaches 0 where G2 < 0 and the
  // supremum is infinite.
  bool unbounded = false;
  auto objective = [&](double l) {
    const GSplit gs = g_split(np, l);
    if (!(gs.g1 > 0.0)) {
      unbounded = true;
      return 0.0;
    }
    return -gs.g2 / (2.0 * gs.g1);
  };
  auto f_of_h = [&](double h) { return objective(1.0 / h); };
  double best = 0.0;
  if (std::isfinite(zeros.l1)) {
    best = std::max(best, numerics::maximize_scalar(f_of_h, 1.0 / zeros.l1, 0.0).max);
    for (double far : kFarWing) best = std::max(best, objective(-far));
  }
  if (std::isfinite(zeros.l2)) {
    best = std::max(best, numerics::maximize_scalar(f_of_h, 0.0, 1.0 / zeros.l2).max);
    for (double far : kFarWing) best = std::max(best, objective(far));
  }
  if (unbounded || !std::isfinite(best)) return std::numeric_limits<double>::infinity();
  return best;
}

inline double sigma_star_unchecked(double alpha, double b, double rho, double mu) {
  if (rho == 1.0) return sigma_star_unchecked(alpha, b, -1.0, -mu);
  return sigma_star_unchecked(alpha, b, rho, mu, g2_zeros(alpha, b, rho));
}

}  // namespace detail

/// sigma*(alpha, b, rho, mu): G >= 0 on the real line iff sigma >= sigma*.
/// Throws FukasawaViolated unless alpha > F(b, rho) and mu lies in I.
inline double sigma_star(double alpha, double b, double rho, double mu) {
  if (!(b > 0.0) || !(std::abs(rho) <= 1.0) || !std::isfinite(alpha) || !std::isfinite(mu)) {
    fail(ErrorCode::DomainError, "sigma_star needs finite alpha, mu, b > 0 and |rho| <= 1");
  }
  if (wing_regime(b, rho, fukasawa::kRegimeTol) == WingRegime::OverLimit) {
    fail(ErrorCode::FukasawaViolated, "wing slope above 2");
  }
  if (std::abs(rho) == 1.0) {
    if (alpha < 0.0) fail(ErrorCode::FukasawaViolated, "alpha < 0 with |rho| = 1");
  } else if (!(alpha > fukasawa::fukasawa_threshold(b, rho))) {
    fail(ErrorCode::FukasawaViolated, "alpha <= F(b, rho)");
  }
  if (!fukasawa::mu_interval(alpha, b, rho).contains(mu)) fail(ErrorCode::FukasawaViolated, "mu outside I");
  return detail::sigma_star_unchecked(alpha, b, rho, mu);
}

// --- waterfall ---------------------------------------------------------------

enum class ArbitrageStatus { Free, Failure1, Failure2, Failure3, Failure4 };

constexpr std::string_view to_string(ArbitrageStatus s) {
  switch (s) {
    case ArbitrageStatus::Free: return "Free";
    case ArbitrageStatus::Failure1: return "Failure1";
    case ArbitrageStatus::Failure2: return "Failure2";
    case ArbitrageStatus::Failure3: return "Failure3";
    case ArbitrageStatus::Failure4: return "Failure4";
  }
  return "?";
}

struct ArbitrageDetail {
  static constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
  WingRegime regime = WingRegime::B1;
  double alpha = kNaN;
  double mu = kNaN;
  double threshold = kNaN;  // F(b, rho)
  std::optional<fukasawa::MuInterval> interval;
  std::optional<G2Zeros> zeros;
  std::optional<double> sigma_star;
  double offending = kNaN;  // the quantity that failed its test
  std::string message;
};

struct ArbitrageDiagnostic {
  ArbitrageStatus status = ArbitrageStatus::Free;
  ArbitrageDetail detail;

  bool free() const noexcept { return status == ArbitrageStatus::Free; }
};

/// Relative slack on sigma >= sigma*, absorbing the rounding of a recomputed
/// sigma* for parameters built with sigma = sigma* exactly.
inline constexpr double kSigmaStarRelTol = 1e-12;

namespace detail {

inline std::string fmt(const char* pattern, double x, double y = 0.0, double z = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, x, y, z);
  return buf;
}

}  // namespace detail

/// Waterfall: type 1 wing slope over 2, type 2 alpha <= F (alpha < 0 when
/// |rho| = 1), type 3 mu outside the open interval I, type 4 sigma < sigma*.
/// b = 0 is Free when a > 0. Throws DegenerateSigma for sigma = 0 and
/// InvalidInput for out-of-range fields.
inline ArbitrageDiagnostic check_no_arbitrage(const SviParams& p, fukasawa::ThresholdCache* cache = nullptr) {
  p.validate_ranges();
  ArbitrageDiagnostic out;
  ArbitrageDetail& d = out.detail;
  if (p.b == 0.0) {
    if (p.a > 0.0) {
      d.message = "Free";
      return out;
    }
    out.status = ArbitrageStatus::Failure2;
    d.offending = p.a;
    d.message = detail::fmt("Failure2: flat smile a=%.5f is not positive", p.a);
    return out;
  }
  if (!(p.sigma > 0.0)) fail(ErrorCode::DegenerateSigma, "degenerate sigma: sigma must be > 0");

  const NormalizedParams np = normalize(p);
  d.alpha = np.alpha;
  d.mu = np.mu;
  d.regime = wing_regime(p.b, p.rho, fukasawa::kRegimeTol);

  if (d.regime == WingRegime::OverLimit) {
    out.status = ArbitrageStatus::Failure1;
    const double right = p.b * (1.0 + p.rho), left = p.b * (1.0 - p.rho);
    d.offending = std::max(right, left);
    d.message = right >= left ? detail::fmt("Failure1: b(1+rho)=%.5f > 2", right)
                              : detail::fmt("Failure1: b(1-rho)=%.5f > 2", left);
    return out;
  }

  const bool extreme_rho = std::abs(p.rho) == 1.0;
  d.threshold = extreme_rho ? 0.0
                : cache     ? cache->threshold(p.b, p.rho)
                            : fukasawa::fukasawa_threshold(p.b, p.rho);
  if (extreme_rho ? np.alpha < 0.0 : np.alpha <= d.threshold) {
    out.status = ArbitrageStatus::Failure2;
    d.offending = np.alpha;
    d.message = detail::fmt(extreme_rho ? "Failure2: alpha=%.5f < F=%.5f" : "Failure2: alpha=%.5f <= F=%.5f",
                            np.alpha, d.threshold);
    return out;
  }

  d.interval = fukasawa::mu_interval(np.alpha, p.b, p.rho);
  if (!d.interval->contains(np.mu)) {
    out.status = ArbitrageStatus::Failure3;
    d.offending = np.mu;
    d.message = detail::fmt("Failure3: mu=%.5f not in (%.5f, %.5f)", np.mu, d.interval->lower, d.interval->upper);
    return out;
  }

  d.zeros = g2_zeros(np.alpha, p.b, p.rho);
  d.sigma_star = p.rho == 1.0 ? detail::sigma_star_unchecked(np.alpha, p.b, -1.0, -np.mu)
                              : detail::sigma_star_unchecked(np.alpha, p.b, p.rho, np.mu, *d.zeros);
  if (p.sigma < *d.sigma_star * (1.0 - kSigmaStarRelTol)) {
    out.status = ArbitrageStatus::Failure4;
    d.offending = p.sigma;
    d.message = detail::fmt("Failure4: sigma=%.5f < sigma*=%.5f", p.sigma, *d.sigma_star);
    return out;
  }
  d.message = "Free";
  return out;
}

// --- box coordinates -----------------------------------------------------------

/// Product-of-intervals chart of the arbitrage-free domain (|rho| < 1):
/// rho in (-1,1), b' in (0,1], u > 0, q in (-1,1), v >= 0.
struct BoxCoords {
  double rho = 0.0;
  double b_prime = 0.5;
  double u = 0.1;
  double q = 0.0;
  double v = 0.0;

  void validate() const {
    if (!(std::abs(rho) < 1.0)) fail(ErrorCode::InvalidInput, "box: rho must be in (-1, 1)");
    if (!(b_prime > 0.0 && b_prime <= 1.0)) fail(ErrorCode::InvalidInput, "box: b' must be in (0, 1]");
    if (!(u > 0.0) || !std::isfinite(u)) fail(ErrorCode::InvalidInput, "box: u must be > 0");
    if (!(std::abs(q) < 1.0)) fail(ErrorCode::InvalidInput, "box: q must be in (-1, 1)");
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::InvalidInput, "box: v must be >= 0");
  }

  friend bool operator==(const BoxCoords&, const BoxCoords&) = default;
};

/// Every intermediate quantity of the box -> parameter map.
struct BoxImage {
  SviParams params;
  double b;
  double threshold;
  double alpha;
  fukasawa::MuInterval interval;
  double mu;
  double sigma_star;
};

namespace detail {

// Everything but sigma: the caller picks v once sigma* is known.
inline BoxImage box_image_partial(double rho, double b_prime, double u, double q, fukasawa::ThresholdCache* cache) {
  BoxImage img{};
  img.b = 2.0 * b_prime / (1.0 + std::abs(rho));
  img.threshold = cache ? cache->threshold(img.b, rho) : fukasawa::fukasawa_threshold(img.b, rho);
  img.alpha = img.threshold + u;
  img.interval = fukasawa::mu_interval(img.alpha, img.b, rho);
  img.mu = 0.5 * (1.0 + q) * img.interval.upper + 0.5 * (1.0 - q) * img.interval.lower;
  img.sigma_star = sigma_star_unchecked(img.alpha, img.b, rho, img.mu);
  img.params = {0.0, img.b, rho, 0.0, 0.0};
  return img;
}

inline void box_image_finish(BoxImage& img, double v) {
  const double sigma = img.sigma_star + v;
  img.params.sigma = sigma;
  img.params.a = img.alpha * sigma;
  img.params.m = img.mu * sigma;
}

}  // namespace detail

inline BoxImage box_image(const BoxCoords& c, fukasawa::ThresholdCache* cache = nullptr) {
  c.validate();
  BoxImage img = detail::box_image_partial(c.rho, c.b_prime, c.u, c.q, cache);
  detail::box_image_finish(img, c.v);
  return img;
}

inline SviParams box_to_params(const BoxCoords& c) { return box_image(c).params; }

/// Inverse chart; NotInDomain unless the parameters are Free with |rho| < 1.
inline BoxCoords params_to_box(const SviParams& p) {
  p.validate_ranges();
  if (!(std::abs(p.rho) < 1.0) || !(p.b > 0.0)) fail(ErrorCode::NotInDomain, "box chart needs |rho| < 1 and b > 0");
  const ArbitrageDiagnostic diag = check_no_arbitrage(p);
  if (!diag.free()) fail(ErrorCode::NotInDomain, "parameters are not arbitrage-free: " + diag.detail.message);
  const ArbitrageDetail& d = diag.detail;
  BoxCoords c;
  c.rho = p.rho;
  c.b_prime = std::min(1.0, 0.5 * p.b * (1.0 + std::abs(p.rho)));
  c.u = d.alpha - d.threshold;
  c.q = 2.0 * (d.mu - d.interval->lower) / (d.interval->upper - d.interval->lower) - 1.0;
  c.v = std::max(0.0, p.sigma - *d.sigma_star);
  return c;
}

}  // namespace sviarb

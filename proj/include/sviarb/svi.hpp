#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "sviarb/black_scholes.hpp"
#include "sviarb/error.hpp"

namespace sviarb {

/// Raw SVI slice: w(k) = a + b*(rho*(k - m) + sqrt((k - m)^2 + sigma^2)).
struct SviParams {
  double a = 0.0;
  double b = 0.0;
  double rho = 0.0;
  double m = 0.0;
  double sigma = 0.0;

  /// Minimum of the smile (attained at infinity when |rho| = 1).
  double min_variance() const { return a + b * sigma * std::sqrt(1.0 - rho * rho); }

  /// Throws InvalidInput unless the fields are finite and in range
  /// (b >= 0, |rho| <= 1, sigma >= 0). The smile may still be negative.
  void validate_ranges() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(rho) || !std::isfinite(m) ||
        !std::isfinite(sigma)) {
      fail(ErrorCode::InvalidInput, "SVI parameters must be finite");
    }
    if (b < 0.0) fail(ErrorCode::InvalidInput, "b must be >= 0");
    if (std::abs(rho) > 1.0) fail(ErrorCode::InvalidInput, "|rho| must be <= 1");
    if (sigma < 0.0) fail(ErrorCode::InvalidInput, "sigma must be >= 0");
  }

  /// validate_ranges() plus a non-negative smile.
  void validate() const {
    validate_ranges();
    if (min_variance() < 0.0) fail(ErrorCode::InvalidInput, "a + b*sigma*sqrt(1-rho^2) must be >= 0");
  }

  friend bool operator==(const SviParams&, const SviParams&) = default;
};

/// SVI rescaled by sigma: w(k) = sigma * N(k/sigma - mu) with
/// N(l) = alpha + b*(rho*l + sqrt(l^2 + 1)), alpha = a/sigma, mu = m/sigma.
struct NormalizedParams {
  double alpha = 0.0;
  double b = 0.0;
  double rho = 0.0;
  double mu = 0.0;
  double sigma = 0.0;

  friend bool operator==(const NormalizedParams&, const NormalizedParams&) = default;
};

inline double svi(const SviParams& p, double k) {
  const double x = k - p.m;
  return p.a + p.b * (p.rho * x + std::hypot(x, p.sigma));
}

/// dw/dk
inline double svi_d1(const SviParams& p, double k) {
  const double x = k - p.m;
  const double root = std::hypot(x, p.sigma);
  return p.b * (p.rho + (root > 0.0 ? x / root : (x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0)));
}

/// d2w/dk2
inline double svi_d2(const SviParams& p, double k) {
  const double x = k - p.m;
  const double root = std::hypot(x, p.sigma);
  return p.b * p.sigma * p.sigma / (root * root * root);
}

inline NormalizedParams normalize(const SviParams& p) {
  if (!(p.sigma > 0.0)) fail(ErrorCode::DegenerateSigma, "sigma must be > 0 to normalize");
  return {p.a / p.sigma, p.b, p.rho, p.m / p.sigma, p.sigma};
}

inline SviParams denormalize(const NormalizedParams& np) {
  return {np.alpha * np.sigma, np.b, np.rho, np.mu * np.sigma, np.sigma};
}

struct NDerivs {
  double n;   // N(l)
  double d1;  // N'(l)
  double d2;  // N''(l)
  double d3;  // N'''(l)
};

namespace detail {

/// N and N' together with 2 -+ N', evaluated without catastrophic
/// cancellation for large |l|: with s = sqrt(l^2+1) and r = s - |l|,
/// l < 0 gives N' = b((rho - 1) + r/s), l >= 0 gives N' = b((rho + 1) - r/s).
struct NStable {
  double s;         // sqrt(l^2 + 1)
  double n;         // N(l)
  double d1;        // N'(l)
  double two_plus;  // 2 + N'(l)
  double two_minus; // 2 - N'(l)
};

inline NStable n_stable(double alpha, double b, double rho, double l) {
  const double s = std::hypot(l, 1.0);
  const double al = std::abs(l);
  const double r = 1.0 / (s + al);
  NStable out{};
  out.s = s;
  if (l < 0.0) {
    out.n = alpha + b * (r + al * (1.0 - rho));
    out.d1 = b * ((rho - 1.0) + r / s);
    out.two_plus = (2.0 - b * (1.0 - rho)) + b * r / s;
    out.two_minus = 2.0 - out.d1;
  } else {
    out.n = alpha + b * (r + al * (1.0 + rho));
    out.d1 = b * ((rho + 1.0) - r / s);
    out.two_minus = (2.0 - b * (1.0 + rho)) + b * r / s;
    out.two_plus = 2.0 + out.d1;
  }
  return out;
}

}  // namespace detail

inline NDerivs n_funcs(double alpha, double b, double rho, double l) {
  const auto st = detail::n_stable(alpha, b, rho, l);
  const double s2 = st.s * st.s;
  return {st.n, st.d1, b / (s2 * st.s), -3.0 * b * l / (s2 * s2 * st.s)};
}

/// Durrleman function g(k); the butterfly-arbitrage-free condition is g >= 0.
inline double durrleman_g(const SviParams& p, double k) {
  const double w = svi(p, k);
  if (!(w > 0.0)) fail(ErrorCode::NonPositiveVariance, "SVI(k) <= 0 at k = " + std::to_string(k));
  const double w1 = svi_d1(p, k);
  const double w2 = svi_d2(p, k);
  const double t = 1.0 - k * w1 / (2.0 * w);
  return t * t - 0.25 * w1 * w1 * (1.0 / w + 0.25) + 0.5 * w2;
}

/// g(sigma*(l + mu)) = g1 + g2 / (2 sigma); g1 = g1_plus * g1_minus.
/// g1_plus / g1_minus carry the sign of f1' / f2' (the Fukasawa derivatives).
struct GSplit {
  double g1_plus;
  double g1_minus;
  double g1;
  double g2;
};

inline GSplit g_split(const NormalizedParams& np, double l) {
  const auto st = detail::n_stable(np.alpha, np.b, np.rho, l);
  if (!(st.n > 0.0)) fail(ErrorCode::NonPositiveVariance, "N(l) <= 0 at l = " + std::to_string(l));
  const double n2 = np.b / (st.s * st.s * st.s);
  const double c = (l + np.mu) / (2.0 * st.n);
  GSplit out{};
  out.g1_plus = 1.0 - st.d1 * (c + 0.25);
  out.g1_minus = 1.0 - st.d1 * (c - 0.25);
  out.g1 = out.g1_plus * out.g1_minus;
  out.g2 = n2 - st.d1 * st.d1 / (2.0 * st.n);
  return out;
}

/// Risk-neutral density in strike space (unit forward) at K = exp(k).
inline double density(const SviParams& p, double k) {
  const double w = svi(p, k);
  if (!(w > 0.0)) fail(ErrorCode::NonPositiveVariance, "SVI(k) <= 0 at k = " + std::to_string(k));
  const double theta = std::sqrt(w);
  const double d2 = -k / theta - 0.5 * theta;
  return durrleman_g(p, k) * std::exp(-0.5 * d2 * d2) / (std::exp(k) * std::sqrt(2.0 * std::numbers::pi * w));
}

/// Wing-slope regimes from b(1 +- rho) against the Lee bound 2.
enum class WingRegime { B1, B2, B3, B4, OverLimit };

constexpr std::string_view to_string(WingRegime r) {
  switch (r) {
    case WingRegime::B1: return "B1";
    case WingRegime::B2: return "B2";
    case WingRegime::B3: return "B3";
    case WingRegime::B4: return "B4";
    case WingRegime::OverLimit: return "over-limit";
  }
  return "?";
}

/// B1: both slopes < 2; B2: left slope b(1-rho) = 2; B3: right slope
/// b(1+rho) = 2; B4: both (b = 2, rho = 0). `tol` widens the equalities.
inline WingRegime wing_regime(double b, double rho, double tol = 0.0) {
  const double right = b * (1.0 + rho) - 2.0;
  const double left = b * (1.0 - rho) - 2.0;
  if (right > tol || left > tol) return WingRegime::OverLimit;
  const bool right_eq = std::abs(right) <= tol;
  const bool left_eq = std::abs(left) <= tol;
  if (right_eq && left_eq) return WingRegime::B4;
  if (left_eq) return WingRegime::B2;
  if (right_eq) return WingRegime::B3;
  return WingRegime::B1;
}

}  // namespace sviarb

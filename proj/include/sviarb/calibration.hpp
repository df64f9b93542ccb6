#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sviarb/black_scholes.hpp"
#include "sviarb/domain.hpp"
#include "sviarb/error.hpp"
#include "sviarb/fukasawa.hpp"
#include "sviarb/numerics.hpp"
#include "sviarb/svi.hpp"

namespace sviarb {

/// One maturity: total variances on log-forward moneyness k.
struct MarketSlice {
  double t = 0.0;  // year fraction, metadata only
  std::vector<double> k;
  std::vector<double> w_mid;
  std::optional<std::vector<double>> w_bid;
  std::optional<std::vector<double>> w_ask;

  std::size_t size() const noexcept { return k.size(); }

  void validate() const {
    if (k.size() != w_mid.size()) fail(ErrorCode::InvalidInput, "slice: k and w_mid differ in length");
    if (!std::isfinite(t) || t < 0.0) fail(ErrorCode::InvalidInput, "slice: t must be finite and >= 0");
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (!std::isfinite(k[i])) fail(ErrorCode::InvalidInput, "slice: non-finite k");
      if (i > 0 && !(k[i] > k[i - 1])) fail(ErrorCode::InvalidInput, "slice: k must be strictly increasing");
      if (!(w_mid[i] > 0.0) || !std::isfinite(w_mid[i])) fail(ErrorCode::InvalidInput, "slice: w_mid must be > 0");
    }
    for (const auto* side : {&w_bid, &w_ask}) {
      if (*side && (*side)->size() != k.size()) fail(ErrorCode::InvalidInput, "slice: bid/ask length mismatch");
    }
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (w_bid && !((*w_bid)[i] <= w_mid[i])) fail(ErrorCode::InvalidInput, "slice: w_bid > w_mid");
      if (w_ask && !(w_mid[i] <= (*w_ask)[i])) fail(ErrorCode::InvalidInput, "slice: w_mid > w_ask");
    }
  }

  friend bool operator==(const MarketSlice&, const MarketSlice&) = default;
};

struct CalibrationConfig {
  int n_starts = 8;
  double r = 0.1;          // sigma <= max(|k_0|/r, |k_N|/r, 1.5 sigma*)
  double alpha_cap = 1.0;  // alpha <= alpha_cap
  bool vega_weighted = false;
  std::uint64_t seed = 42;
  numerics::LsqOptions lsq;

  void validate() const {
    if (n_starts < 1) fail(ErrorCode::InvalidInput, "n_starts must be >= 1");
    if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorCode::InvalidInput, "r must be > 0");
    if (!(alpha_cap > 0.0) || !std::isfinite(alpha_cap)) fail(ErrorCode::InvalidInput, "alpha_cap must be > 0");
    lsq.validate();
  }
};

struct StartTrace {
  int index = 0;
  BoxCoords start;
  std::optional<BoxCoords> end;
  double cost = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  numerics::LsqStatus status = numerics::LsqStatus::MaxEvals;
  int n_evals = 0;
  std::vector<double> accepted_costs;
  std::string error;  // non-empty when the start threw
};

struct CalibrationResult {
  SviParams params;
  BoxCoords box;
  double cost = 0.0;           // 0.5 * |weighted residuals|^2
  double rel_error_fro = 0.0;  // |w_model - w_mid| / |w_mid|
  ArbitrageDiagnostic diagnostics;
  int best_start = 0;
  std::vector<StartTrace> per_start;
};

inline double sigma_upper_bound(const MarketSlice& slice, double sigma_star, double r) {
  if (slice.k.empty()) fail(ErrorCode::EmptySlice, "sigma_upper_bound needs a non-empty slice");
  if (!(r > 0.0)) fail(ErrorCode::InvalidInput, "r must be > 0");
  return std::max({std::abs(slice.k.front()) / r, std::abs(slice.k.back()) / r, 1.5 * sigma_star});
}

/// phi(d1(k_i, sqrt(w_mid_i))), fixed by the data.
inline std::vector<double> vega_weights(const MarketSlice& slice) {
  std::vector<double> out(slice.size());
  for (std::size_t i = 0; i < slice.size(); ++i) out[i] = bs::vega_total({slice.k[i], std::sqrt(slice.w_mid[i])});
  return out;
}

inline std::vector<double> model_variances(const SviParams& p, const std::vector<double>& k) {
  std::vector<double> w(k.size());
  std::transform(k.begin(), k.end(), w.begin(), [&](double x) { return svi(p, x); });
  return w;
}

/// Slice of exact model total variances (no bid/ask).
inline MarketSlice model_slice(const SviParams& p, const std::vector<double>& k, double t = 1.0) {
  return MarketSlice{t, k, model_variances(p, k), std::nullopt, std::nullopt};
}

inline double relative_frobenius_error(const SviParams& p, const MarketSlice& slice) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const double diff = svi(p, slice.k[i]) - slice.w_mid[i];
    num += diff * diff;
    den += slice.w_mid[i] * slice.w_mid[i];
  }
  return std::sqrt(num / den);
}

namespace detail {

inline Eigen::VectorXd residual_vector(const SviParams& p, const MarketSlice& slice,
                                       const std::vector<double>* weights) {
  Eigen::VectorXd r(static_cast<Eigen::Index>(slice.size()));
  for (std::size_t i = 0; i < slice.size(); ++i) {
    const double diff = svi(p, slice.k[i]) - slice.w_mid[i];
    r[static_cast<Eigen::Index>(i)] = weights ? diff * (*weights)[i] : diff;
  }
  return r;
}

inline constexpr double kBoxMargin = 1e-6;

// Solver coordinates x = (rho, b', u', q, v') live in a fixed box; u and v
// are rescaled by their moving caps alpha_cap - F(b, rho) and
// sigma_max - sigma*, so the feasible set stays an exact product.
class SolverChart {
 public:
  SolverChart(const MarketSlice& slice, const CalibrationConfig& config, fukasawa::ThresholdCache& cache)
      : slice_(slice), config_(config), cache_(cache) {}

  static Eigen::VectorXd lower() {
    Eigen::VectorXd lo(5);
    lo << -1.0 + kBoxMargin, kBoxMargin, kBoxMargin, -1.0 + kBoxMargin, 0.0;
    return lo;
  }

  static Eigen::VectorXd upper() {
    Eigen::VectorXd hi(5);
    hi << 1.0 - kBoxMargin, 1.0, 1.0, 1.0 - kBoxMargin, 1.0;
    return hi;
  }

  BoxImage image(const Eigen::VectorXd& x) const {
    const double b = 2.0 * x[1] / (1.0 + std::abs(x[0]));
    const double u = x[2] * (config_.alpha_cap - cache_.threshold(b, x[0]));
    BoxImage img = box_image_partial(x[0], x[1], u, x[3], &cache_);
    box_image_finish(img, x[4] * (sigma_upper_bound(slice_, img.sigma_star, config_.r) - img.sigma_star));
    return img;
  }

  BoxCoords box(const Eigen::VectorXd& x, const BoxImage& img) const {
    return {x[0], x[1], img.alpha - img.threshold, x[3], img.params.sigma - img.sigma_star};
  }

 private:
  const MarketSlice& slice_;
  const CalibrationConfig& config_;
  fukasawa::ThresholdCache& cache_;
};

}  // namespace detail

/// Residuals w_model(k_i) - w_mid_i at the parameters of `box`, times
/// phi(d1) when vega weighting is on.
inline Eigen::VectorXd residuals(const BoxCoords& box, const MarketSlice& slice, const CalibrationConfig& config) {
  const SviParams p = box_to_params(box);
  if (!config.vega_weighted) return detail::residual_vector(p, slice, nullptr);
  const std::vector<double> w = vega_weights(slice);
  return detail::residual_vector(p, slice, &w);
}

/// Multi-start least squares over the arbitrage-free box. Starts are
/// uniform in the solver box from a seeded generator; the lowest-cost start
/// wins, ties going to the lowest index. Starts that stop on MaxEvals still
/// compete with their best point.
inline CalibrationResult calibrate(const MarketSlice& slice, const CalibrationConfig& config = {}) {
  config.validate();
  slice.validate();
  if (slice.size() < 5) fail(ErrorCode::InsufficientData, "calibration needs at least 5 points");

  fukasawa::ThresholdCache cache;
  const detail::SolverChart chart(slice, config, cache);
  const std::vector<double> weights = config.vega_weighted ? vega_weights(slice) : std::vector<double>{};
  const std::vector<double>* wptr = config.vega_weighted ? &weights : nullptr;
  auto fun = [&](const Eigen::VectorXd& x) { return detail::residual_vector(chart.image(x).params, slice, wptr); };

  const Eigen::VectorXd lo = detail::SolverChart::lower();
  const Eigen::VectorXd hi = detail::SolverChart::upper();
  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::VectorXd> starts;
  for (int s = 0; s < config.n_starts; ++s) {
    Eigen::VectorXd x(5);
    for (Eigen::Index j = 0; j < 5; ++j) x[j] = std::uniform_real_distribution<double>(lo[j], hi[j])(rng);
    starts.push_back(x);
  }

  CalibrationResult out;
  std::optional<Eigen::VectorXd> best_x;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int s = 0; s < config.n_starts; ++s) {
    StartTrace trace;
    trace.index = s;
    try {
      trace.start = chart.box(starts[s], chart.image(starts[s]));
      const numerics::LsqResult res = numerics::least_squares_bounded(fun, starts[s], lo, hi, config.lsq);
      trace.end = chart.box(res.x, chart.image(res.x));
      trace.cost = res.cost;
      trace.converged = res.converged;
      trace.status = res.status;
      trace.n_evals = res.n_evals + res.n_jac_evals;
      trace.accepted_costs = res.accepted_costs;
      if (res.cost < best_cost) {
        best_cost = res.cost;
        best_x = res.x;
        out.best_start = s;
      }
    } catch (const Error& e) {
      trace.error = e.what();
    }
    out.per_start.push_back(std::move(trace));
  }
  if (!best_x) fail(ErrorCode::NoConvergedStart, "every calibration start failed");

  const BoxImage img = chart.image(*best_x);
  out.params = img.params;
  out.box = chart.box(*best_x, img);
  out.cost = best_cost;
  out.rel_error_fro = relative_frobenius_error(out.params, slice);
  out.diagnostics = check_no_arbitrage(out.params, &cache);
  if (!out.diagnostics.free()) {
    fail(ErrorCode::NotInDomain, "calibrated parameters failed the diagnostic: " + out.diagnostics.detail.message);
  }
  return out;
}

}  // namespace sviarb

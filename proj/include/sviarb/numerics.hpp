#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sviarb/error.hpp"

namespace sviarb::numerics {

template <typename F>
concept ScalarFunction = requires(F f, double x) {
  { f(x) } -> std::convertible_to<double>;
};

/// Interval [lo, hi] on which f changes sign.
struct Bracket {
  double lo;
  double hi;
  double f_lo;
  double f_hi;

  bool certified() const noexcept {
    return lo < hi && std::isfinite(f_lo) && std::isfinite(f_hi) &&
           ((f_lo <= 0.0 && f_hi >= 0.0) || (f_lo >= 0.0 && f_hi <= 0.0));
  }
};

template <ScalarFunction F>
Bracket make_bracket(F&& f, double lo, double hi) {
  return Bracket{lo, hi, static_cast<double>(f(lo)), static_cast<double>(f(hi))};
}

inline constexpr int kRootMaxIterations = 200;

/// Brent's method (inverse quadratic interpolation, secant, bisection
/// safeguard). `tol` is an absolute x-tolerance; 0 runs to machine precision.
template <ScalarFunction F>
double find_root(F&& f, const Bracket& bracket, double tol = 1e-12) {
  if (!bracket.certified()) {
    fail(ErrorCode::NoSignChange, "bracket [" + std::to_string(bracket.lo) + ", " +
                                      std::to_string(bracket.hi) + "] has no certified sign change");
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  double a = bracket.lo, b = bracket.hi;
  double fa = bracket.f_lo, fb = bracket.f_hi;
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  double c = a, fc = fa;
  double d = b - a, e = d;

  for (int iter = 0; iter < kRootMaxIterations; ++iter) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * eps * std::abs(b) + 0.5 * tol + std::numeric_limits<double>::denorm_min();
    const double xm = 0.5 * (c - b);
    if (std::abs(xm) <= tol1 || fb == 0.0) return b;

    if (std::abs(e) >= tol1 && std::abs(fa) > std::abs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::abs(p);
      const double min1 = 3.0 * xm * q - std::abs(tol1 * q);
      const double min2 = std::abs(e * q);
      if (2.0 * p < std::min(min1, min2)) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += (std::abs(d) > tol1) ? d : std::copysign(tol1, xm);
    fb = f(b);
    if (!std::isfinite(fb)) fail(ErrorCode::DomainError, "non-finite function value in find_root");
  }
  fail(ErrorCode::MaxIterations, "find_root did not converge in 200 iterations");
}

inline constexpr int kMaxExpansions = 100;

/// Steps geometrically away from `start` (first step `step`, then multiplied
/// by `growth`) until f changes sign. `direction` is +1 or -1.
template <ScalarFunction F>
Bracket expand_bracket(F&& f, double start, int direction, double growth = 2.0, double step = 1.0) {
  if (!(growth > 1.0) || !(step > 0.0) || (direction != 1 && direction != -1)) {
    fail(ErrorCode::InvalidInput, "expand_bracket needs growth > 1, step > 0, direction = +-1");
  }
  const double f_start = f(start);
  if (!std::isfinite(f_start)) fail(ErrorCode::DomainError, "f(start) is not finite");

  double prev = start, f_prev = f_start;
  for (int i = 0; i < kMaxExpansions; ++i) {
    const double x = start + direction * step;
    const double fx = f(x);
    if (!std::isfinite(fx)) fail(ErrorCode::DomainError, "non-finite value during bracket expansion");
    if ((f_prev <= 0.0 && fx >= 0.0) || (f_prev >= 0.0 && fx <= 0.0)) {
      return direction > 0 ? Bracket{prev, x, f_prev, fx} : Bracket{x, prev, fx, f_prev};
    }
    prev = x;
    f_prev = fx;
    step *= growth;
  }
  fail(ErrorCode::NoBracketFound, "no sign change after 100 expansions");
}

struct ScalarMax {
  double argmax;
  double max;
};

namespace detail {

template <ScalarFunction F>
double checked(F& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) fail(ErrorCode::DomainError, "non-finite objective at x = " + std::to_string(x));
  return v;
}

// Golden-section search for a maximum on [a, b], starting from the known
// interior point `best`.
template <ScalarFunction F>
ScalarMax golden_refine(F& f, double a, double b, ScalarMax best) {
  constexpr double inv_phi = 0.6180339887498949;
  const double tol = 1e-9 * (std::abs(a) + std::abs(b)) + 1e-15;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = checked(f, x1), f2 = checked(f, x2);
  for (int iter = 0; iter < 200 && (b - a) > tol; ++iter) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = checked(f, x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = checked(f, x1);
    }
  }
  if (f1 > best.max) best = {x1, f1};
  if (f2 > best.max) best = {x2, f2};
  return best;
}

}  // namespace detail

/// Maximizes f on the open interval (lo, hi): dense interior grid, then
/// golden-section refinement between the neighbours of the best grid point.
/// Never returns less than the best grid value.
template <ScalarFunction F>
ScalarMax maximize_scalar(F&& f, double lo, double hi, std::size_t n_grid = 64) {
  if (!(lo < hi) || n_grid < 3) fail(ErrorCode::InvalidInput, "maximize_scalar needs lo < hi and n_grid >= 3");
  const double h = (hi - lo) / static_cast<double>(n_grid + 1);
  std::size_t best_i = 0;
  ScalarMax best{lo + h, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double x = lo + h * static_cast<double>(i + 1);
    const double v = detail::checked(f, x);
    if (v > best.max) {
      best = {x, v};
      best_i = i;
    }
  }
  const double a = lo + h * static_cast<double>(best_i);
  const double b = lo + h * static_cast<double>(best_i + 2);
  return detail::golden_refine(f, a, b, best);
}

// --- bounded nonlinear least squares ---------------------------------------

struct LsqOptions {
  int max_evals = 1000;
  double f_tol = std::numeric_limits<double>::epsilon();
  double x_tol = std::numeric_limits<double>::epsilon();
  double g_tol = std::numeric_limits<double>::epsilon();

  void validate() const {
    if (max_evals < 1 || !(f_tol > 0.0) || !(x_tol > 0.0) || !(g_tol > 0.0)) {
      fail(ErrorCode::InvalidInput, "LsqOptions: max_evals >= 1 and positive tolerances required");
    }
  }
};

enum class LsqStatus { ZeroCost, GradientTol, CostTol, StepTol, MaxEvals };

struct LsqResult {
  Eigen::VectorXd x;
  double cost = 0.0;
  bool converged = false;
  LsqStatus status = LsqStatus::MaxEvals;
  int n_evals = 0;      // residual evaluations outside the Jacobian
  int n_jac_evals = 0;  // residual evaluations spent on finite differences
  int n_iterations = 0;
  std::vector<double> accepted_costs;  // cost after each accepted step, starting with x0
};

namespace detail {

inline bool inside(const Eigen::VectorXd& x, const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  return ((x.array() >= lower.array()) && (x.array() <= upper.array())).all();
}

template <typename Residuals>
Eigen::VectorXd eval_residuals(Residuals& fun, const Eigen::VectorXd& x) {
  Eigen::VectorXd r = fun(x);
  if (!r.allFinite()) fail(ErrorCode::DomainError, "non-finite residuals");
  return r;
}

// Forward differences, flipped to a backward step wherever the forward step
// would leave the box.
template <typename Residuals>
Eigen::MatrixXd fd_jacobian(Residuals& fun, const Eigen::VectorXd& x, const Eigen::VectorXd& r,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int& n_evals) {
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
  Eigen::MatrixXd jac(r.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double h = sqrt_eps * (1.0 + std::abs(x[j]));
    if (x[j] + h > upper[j]) {
      if (x[j] - h >= lower[j]) {
        h = -h;
      } else {
        h = (upper[j] - x[j] >= x[j] - lower[j]) ? upper[j] - x[j] : lower[j] - x[j];
      }
    }
    Eigen::VectorXd xh = x;
    xh[j] += h;
    h = xh[j] - x[j];
    if (h == 0.0) {
      jac.col(j).setZero();
      continue;
    }
    jac.col(j) = (eval_residuals(fun, xh) - r) / h;
    ++n_evals;
  }
  return jac;
}

}  // namespace detail

/// Minimizes 0.5*|r(x)|^2 subject to lower <= x <= upper.
///
/// Levenberg-Marquardt trust region with a dogbox-style active set: variables
/// sitting on a bound whose gradient points outward are frozen for the step,
/// the remaining step is projected back into the box. Every residual
/// evaluation (including finite differences) happens inside the box and the
/// accepted cost sequence is non-increasing. On MaxEvals the best point found
/// is returned with `converged = false`.
template <typename Residuals>
LsqResult least_squares_bounded(Residuals&& fun, const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                const Eigen::VectorXd& upper, const LsqOptions& opts = {}) {
  opts.validate();
  const Eigen::Index n = x0.size();
  if (lower.size() != n || upper.size() != n) fail(ErrorCode::InvalidInput, "bound dimension mismatch");
  if (!(lower.array() <= upper.array()).all()) fail(ErrorCode::InvalidInput, "lower > upper");
  if (!detail::inside(x0, lower, upper)) fail(ErrorCode::InfeasibleStart, "x0 outside bounds");

  LsqResult out;
  out.x = x0;
  Eigen::VectorXd r = detail::eval_residuals(fun, out.x);
  out.n_evals = 1;
  out.cost = 0.5 * r.squaredNorm();
  out.accepted_costs.push_back(out.cost);

  double lambda = -1.0;
  double nu = 2.0;

  while (true) {
    if (out.cost == 0.0) {
      out.status = LsqStatus::ZeroCost;
      out.converged = true;
      return out;
    }
    if (out.n_evals >= opts.max_evals) {
      out.status = LsqStatus::MaxEvals;
      out.converged = false;
      return out;
    }
    ++out.n_iterations;
    const Eigen::MatrixXd jac = detail::fd_jacobian(fun, out.x, r, lower, upper, out.n_jac_evals);
    const Eigen::VectorXd grad = jac.transpose() * r;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;

    std::vector<Eigen::Index> free;
    double g_inf = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool pinned = (out.x[i] <= lower[i] && grad[i] > 0.0) || (out.x[i] >= upper[i] && grad[i] < 0.0);
      if (!pinned) {
        free.push_back(i);
        g_inf = std::max(g_inf, std::abs(grad[i]));
      }
    }
    if (free.empty() || g_inf <= opts.g_tol) {
      out.status = LsqStatus::GradientTol;
      out.converged = true;
      return out;
    }

    const auto nf = static_cast<Eigen::Index>(free.size());
    Eigen::MatrixXd a(nf, nf);
    Eigen::VectorXd g(nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
      g[i] = grad[free[i]];
      for (Eigen::Index j = 0; j < nf; ++j) a(i, j) = jtj(free[i], free[j]);
    }
    const double diag_max = std::max(a.diagonal().maxCoeff(), std::numeric_limits<double>::min());
    if (lambda < 0.0) lambda = 1e-3 * diag_max;

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index i = 0; i < nf; ++i) {
        damped(i, i) += lambda * std::max(a(i, i), 1e-12 * diag_max);
      }
      const Eigen::VectorXd p = damped.ldlt().solve(-g);

      Eigen::VectorXd trial = out.x;
      for (Eigen::Index i = 0; i < nf; ++i) trial[free[i]] += p[i];
      trial = trial.cwiseMax(lower).cwiseMin(upper);
      const Eigen::VectorXd step = trial - out.x;

      if (step.norm() <= opts.x_tol * (opts.x_tol + out.x.norm())) {
        out.status = LsqStatus::StepTol;
        out.converged = true;
        return out;
      }

      const double predicted = -(grad.dot(step) + 0.5 * step.dot(jtj * step));
      const Eigen::VectorXd r_trial = detail::eval_residuals(fun, trial);
      ++out.n_evals;
      const double cost_trial = 0.5 * r_trial.squaredNorm();
      const double actual = out.cost - cost_trial;

      if (predicted > 0.0 && actual > 0.0 && actual / predicted > 1e-4) {
        const double ratio = actual / predicted;
        const bool small_gain = actual <= opts.f_tol * out.cost;
        out.x = trial;
        r = r_trial;
        out.cost = cost_trial;
        out.accepted_costs.push_back(out.cost);
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * ratio - 1.0, 3));
        nu = 2.0;
        accepted = true;
        if (small_gain) {
          out.status = LsqStatus::CostTol;
          out.converged = true;
          return out;
        }
      } else {
        lambda *= nu;
        nu *= 2.0;
        if (!std::isfinite(lambda) || lambda > 1e30 * diag_max) {
          // The damped model cannot produce descent anymore: numerically stationary.
          out.status = LsqStatus::StepTol;
          out.converged = true;
          return out;
        }
      }
      if (out.n_evals >= opts.max_evals) {
        out.status = LsqStatus::MaxEvals;
        out.converged = false;
        return out;
      }
    }
  }
}

}  // namespace sviarb::numerics

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "support.hpp"

using namespace sviarb;
using namespace testing_support;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double time_limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome ac1() {
  const ArbitrageDiagnostic d = check_no_arbitrage(kAxelVogt);
  const ArbitrageDetail& x = d.detail;
  const bool ok = d.status == ArbitrageStatus::Failure3 && std::abs(x.alpha + 0.09872) <= 1e-4 &&
                  std::abs(x.threshold + 0.12663) <= 1e-4 && x.interval &&
                  std::abs(x.interval->lower + 0.72407) <= 1e-4 && std::abs(x.interval->upper - 0.82939) <= 1e-4;
  return {ok, fmt("%s alpha=%.6f F=%.6f I=(%.6f, %.6f)", std::string(to_string(d.status)).c_str(), x.alpha,
                  x.threshold, x.interval ? x.interval->lower : NAN, x.interval ? x.interval->upper : NAN)};
}

Outcome ac2() {
  double worst = 0.0, min_gap = 1e300;
  for (int i = 1; i <= 19; ++i) {
    const double b = 0.1 * i;
    const double F = fukasawa::fukasawa_threshold(b, 0.0);
    worst = std::max(worst, std::abs(F - fukasawa::f_b0_closed_form(b)));
    min_gap = std::min(min_gap, F + b);
  }
  return {worst <= 1e-8 && min_gap > 0.0, fmt("max |F - closed form| = %.3g, min F(b,0)+b = %.3g", worst, min_gap)};
}

Outcome ac3() {
  CalibrationConfig cfg;
  cfg.alpha_cap = 3.0;
  double worst_fro = 0.0, worst_par = 0.0;
  bool all_free = true;
  for (const SviParams& p : kModelRows) {
    const CalibrationResult r = calibrate(model_slice(p, strike_grid()), cfg);
    worst_fro = std::max(worst_fro, r.rel_error_fro);
    worst_par = std::max(worst_par, params_rel_error(r.params, p));
    all_free = all_free && r.diagnostics.free();
  }
  return {worst_fro <= 1e-8 && worst_par <= 1e-6 && all_free,
          fmt("max Frobenius error %.3g, max parameter error %.3g", worst_fro, worst_par)};
}

Outcome ac4() {
  const MarketSlice s = model_slice(kAxelVogt, strike_grid());
  const CalibrationResult r = calibrate(s);
  const double gj = relative_frobenius_error(kGatheralJacquier, s);
  const bool ok = r.diagnostics.free() && r.rel_error_fro <= 0.03 && r.rel_error_fro < gj;
  return {ok, fmt("%s, error %.5f (fixed reference %.5f)", r.diagnostics.detail.message.c_str(), r.rel_error_fro, gj)};
}

// min over a dense core in l plus geometric wing points, in k = sigma*(mu + l)
double min_g_wide(const SviParams& p) {
  const double mu = p.m / p.sigma;
  double lo = 1e300;
  auto at = [&](double l) { lo = std::min(lo, durrleman_g(p, p.sigma * (mu + l))); };
  for (double l : linspace(-20.0, 20.0, 4001)) at(l);
  for (double e : linspace(1.0, 6.0, 501)) {
    at(std::pow(10.0, e));
    at(-std::pow(10.0, e));
  }
  return lo;
}

Outcome ac5() {
  std::mt19937_64 rng(20260101);
  int violations = 0, tight = 0, eligible = 0;
  double worst = 1e300;
  for (int i = 0; i < 1000; ++i) {
    const BoxCoords c = random_box(rng);
    const BoxImage img = box_image(c);
    const double g = min_g_on_grid(img.params);
    worst = std::min(worst, g);
    violations += g < -1e-10;
    if (img.sigma_star > 0.0) {
      ++eligible;
      const double s = 0.9 * img.sigma_star;
      tight += min_g_wide({img.alpha * s, img.b, c.rho, img.mu * s, s}) < 0.0;
    }
  }
  const double rate = eligible ? static_cast<double>(tight) / eligible : 1.0;
  return {violations == 0 && rate >= 0.99,
          fmt("%d violations (min g %.3g), tightness %d/%d = %.4f", violations, worst, tight, eligible, rate)};
}

Outcome ac6() {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double e_l = 0, e_g = 0, e_lpm = 0, e_f = 0;
  for (int i = 0; i < 500; ++i) {
    const double rho = -0.9 + 1.8 * u(rng);
    const double b = (0.05 + 1.9 * u(rng)) / (1 + std::abs(rho));
    const double alpha = fukasawa::fukasawa_threshold(b, rho) + 1e-3 + 0.8 * u(rng);
    const double ls = fukasawa::l_star(rho);
    const double l = ls - 0.01 - 20 * u(rng);
    e_l = std::max(e_l, std::abs(fukasawa::L_minus(l, alpha, b, rho) + fukasawa::L_plus(-l, alpha, b, -rho)));
    e_g = std::max(e_g, std::abs(fukasawa::g_pm(b, -rho, -l, fukasawa::Side::Plus) -
                                 fukasawa::g_pm(b, rho, l, fukasawa::Side::Minus)));
    e_lpm = std::max(e_lpm, std::abs(fukasawa::l_pm_of_alpha(alpha, b, rho, fukasawa::Side::Plus) +
                                     fukasawa::l_pm_of_alpha(alpha, b, -rho, fukasawa::Side::Minus)));
    e_f = std::max(e_f, std::abs(fukasawa::fukasawa_threshold(b, rho) - fukasawa::fukasawa_threshold(b, -rho)));
  }
  const bool ok = e_l <= 1e-10 && e_g <= 1e-10 && e_lpm <= 1e-10 && e_f <= 1e-10;
  return {ok, fmt("max errors: L %.2g, g %.2g, l+- %.2g, F %.2g", e_l, e_g, e_lpm, e_f)};
}

Outcome ac7() {
  const double F = fukasawa::fukasawa_threshold(2.0, 0.0);
  const double lower = fukasawa::mu_interval(0.0, 0.5, -1.0).lower;
  const double l1 = g2_zeros(0.0, 0.5, -1.0).l1;
  const bool ok = F == 0.0 && std::abs(lower + std::sqrt(1.5)) <= 1e-8 && std::abs(l1 + 1 / std::sqrt(3.0)) <= 1e-10;
  return {ok, fmt("F(2,0)=%g, lower=%.12f, l1=%.12f", F, lower, l1)};
}

Outcome ac8() {
  struct Case {
    SviParams p;
    double forward, discount;
  };
  const Case cases[] = {{kModelRows[0], 100.0, 0.99}, {kModelRows[2], 4500.0, 0.955}, {kReferenceRepair, 35.0, 1.0}};
  CalibrationConfig cfg;
  cfg.alpha_cap = 3.0;
  Outcome out;
  double worst_fd = 0, worst_par = 0, slowest = 0;
  for (const Case& c : cases) {
    std::vector<double> strikes;
    for (double k : linspace(-0.6, 0.8, 29)) strikes.push_back(c.forward * std::exp(k));
    const market::OptionChain chain = market::synthetic_chain(c.p, c.forward, c.discount, strikes, "2027-06-18", 0.002);
    std::stringstream file;
    market::write_chain(file, {chain});
    const market::LoadResult loaded = market::load_chain(file);
    if (loaded.chains.size() != 1 || !loaded.rejects.empty()) return {false, "synthetic chain did not load cleanly"};
    const market::ForwardDiscount fd = market::infer_forward_discount(loaded.chains[0]);
    worst_fd = std::max({worst_fd, std::abs(fd.forward / c.forward - 1), std::abs(fd.discount - c.discount)});
    const market::VolSlice vs = market::build_vol_slice(loaded.chains[0], fd, 1.0);
    const auto t0 = std::chrono::steady_clock::now();
    const CalibrationResult r = calibrate(vs.slice, cfg);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    worst_par = std::max(worst_par, params_rel_error(r.params, c.p));
    out.pass = out.pass && r.diagnostics.free();
  }
  out.pass = out.pass && worst_fd <= 1e-10 && worst_par <= 1e-6 && slowest < 120.0;
  out.detail = fmt("F/DF error %.2g, parameter error %.2g, slowest slice %.2f s", worst_fd, worst_par, slowest);
  return out;
}

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"AC1", "Axel Vogt diagnostic", 1.0, ac1},
      {"AC2", "F(b,0) against its closed form", 5.0, ac2},
      {"AC3", "model-data round trip", 120.0, ac3},
      {"AC4", "Axel Vogt repair", 60.0, ac4},
      {"AC5", "domain soundness and sigma* tightness", 300.0, ac5},
      {"AC6", "symmetries", 30.0, ac6},
      {"AC7", "boundary regimes", 10.0, ac7},
      {"AC8", "synthetic chain pipeline", 300.0, ac8},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs < c.time_limit_s;
    failures += !pass;
    std::printf("%s %s  %-40s %7.2f s (limit %g s)  %s\n", c.id, pass ? "PASS" : "FAIL", c.title, secs, c.time_limit_s,
                o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}

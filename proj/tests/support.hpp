#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "sviarb/sviarb.hpp"

namespace testing_support {

using sviarb::SviParams;

inline const SviParams kAxelVogt{-0.041, 0.1331, 0.3060, 0.3586, 0.4153};
inline const SviParams kGatheralJacquier{-0.0305199, 0.102717, 0.100718, 0.272344, 0.412398};
inline const SviParams kReferenceRepair{-0.0198444, 0.102745, 0.180754, 0.266125, 0.310459};

inline const std::array<SviParams, 6> kModelRows{{
    {0.10, 1.0, -0.306, 0.10, 0.30},
    {-0.10, 1.1, 0.200, 0.00, 0.60},
    {0.01, 0.1, -0.600, -0.05, 0.10},
    {0.80, 0.2, 0.800, 1.00, 0.90},
    {1.40, 1.9, 0.000, -0.10, 0.50},
    {0.90, 1.2, 0.500, 0.20, 0.85},
}};

/// 13 log-forward strikes -0.5, -0.4, ..., 0.7.
inline std::vector<double> strike_grid() {
  std::vector<double> k;
  for (int i = 0; i < 13; ++i) k.push_back(-0.5 + 0.1 * i);
  return k;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return out;
}

inline double params_rel_error(const SviParams& p, const SviParams& q) {
  const double d[] = {p.a - q.a, p.b - q.b, p.rho - q.rho, p.m - q.m, p.sigma - q.sigma};
  const double r[] = {q.a, q.b, q.rho, q.m, q.sigma};
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 5; ++i) {
    num += d[i] * d[i];
    den += r[i] * r[i];
  }
  return std::sqrt(num / den);
}

/// Min of g on the 2001-point grid k in [m - 20 sigma, m + 20 sigma].
inline double min_g_on_grid(const SviParams& p, int n = 2001, double half_width = 20.0) {
  double lo = 1e300;
  for (double k : linspace(p.m - half_width * p.sigma, p.m + half_width * p.sigma, n)) {
    lo = std::min(lo, sviarb::durrleman_g(p, k));
  }
  return lo;
}

/// Min of G(l) = G1 + G2/(2 sigma) over l in [-20, 20] plus the k-grid above.
inline double min_g_combined(const SviParams& p) {
  const sviarb::NormalizedParams np = sviarb::normalize(p);
  double lo = min_g_on_grid(p);
  for (double l : linspace(-20.0, 20.0, 2001)) {
    const auto gs = sviarb::g_split(np, l);
    lo = std::min(lo, gs.g1 + gs.g2 / (2.0 * p.sigma));
  }
  return lo;
}

/// Uniform box sample with the interior margins used by the calibrator.
inline sviarb::BoxCoords random_box(std::mt19937_64& rng, double u_max = 1.0, double v_max = 0.5) {
  std::uniform_real_distribution<double> rho(-0.99, 0.99), bp(0.01, 1.0), u(1e-3, u_max), q(-0.99, 0.99),
      v(0.0, v_max);
  return {rho(rng), bp(rng), u(rng), q(rng), v(rng)};
}

inline std::string temp_path(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sviarb_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

}  // namespace testing_support

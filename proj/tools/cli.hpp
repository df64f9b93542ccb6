#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sviarb/sviarb.hpp"

namespace sviarb::cli {

// Stable exit-code contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure1 = 2;
inline constexpr int kExitFailure2 = 3;
inline constexpr int kExitFailure3 = 4;
inline constexpr int kExitFailure4 = 5;
inline constexpr int kExitInput = 64;
inline constexpr int kExitNumeric = 70;

inline int exit_code(ArbitrageStatus s) {
  switch (s) {
    case ArbitrageStatus::Free: return kExitOk;
    case ArbitrageStatus::Failure1: return kExitFailure1;
    case ArbitrageStatus::Failure2: return kExitFailure2;
    case ArbitrageStatus::Failure3: return kExitFailure3;
    case ArbitrageStatus::Failure4: return kExitFailure4;
  }
  return kExitNumeric;
}

inline int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidInput:
    case ErrorCode::DomainError:
    case ErrorCode::PriceOutOfRange:
    case ErrorCode::DegenerateSigma:
    case ErrorCode::FukasawaViolated:
    case ErrorCode::NotInDomain:
    case ErrorCode::InsufficientData:
    case ErrorCode::InsufficientPairs:
    case ErrorCode::NonPositiveDiscount:
    case ErrorCode::EmptySlice:
    case ErrorCode::ParseError:
      return kExitInput;
    default:
      return kExitNumeric;
  }
}

namespace detail {

inline constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

struct ParamFlags {
  std::string file;
  double a = kUnset, b = kUnset, rho = kUnset, m = kUnset, sigma = kUnset;

  void attach(CLI::App* cmd) {
    cmd->add_option("--params", file, "JSON file with keys a, b, rho, m, sigma");
    cmd->add_option("--a", a, "override a");
    cmd->add_option("--b", b, "override b");
    cmd->add_option("--rho", rho, "override rho");
    cmd->add_option("--m", m, "override m");
    cmd->add_option("--sigma", sigma, "override sigma");
  }

  // File values first, inline flags on top; unset fields stay NaN.
  SviParams merged() const {
    SviParams p{kUnset, kUnset, kUnset, kUnset, kUnset};
    if (!file.empty()) p = io::params_from_json(io::read_json_file(file));
    for (auto [dst, src] : {std::pair{&p.a, a}, {&p.b, b}, {&p.rho, rho}, {&p.m, m}, {&p.sigma, sigma}}) {
      if (!std::isnan(src)) *dst = src;
    }
    return p;
  }

  static SviParams complete(const SviParams& p) {
    for (double x : {p.a, p.b, p.rho, p.m, p.sigma}) {
      if (std::isnan(x)) fail(ErrorCode::InvalidInput, "parameters incomplete: give --params or all of --a --b --rho --m --sigma");
    }
    return p;
  }

  SviParams resolve() const { return complete(merged()); }
};

inline std::string num(double x, int digits = 8) {
  std::ostringstream s;
  s << std::setprecision(digits) << x;
  return s.str();
}

inline void print_diagnostic(std::ostream& out, const ArbitrageDiagnostic& d) {
  const ArbitrageDetail& x = d.detail;
  out << x.message << '\n';
  if (!std::isnan(x.alpha)) out << "  alpha = " << num(x.alpha) << "  mu = " << num(x.mu) << '\n';
  out << "  regime = " << to_string(x.regime) << '\n';
  if (!std::isnan(x.threshold)) out << "  F(b,rho) = " << num(x.threshold) << '\n';
  if (x.interval) out << "  I = (" << num(x.interval->lower) << ", " << num(x.interval->upper) << ")\n";
  if (x.sigma_star) out << "  sigma* = " << num(*x.sigma_star) << '\n';
}

// Columns of one plot-data series; x runs over the requested grid.
struct Series {
  std::vector<std::string> header;
  std::function<std::vector<double>(double)> row;
};

inline double or_nan(const std::function<double()>& f) {
  try {
    return f();
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline Series make_series(const std::string& which, const SviParams& p) {
  const NormalizedParams np = p.sigma > 0.0 ? normalize(p) : NormalizedParams{p.a, p.b, p.rho, p.m, 0.0};
  if (which == "smile") return {{"k", "w"}, [p](double k) { return std::vector{svi(p, k)}; }};
  if (which == "g") {
    return {{"k", "g"}, [p](double k) { return std::vector{or_nan([&] { return durrleman_g(p, k); })}; }};
  }
  if (which == "g2") {
    return {{"l", "g2"}, [np](double l) { return std::vector{or_nan([&] { return g_split(np, l).g2; })}; }};
  }
  if (which == "gpm") {
    return {{"l", "g_minus", "g_plus"}, [np](double l) {
              return std::vector{or_nan([&] { return fukasawa::g_pm(np.b, np.rho, l, fukasawa::Side::Minus); }),
                                 or_nan([&] { return fukasawa::g_pm(np.b, np.rho, l, fukasawa::Side::Plus); })};
            }};
  }
  if (which == "L") {
    return {{"l", "L_minus", "L_plus"}, [np](double l) {
              return std::vector{or_nan([&] { return fukasawa::L_minus(l, np.alpha, np.b, np.rho); }),
                                 or_nan([&] { return fukasawa::L_plus(l, np.alpha, np.b, np.rho); })};
            }};
  }
  if (which == "f-profile") {
    return {{"h", "f"}, [np](double h) {
              return std::vector{h == 0.0 ? 0.0 : or_nan([&] { return sigma_objective(np, 1.0 / h); })};
            }};
  }
  fail(ErrorCode::InvalidInput, "unknown series '" + which + "'");
}

}  // namespace detail

/// Runs one CLI invocation; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Arbitrage-free SVI toolkit: diagnostics, thresholds, calibration, ingestion"};
  app.require_subcommand(1, 1);
  int code = kExitOk;

  // check
  auto* check = app.add_subcommand("check", "Run the no-arbitrage waterfall on SVI parameters");
  detail::ParamFlags check_params;
  check_params.attach(check);
  std::string check_out;
  check->add_option("--out", check_out, "write the diagnostic as JSON");
  check->callback([&] {
    const ArbitrageDiagnostic d = check_no_arbitrage(check_params.resolve());
    detail::print_diagnostic(out, d);
    if (!check_out.empty()) io::write_json_file(check_out, io::to_json(d));
    code = exit_code(d.status);
  });

  // threshold
  auto* threshold = app.add_subcommand("threshold", "Fukasawa threshold F(b, rho)");
  double th_b = 0.0, th_rho = 0.0;
  threshold->add_option("--b", th_b, "b")->required();
  threshold->add_option("--rho", th_rho, "rho")->required();
  threshold->callback([&] {
    out << "F(b,rho) = " << detail::num(fukasawa::fukasawa_threshold(th_b, th_rho), 12) << '\n';
  });

  // interval
  auto* interval = app.add_subcommand("interval", "Admissible interval I for mu");
  double in_alpha = 0.0, in_b = 0.0, in_rho = 0.0;
  interval->add_option("--alpha", in_alpha, "alpha")->required();
  interval->add_option("--b", in_b, "b")->required();
  interval->add_option("--rho", in_rho, "rho")->required();
  interval->callback([&] {
    const auto I = fukasawa::mu_interval(in_alpha, in_b, in_rho);
    out << "I = (" << detail::num(I.lower, 12) << ", " << detail::num(I.upper, 12) << ")";
    out << (I.empty() ? "  empty" : "") << "  regime " << to_string(I.regime) << '\n';
  });

  // sigma-star
  auto* sstar = app.add_subcommand("sigma-star", "Minimal sigma for no butterfly arbitrage");
  double ss_alpha = 0.0, ss_b = 0.0, ss_rho = 0.0, ss_mu = 0.0;
  sstar->add_option("--alpha", ss_alpha, "alpha")->required();
  sstar->add_option("--b", ss_b, "b")->required();
  sstar->add_option("--rho", ss_rho, "rho")->required();
  sstar->add_option("--mu", ss_mu, "mu")->required();
  sstar->callback([&] { out << "sigma* = " << detail::num(sigma_star(ss_alpha, ss_b, ss_rho, ss_mu), 12) << '\n'; });

  // calibrate
  auto* calib = app.add_subcommand("calibrate", "Fit arbitrage-free SVI to a slice");
  std::string cal_slice, cal_config, cal_out;
  int cal_starts = 0;
  std::uint64_t cal_seed = 0;
  double cal_r = 0.0, cal_cap = 0.0;
  bool cal_vega = false;
  calib->add_option("--slice", cal_slice, "slice JSON (k, w_mid, optional w_bid/w_ask, t)")->required();
  calib->add_option("--config", cal_config, "config JSON");
  auto* o_seed = calib->add_option("--seed", cal_seed, "RNG seed for the starts");
  auto* o_starts = calib->add_option("--starts", cal_starts, "number of starts");
  auto* o_r = calib->add_option("--r", cal_r, "sigma bound parameter r");
  auto* o_cap = calib->add_option("--alpha-cap", cal_cap, "upper bound on alpha");
  auto* o_vega = calib->add_flag("--vega-weighted", cal_vega, "weight residuals by Black-Scholes vega");
  calib->add_option("--out", cal_out, "write the full result as JSON");
  calib->callback([&] {
    const MarketSlice slice = io::slice_from_json(io::read_json_file(cal_slice));
    CalibrationConfig cfg = cal_config.empty() ? CalibrationConfig{} : io::config_from_json(io::read_json_file(cal_config));
    if (o_seed->count()) cfg.seed = cal_seed;
    if (o_starts->count()) cfg.n_starts = cal_starts;
    if (o_r->count()) cfg.r = cal_r;
    if (o_cap->count()) cfg.alpha_cap = cal_cap;
    if (o_vega->count()) cfg.vega_weighted = cal_vega;
    const auto t0 = std::chrono::steady_clock::now();
    const CalibrationResult res = calibrate(slice, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const SviParams& p = res.params;
    out << "params: a=" << detail::num(p.a, 10) << " b=" << detail::num(p.b, 10) << " rho=" << detail::num(p.rho, 10)
        << " m=" << detail::num(p.m, 10) << " sigma=" << detail::num(p.sigma, 10) << '\n';
    out << "cost: " << detail::num(res.cost, 6) << "  rel_error_fro: " << detail::num(res.rel_error_fro, 6) << '\n';
    out << "diagnostic: " << res.diagnostics.detail.message << "  best start: " << res.best_start << " of "
        << res.per_start.size() << '\n';
    out << "wall time: " << detail::num(secs, 4) << " s\n";
    if (!cal_out.empty()) io::write_json_file(cal_out, io::to_json(res));
  });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Build implied total variance slices from an option chain file");
  std::string ing_chain, ing_date, ing_dir = ".";
  double ing_t = 0.0;
  ingest->add_option("--chain", ing_chain, "delimited file: expiry,strike,kind,bid,ask[,spot]")->required();
  auto* o_date = ingest->add_option("--valuation-date", ing_date, "YYYY-MM-DD; t = days / 365.25");
  auto* o_t = ingest->add_option("--t", ing_t, "year fraction applied to every expiry");
  o_date->excludes(o_t);
  ingest->add_option("--out-dir", ing_dir, "directory for slice_<expiry>.json files");
  ingest->callback([&] {
    if (!o_date->count() && !o_t->count()) fail(ErrorCode::InvalidInput, "give --valuation-date or --t");
    const market::LoadResult loaded = market::load_chain_file(ing_chain);
    for (const auto& r : loaded.rejects) out << "rejected line " << r.line << ": " << r.reason << '\n';
    std::filesystem::create_directories(ing_dir);
    // One bad expiry does not stop the others; it is reported and sets the exit code.
    for (const auto& chain : loaded.chains) {
      try {
        const double t = o_t->count() ? ing_t : market::year_fraction(ing_date, chain.expiry);
        const market::ForwardDiscount fd = market::infer_forward_discount(chain);
        const market::VolSlice vs = market::build_vol_slice(chain, fd, t);
        const std::string path = (std::filesystem::path(ing_dir) / ("slice_" + chain.expiry + ".json")).string();
        io::write_json_file(path, io::to_json(vs));
        out << chain.expiry << ": t=" << detail::num(t, 6) << " forward=" << detail::num(fd.forward, 10)
            << " discount=" << detail::num(fd.discount, 10) << " rmse=" << detail::num(fd.residual_rmse, 3)
            << " points=" << vs.slice.size() << " skipped=" << vs.skipped.size() << " -> " << path << '\n';
      } catch (const Error& e) {
        err << "expiry " << chain.expiry << " not ingested: " << e.what() << '\n';
        code = std::max(code, exit_code(e.code()));
      }
    }
  });

  // plot-data
  auto* plot = app.add_subcommand("plot-data", "Emit curve data (smile, g, g2, gpm, L, f-profile)");
  detail::ParamFlags plot_params;
  plot_params.attach(plot);
  std::string which, plot_out;
  double alpha = detail::kUnset, mu = detail::kUnset, from = -1.0, to = 1.0;
  int grid = 201;
  plot->add_option("--which", which, "series")
      ->required()
      ->check(CLI::IsMember({"smile", "g", "g2", "gpm", "L", "f-profile"}));
  plot->add_option("--alpha", alpha, "normalized alpha (sets a = alpha*sigma; sigma defaults to 1)");
  plot->add_option("--mu", mu, "normalized mu (sets m = mu*sigma)");
  plot->add_option("--grid", grid, "number of points")->check(CLI::PositiveNumber);
  plot->add_option("--from", from, "first abscissa");
  plot->add_option("--to", to, "last abscissa");
  plot->add_option("--out", plot_out, "output CSV file")->required();
  plot->callback([&] {
    SviParams p = plot_params.merged();
    if (std::isnan(p.sigma)) p.sigma = 1.0;
    if (!std::isnan(alpha)) p.a = alpha * p.sigma;
    if (!std::isnan(mu)) p.m = mu * p.sigma;
    p = detail::ParamFlags::complete(p);
    p.validate_ranges();
    const detail::Series series = detail::make_series(which, p);
    std::ofstream file(plot_out);
    if (!file) fail(ErrorCode::InvalidInput, "cannot write '" + plot_out + "'");
    file << std::setprecision(17);
    for (std::size_t i = 0; i < series.header.size(); ++i) file << (i ? "," : "") << series.header[i];
    file << '\n';
    for (int i = 0; i < grid; ++i) {
      const double x = grid == 1 ? from : from + (to - from) * i / (grid - 1);
      file << x;
      for (double y : series.row(x)) file << ',' << y;
      file << '\n';
    }
    out << "wrote " << grid << " rows of " << which << " to " << plot_out << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  }
  return code;
}

inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"sviarb"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sviarb::cli

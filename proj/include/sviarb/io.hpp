#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sviarb/calibration.hpp"
#include "sviarb/domain.hpp"
#include "sviarb/error.hpp"
#include "sviarb/market_data.hpp"
#include "sviarb/numerics.hpp"
#include "sviarb/svi.hpp"

// JSON documents for parameters, slices, configs and calibration results.
// NaN is written as null and infinities as "inf" / "-inf".
namespace sviarb::io {

using nlohmann::json;

namespace detail {

inline json num(double x) {
  if (std::isfinite(x)) return x;
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return nullptr;
}

inline double get_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    fail(ErrorCode::ParseError, "expected a number, got '" + s + "'");
  }
  if (!j.is_number()) fail(ErrorCode::ParseError, "expected a number");
  return j.get<double>();
}

inline double field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorCode::ParseError, std::string("missing field '") + key + "'");
  return get_num(j.at(key));
}

inline std::vector<double> vec(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    fail(ErrorCode::ParseError, std::string("missing array '") + key + "'");
  }
  std::vector<double> out;
  for (const auto& x : j.at(key)) out.push_back(get_num(x));
  return out;
}

inline json vec_json(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

}  // namespace detail

// --- parameters --------------------------------------------------------------

inline json to_json(const SviParams& p) {
  return {{"a", p.a}, {"b", p.b}, {"rho", p.rho}, {"m", p.m}, {"sigma", p.sigma}};
}

inline SviParams params_from_json(const json& j) {
  return {detail::field(j, "a"), detail::field(j, "b"), detail::field(j, "rho"), detail::field(j, "m"),
          detail::field(j, "sigma")};
}

inline json to_json(const BoxCoords& c) {
  return {{"rho", c.rho}, {"b_prime", c.b_prime}, {"u", c.u}, {"q", c.q}, {"v", c.v}};
}

inline BoxCoords box_from_json(const json& j) {
  return {detail::field(j, "rho"), detail::field(j, "b_prime"), detail::field(j, "u"), detail::field(j, "q"),
          detail::field(j, "v")};
}

// --- slices --------------------------------------------------------------------

inline json to_json(const MarketSlice& s) {
  json j = {{"t", s.t}, {"k", detail::vec_json(s.k)}, {"w_mid", detail::vec_json(s.w_mid)}};
  if (s.w_bid) j["w_bid"] = detail::vec_json(*s.w_bid);
  if (s.w_ask) j["w_ask"] = detail::vec_json(*s.w_ask);
  return j;
}

inline MarketSlice slice_from_json(const json& j) {
  MarketSlice s;
  s.t = j.contains("t") ? detail::get_num(j.at("t")) : 0.0;
  s.k = detail::vec(j, "k");
  s.w_mid = detail::vec(j, "w_mid");
  if (j.contains("w_bid")) s.w_bid = detail::vec(j, "w_bid");
  if (j.contains("w_ask")) s.w_ask = detail::vec(j, "w_ask");
  s.validate();
  return s;
}

inline json to_json(const market::VolSlice& v) {
  json j = to_json(v.slice);
  j["forward"] = v.forward;
  j["discount"] = v.discount;
  json skipped = json::array();
  for (const auto& s : v.skipped) skipped.push_back({{"strike", s.strike}, {"reason", s.reason}});
  j["skipped"] = skipped;
  return j;
}

inline market::VolSlice vol_slice_from_json(const json& j) {
  market::VolSlice v;
  v.slice = slice_from_json(j);
  v.forward = detail::field(j, "forward");
  v.discount = detail::field(j, "discount");
  if (j.contains("skipped")) {
    for (const auto& s : j.at("skipped")) v.skipped.push_back({detail::field(s, "strike"), s.at("reason").get<std::string>()});
  }
  return v;
}

// --- config ----------------------------------------------------------------------

inline json to_json(const CalibrationConfig& c) {
  return {{"n_starts", c.n_starts},
          {"r", c.r},
          {"alpha_cap", c.alpha_cap},
          {"vega_weighted", c.vega_weighted},
          {"seed", c.seed},
          {"lsq", {{"max_evals", c.lsq.max_evals}, {"f_tol", c.lsq.f_tol}, {"x_tol", c.lsq.x_tol}, {"g_tol", c.lsq.g_tol}}}};
}

/// Missing keys keep their defaults.
inline CalibrationConfig config_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::ParseError, "config must be an object");
  CalibrationConfig c;
  try {
    if (j.contains("n_starts")) c.n_starts = j.at("n_starts").get<int>();
    if (j.contains("r")) c.r = detail::get_num(j.at("r"));
    if (j.contains("alpha_cap")) c.alpha_cap = detail::get_num(j.at("alpha_cap"));
    if (j.contains("vega_weighted")) c.vega_weighted = j.at("vega_weighted").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lsq")) {
      const json& l = j.at("lsq");
      if (l.contains("max_evals")) c.lsq.max_evals = l.at("max_evals").get<int>();
      if (l.contains("f_tol")) c.lsq.f_tol = detail::get_num(l.at("f_tol"));
      if (l.contains("x_tol")) c.lsq.x_tol = detail::get_num(l.at("x_tol"));
      if (l.contains("g_tol")) c.lsq.g_tol = detail::get_num(l.at("g_tol"));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

// --- diagnostics and results -----------------------------------------------------

inline const char* to_string(numerics::LsqStatus s) {
  switch (s) {
    case numerics::LsqStatus::ZeroCost: return "zero_cost";
    case numerics::LsqStatus::GradientTol: return "gradient_tol";
    case numerics::LsqStatus::CostTol: return "cost_tol";
    case numerics::LsqStatus::StepTol: return "step_tol";
    case numerics::LsqStatus::MaxEvals: return "max_evals";
  }
  return "?";
}

inline numerics::LsqStatus lsq_status_from_string(const std::string& s) {
  for (auto st : {numerics::LsqStatus::ZeroCost, numerics::LsqStatus::GradientTol, numerics::LsqStatus::CostTol,
                  numerics::LsqStatus::StepTol, numerics::LsqStatus::MaxEvals}) {
    if (s == to_string(st)) return st;
  }
  fail(ErrorCode::ParseError, "unknown solver status '" + s + "'");
}

inline ArbitrageStatus status_from_string(const std::string& s) {
  for (auto st : {ArbitrageStatus::Free, ArbitrageStatus::Failure1, ArbitrageStatus::Failure2,
                  ArbitrageStatus::Failure3, ArbitrageStatus::Failure4}) {
    if (s == sviarb::to_string(st)) return st;
  }
  fail(ErrorCode::ParseError, "unknown status '" + s + "'");
}

inline WingRegime regime_from_string(const std::string& s) {
  for (auto r : {WingRegime::B1, WingRegime::B2, WingRegime::B3, WingRegime::B4, WingRegime::OverLimit}) {
    if (s == sviarb::to_string(r)) return r;
  }
  fail(ErrorCode::ParseError, "unknown regime '" + s + "'");
}

inline json to_json(const ArbitrageDiagnostic& d) {
  const ArbitrageDetail& x = d.detail;
  json j = {{"status", std::string(sviarb::to_string(d.status))},
            {"regime", std::string(sviarb::to_string(x.regime))},
            {"alpha", detail::num(x.alpha)},
            {"mu", detail::num(x.mu)},
            {"threshold", detail::num(x.threshold)},
            {"offending", detail::num(x.offending)},
            {"message", x.message}};
  j["interval"] = x.interval ? json{{"lower", detail::num(x.interval->lower)}, {"upper", detail::num(x.interval->upper)}}
                             : json(nullptr);
  j["g2_zeros"] = x.zeros ? json{{"l1", detail::num(x.zeros->l1)}, {"l2", detail::num(x.zeros->l2)}} : json(nullptr);
  j["sigma_star"] = x.sigma_star ? detail::num(*x.sigma_star) : json(nullptr);
  return j;
}

inline ArbitrageDiagnostic diagnostic_from_json(const json& j) {
  ArbitrageDiagnostic d;
  d.status = status_from_string(j.at("status").get<std::string>());
  ArbitrageDetail& x = d.detail;
  x.regime = regime_from_string(j.at("regime").get<std::string>());
  x.alpha = detail::field(j, "alpha");
  x.mu = detail::field(j, "mu");
  x.threshold = detail::field(j, "threshold");
  x.offending = detail::field(j, "offending");
  x.message = j.at("message").get<std::string>();
  if (!j.at("interval").is_null()) {
    x.interval = fukasawa::MuInterval{detail::field(j.at("interval"), "lower"), detail::field(j.at("interval"), "upper"),
                                      x.regime};
  }
  if (!j.at("g2_zeros").is_null()) {
    x.zeros = G2Zeros{detail::field(j.at("g2_zeros"), "l1"), detail::field(j.at("g2_zeros"), "l2")};
  }
  if (!j.at("sigma_star").is_null()) x.sigma_star = detail::get_num(j.at("sigma_star"));
  return d;
}

inline json to_json(const CalibrationResult& r) {
  json starts = json::array();
  for (const auto& s : r.per_start) {
    json t = {{"index", s.index},
              {"start", to_json(s.start)},
              {"end", s.end ? to_json(*s.end) : json(nullptr)},
              {"cost", detail::num(s.cost)},
              {"converged", s.converged},
              {"status", to_string(s.status)},
              {"n_evals", s.n_evals},
              {"accepted_costs", detail::vec_json(s.accepted_costs)},
              {"error", s.error}};
    starts.push_back(t);
  }
  return {{"params", to_json(r.params)},
          {"box", to_json(r.box)},
          {"cost", r.cost},
          {"rel_error_fro", r.rel_error_fro},
          {"diagnostics", to_json(r.diagnostics)},
          {"best_start", r.best_start},
          {"per_start", starts}};
}

inline CalibrationResult result_from_json(const json& j) {
  CalibrationResult r;
  r.params = params_from_json(j.at("params"));
  r.box = box_from_json(j.at("box"));
  r.cost = detail::field(j, "cost");
  r.rel_error_fro = detail::field(j, "rel_error_fro");
  r.diagnostics = diagnostic_from_json(j.at("diagnostics"));
  r.best_start = j.at("best_start").get<int>();
  for (const auto& t : j.at("per_start")) {
    StartTrace s;
    s.index = t.at("index").get<int>();
    s.start = box_from_json(t.at("start"));
    if (!t.at("end").is_null()) s.end = box_from_json(t.at("end"));
    s.cost = detail::field(t, "cost");
    s.converged = t.at("converged").get<bool>();
    s.status = lsq_status_from_string(t.at("status").get<std::string>());
    s.n_evals = t.at("n_evals").get<int>();
    s.accepted_costs = detail::vec(t, "accepted_costs");
    s.error = t.at("error").get<std::string>();
    r.per_start.push_back(std::move(s));
  }
  return r;
}

// --- files -------------------------------------------------------------------------

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::ParseError, "'" + path + "': " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::InvalidInput, "cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace sviarb::io

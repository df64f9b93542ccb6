#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sviarb/black_scholes.hpp"
#include "sviarb/calibration.hpp"
#include "sviarb/error.hpp"
#include "sviarb/svi.hpp"

// Option chains in delimited text: a header row naming at least expiry,
// strike, kind, bid, ask (any order, optional spot column), one quote per row.
namespace sviarb::market {

struct OptionQuote {
  std::string expiry;  // YYYY-MM-DD
  double strike = 0.0;
  bs::OptionKind kind = bs::OptionKind::Call;
  double bid = 0.0;
  double ask = 0.0;

  double mid() const noexcept { return 0.5 * (bid + ask); }
};

struct ForwardDiscount {
  double forward = 0.0;
  double discount = 0.0;
  double residual_rmse = 0.0;
  std::size_t n_pairs = 0;
};

struct OptionChain {
  std::string expiry;
  std::optional<double> spot;
  std::vector<OptionQuote> quotes;  // sorted by strike, calls before puts
};

struct RejectedRow {
  std::size_t line = 0;  // 1-based, header is line 1
  std::string reason;
  std::string raw;
};

struct LoadResult {
  std::vector<OptionChain> chains;  // ordered by expiry
  std::vector<RejectedRow> rejects;
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  try {
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::optional<bs::OptionKind> parse_kind(const std::string& s) {
  const std::string k = lower(s);
  if (k == "c" || k == "call") return bs::OptionKind::Call;
  if (k == "p" || k == "put") return bs::OptionKind::Put;
  return std::nullopt;
}

}  // namespace detail

/// Days since the civil epoch for a YYYY-MM-DD string; ParseError otherwise.
inline std::chrono::sys_days parse_date(const std::string& s) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (std::sscanf(s.c_str(), "%d-%u-%u%c", &y, &m, &d, &tail) != 3) {
    fail(ErrorCode::ParseError, "bad date '" + s + "', expected YYYY-MM-DD");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) fail(ErrorCode::ParseError, "invalid calendar date '" + s + "'");
  return std::chrono::sys_days{ymd};
}

/// (expiry - valuation) in days over 365.25.
inline double year_fraction(const std::string& valuation, const std::string& expiry) {
  return static_cast<double>((parse_date(expiry) - parse_date(valuation)).count()) / 365.25;
}

/// Parses a chain file. Header problems throw ParseError; bad rows are
/// reported in `rejects` with their line number.
inline LoadResult load_chain(std::istream& in, char delim = ',') {
  LoadResult out;
  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, delim);
    for (std::size_t i = 0; i < fields.size(); ++i) col[detail::lower(fields[i])] = i;
    break;
  }
  if (col.empty()) return out;
  for (const char* name : {"expiry", "strike", "kind", "bid", "ask"}) {
    if (!col.count(name)) {
      fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": header lacks column '" + name + "'");
    }
  }
  const std::optional<std::size_t> spot_col = col.count("spot") ? std::optional(col["spot"]) : std::nullopt;
  const std::size_t width = col.size();

  std::map<std::string, OptionChain> by_expiry;
  std::map<std::pair<std::string, std::pair<double, int>>, bool> seen;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string trimmed = detail::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    auto reject = [&](std::string why) { out.rejects.push_back({line_no, std::move(why), line}); };
    const auto f = detail::split(line, delim);
    if (f.size() != width) {
      reject("expected " + std::to_string(width) + " fields, got " + std::to_string(f.size()));
      continue;
    }
    OptionQuote q;
    q.expiry = f[col["expiry"]];
    try {
      parse_date(q.expiry);
    } catch (const Error& e) {
      reject("column expiry: " + std::string(e.what()));
      continue;
    }
    const auto strike = detail::parse_double(f[col["strike"]]);
    const auto kind = detail::parse_kind(f[col["kind"]]);
    const auto bid = detail::parse_double(f[col["bid"]]);
    const auto ask = detail::parse_double(f[col["ask"]]);
    if (!strike || !std::isfinite(*strike) || *strike <= 0.0) {
      reject("column strike: expected a positive number");
      continue;
    }
    if (!kind) {
      reject("column kind: expected call/put");
      continue;
    }
    if (!bid || !ask || !std::isfinite(*bid) || !std::isfinite(*ask)) {
      reject("column bid/ask: expected numbers");
      continue;
    }
    if (*bid < 0.0) {
      reject("column bid: negative bid");
      continue;
    }
    if (*ask < *bid) {
      reject("column ask: ask < bid");
      continue;
    }
    q.strike = *strike;
    q.kind = *kind;
    q.bid = *bid;
    q.ask = *ask;
    std::optional<double> spot;
    if (spot_col && !f[*spot_col].empty()) {
      spot = detail::parse_double(f[*spot_col]);
      if (!spot || !(*spot > 0.0)) {
        reject("column spot: expected a positive number");
        continue;
      }
    }
    const auto key = std::make_pair(q.expiry, std::make_pair(q.strike, static_cast<int>(q.kind)));
    if (seen.count(key)) {
      reject("duplicate quote for this expiry, strike and kind");
      continue;
    }
    seen[key] = true;
    OptionChain& chain = by_expiry[q.expiry];
    chain.expiry = q.expiry;
    if (spot && !chain.spot) chain.spot = spot;
    chain.quotes.push_back(q);
  }
  for (auto& [expiry, chain] : by_expiry) {
    std::stable_sort(chain.quotes.begin(), chain.quotes.end(), [](const OptionQuote& a, const OptionQuote& b) {
      return a.strike < b.strike || (a.strike == b.strike && a.kind == bs::OptionKind::Call && b.kind != a.kind);
    });
    out.chains.push_back(std::move(chain));
  }
  return out;
}

inline LoadResult load_chain_file(const std::string& path, char delim = ',') {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ParseError, "cannot open '" + path + "'");
  return load_chain(in, delim);
}

/// Writes chains in the format read by load_chain.
inline void write_chain(std::ostream& out, const std::vector<OptionChain>& chains) {
  out << "expiry,strike,kind,bid,ask,spot\n" << std::setprecision(17);
  for (const auto& c : chains) {
    for (const auto& q : c.quotes) {
      out << q.expiry << ',' << q.strike << ',' << (q.kind == bs::OptionKind::Call ? "call" : "put") << ','
          << q.bid << ',' << q.ask << ',';
      if (c.spot) out << *c.spot;
      out << '\n';
    }
  }
}

/// OLS of mid(C) - mid(P) on K over strikes quoting both sides:
/// C - P = DF*F - DF*K.
inline ForwardDiscount infer_forward_discount(const OptionChain& chain) {
  std::map<double, std::pair<std::optional<double>, std::optional<double>>> legs;
  for (const auto& q : chain.quotes) {
    auto& slot = legs[q.strike];
    (q.kind == bs::OptionKind::Call ? slot.first : slot.second) = q.mid();
  }
  std::vector<double> x, y;
  for (const auto& [strike, pair] : legs) {
    if (pair.first && pair.second) {
      x.push_back(strike);
      y.push_back(*pair.first - *pair.second);
    }
  }
  if (x.size() < 2) fail(ErrorCode::InsufficientPairs, "need at least 2 strikes with both call and put quotes");
  const double n = static_cast<double>(x.size());
  const double x_bar = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double y_bar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - x_bar) * (x[i] - x_bar);
    sxy += (x[i] - x_bar) * (y[i] - y_bar);
  }
  const double slope = sxy / sxx;
  const double intercept = y_bar - slope * x_bar;
  ForwardDiscount fd;
  fd.discount = -slope;
  if (!(fd.discount > 0.0)) fail(ErrorCode::NonPositiveDiscount, "regression implies a non-positive discount factor");
  fd.forward = intercept / fd.discount;
  if (!(fd.forward > 0.0)) fail(ErrorCode::NonPositiveDiscount, "regression implies a non-positive forward");
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (intercept + slope * x[i]);
    ss += e * e;
  }
  fd.residual_rmse = std::sqrt(ss / n);
  fd.n_pairs = x.size();
  return fd;
}

struct SkippedQuote {
  double strike = 0.0;
  std::string reason;
};

struct VolSlice {
  MarketSlice slice;
  double forward = 0.0;
  double discount = 0.0;
  std::vector<SkippedQuote> skipped;
};

/// Inverts the out-of-the-money quote at every strike (the other side when
/// only one is quoted) for bid, mid and ask total variances. Prices are
/// divided by DF*F first, so the inversion runs at unit forward.
inline VolSlice build_vol_slice(const OptionChain& chain, const ForwardDiscount& fd, double t) {
  if (!(fd.forward > 0.0) || !(fd.discount > 0.0)) fail(ErrorCode::InvalidInput, "forward and discount must be > 0");
  if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorCode::InvalidInput, "t must be > 0");
  std::map<double, std::pair<const OptionQuote*, const OptionQuote*>> legs;
  for (const auto& q : chain.quotes) {
    auto& slot = legs[q.strike];
    (q.kind == bs::OptionKind::Call ? slot.first : slot.second) = &q;
  }
  VolSlice out;
  out.forward = fd.forward;
  out.discount = fd.discount;
  out.slice.t = t;
  std::vector<double> bid, ask;
  const double scale = fd.discount * fd.forward;
  for (const auto& [strike, pair] : legs) {
    const OptionQuote* q = strike >= fd.forward ? pair.first : pair.second;
    if (!q) q = pair.first ? pair.first : pair.second;
    const double k = std::log(strike / fd.forward);
    try {
      const double th_bid = bs::implied_total_vol(k, q->bid / scale, q->kind);
      const double th_mid = bs::implied_total_vol(k, q->mid() / scale, q->kind);
      const double th_ask = bs::implied_total_vol(k, q->ask / scale, q->kind);
      out.slice.k.push_back(k);
      out.slice.w_mid.push_back(th_mid * th_mid);
      bid.push_back(th_bid * th_bid);
      ask.push_back(th_ask * th_ask);
    } catch (const Error& e) {
      out.skipped.push_back({strike, std::string(q->kind == bs::OptionKind::Call ? "call" : "put") +
                                         " quote not invertible: " + e.what()});
    }
  }
  if (out.slice.k.empty()) fail(ErrorCode::EmptySlice, "no quote could be inverted");
  out.slice.w_bid = std::move(bid);
  out.slice.w_ask = std::move(ask);
  out.slice.validate();
  return out;
}

/// Call and put quotes at each strike from an SVI smile, forward and
/// discount; bid/ask = mid * (1 -+ rel_half_spread).
inline OptionChain synthetic_chain(const SviParams& p, double forward, double discount,
                                   const std::vector<double>& strikes, const std::string& expiry,
                                   double rel_half_spread = 0.0) {
  OptionChain chain;
  chain.expiry = expiry;
  for (double strike : strikes) {
    const double k = std::log(strike / forward);
    const double theta = std::sqrt(svi(p, k));
    for (auto kind : {bs::OptionKind::Call, bs::OptionKind::Put}) {
      const double mid = discount * forward * bs::price({k, theta}, kind);
      chain.quotes.push_back({expiry, strike, kind, mid * (1.0 - rel_half_spread), mid * (1.0 + rel_half_spread)});
    }
  }
  return chain;
}

}  // namespace sviarb::market

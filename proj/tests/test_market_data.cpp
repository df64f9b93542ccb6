#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace sviarb;
using namespace sviarb::market;
using namespace testing_support;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return ErrorCode::InvalidInput;
}

std::vector<double> strikes(double lo, double hi, double step) {
  std::vector<double> out;
  for (double s = lo; s <= hi + 1e-9; s += step) out.push_back(s);
  return out;
}

const std::string kFixture = std::string(SVIARB_FIXTURES) + "/chain_small.csv";

}  // namespace

TEST(ForwardDiscount, RecoversParityExactly) {
  const OptionChain chain = synthetic_chain(kModelRows[0], 100.0, 0.99, strikes(60, 160, 5), "2027-01-15");
  const ForwardDiscount fd = infer_forward_discount(chain);
  EXPECT_NEAR(fd.forward, 100.0, 1e-12 * 100);
  EXPECT_NEAR(fd.discount, 0.99, 1e-12);
  EXPECT_LT(fd.residual_rmse, 1e-12);
  EXPECT_EQ(fd.n_pairs, 21u);
}

TEST(ForwardDiscount, NoisyQuotes) {
  OptionChain chain = synthetic_chain(kModelRows[0], 100.0, 0.99, strikes(60, 160, 5), "2027-01-15");
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  for (auto& q : chain.quotes) {
    const double e = noise(rng);
    q.bid += e;
    q.ask += e;
  }
  const ForwardDiscount fd = infer_forward_discount(chain);
  EXPECT_NEAR(fd.forward, 100.0, 0.1);
  EXPECT_NEAR(fd.discount, 0.99, 1e-3);
  // C - P carries two independent U(-0.01, 0.01) errors: sd 0.01 * sqrt(2/3)
  EXPECT_GT(fd.residual_rmse, 0.004);
  EXPECT_LT(fd.residual_rmse, 0.012);
}

TEST(ForwardDiscount, Errors) {
  OptionChain one = synthetic_chain(kModelRows[0], 100.0, 0.99, {100.0}, "2027-01-15");
  EXPECT_EQ(code_of([&] { infer_forward_discount(one); }), ErrorCode::InsufficientPairs);
  OptionChain calls_only = synthetic_chain(kModelRows[0], 100.0, 0.99, {90.0, 100.0, 110.0}, "2027-01-15");
  std::erase_if(calls_only.quotes, [](const OptionQuote& q) { return q.kind == bs::OptionKind::Put; });
  EXPECT_EQ(code_of([&] { infer_forward_discount(calls_only); }), ErrorCode::InsufficientPairs);
  // C - P increasing in K: implied discount is negative
  OptionChain bad;
  bad.expiry = "2027-01-15";
  bad.quotes = {{"2027-01-15", 90, bs::OptionKind::Call, 1, 1}, {"2027-01-15", 90, bs::OptionKind::Put, 1, 1},
                {"2027-01-15", 110, bs::OptionKind::Call, 3, 3}, {"2027-01-15", 110, bs::OptionKind::Put, 1, 1}};
  EXPECT_EQ(code_of([&] { infer_forward_discount(bad); }), ErrorCode::NonPositiveDiscount);
}

TEST(VolSlice, FlatSmileInvertsToConstantVariance) {
  const SviParams flat{0.04, 0.0, 0.0, 0.0, 0.1};
  const OptionChain chain = synthetic_chain(flat, 100.0, 0.97, strikes(70, 140, 10), "2027-01-15", 0.01);
  const VolSlice v = build_vol_slice(chain, {100.0, 0.97, 0.0, 8}, 1.0);
  ASSERT_EQ(v.slice.size(), 8u);
  for (std::size_t i = 0; i < v.slice.size(); ++i) {
    EXPECT_NEAR(v.slice.w_mid[i], 0.04, 1e-10);
    EXPECT_LE((*v.slice.w_bid)[i], v.slice.w_mid[i]);
    EXPECT_GE((*v.slice.w_ask)[i], v.slice.w_mid[i]);
  }
  EXPECT_TRUE(v.skipped.empty());
}

TEST(VolSlice, ZeroBidIsSkipped) {
  OptionChain chain = synthetic_chain(kModelRows[0], 100.0, 0.99, strikes(80, 120, 10), "2027-01-15", 0.01);
  for (auto& q : chain.quotes) {
    if (q.strike == 120.0) q.bid = 0.0;
  }
  const VolSlice v = build_vol_slice(chain, {100.0, 0.99, 0.0, 5}, 1.0);
  EXPECT_EQ(v.slice.size(), 4u);
  ASSERT_EQ(v.skipped.size(), 1u);
  EXPECT_EQ(v.skipped[0].strike, 120.0);
}

TEST(VolSlice, OneSidedStrikesUseTheAvailableQuote) {
  OptionChain chain = synthetic_chain(kModelRows[0], 100.0, 0.99, strikes(80, 120, 10), "2027-01-15");
  std::erase_if(chain.quotes, [](const OptionQuote& q) { return q.strike == 80.0 && q.kind == bs::OptionKind::Put; });
  const VolSlice v = build_vol_slice(chain, {100.0, 0.99, 0.0, 4}, 1.0);
  ASSERT_EQ(v.slice.size(), 5u);
  EXPECT_NEAR(v.slice.w_mid[0], svi(kModelRows[0], std::log(0.8)), 1e-9);
}

TEST(VolSlice, Errors) {
  OptionChain chain = synthetic_chain(kModelRows[0], 100.0, 0.99, {100.0}, "2027-01-15");
  for (auto& q : chain.quotes) q.bid = q.ask = 0.0;
  EXPECT_EQ(code_of([&] { build_vol_slice(chain, {100.0, 0.99, 0.0, 1}, 1.0); }), ErrorCode::EmptySlice);
  EXPECT_EQ(code_of([&] { build_vol_slice(chain, {100.0, 0.99, 0.0, 1}, 0.0); }), ErrorCode::InvalidInput);
  EXPECT_EQ(code_of([&] { build_vol_slice(chain, {-1.0, 0.99, 0.0, 1}, 1.0); }), ErrorCode::InvalidInput);
}

TEST(LoadChain, Fixture) {
  const LoadResult r = load_chain_file(kFixture);
  ASSERT_EQ(r.chains.size(), 2u);
  EXPECT_EQ(r.chains[0].expiry, "2027-01-15");
  EXPECT_EQ(r.chains[0].quotes.size(), 42u);
  EXPECT_EQ(r.chains[1].quotes.size(), 1u);
  ASSERT_TRUE(r.chains[0].spot);
  EXPECT_EQ(*r.chains[0].spot, 99.0);
  EXPECT_FALSE(r.chains[1].spot);
  ASSERT_EQ(r.rejects.size(), 2u);
  EXPECT_EQ(r.rejects[0].line, 6u);
  EXPECT_NE(r.rejects[0].reason.find("ask < bid"), std::string::npos);
  EXPECT_EQ(r.rejects[1].line, 10u);
  EXPECT_NE(r.rejects[1].reason.find("strike"), std::string::npos);
  for (std::size_t i = 1; i < r.chains[0].quotes.size(); ++i) {
    EXPECT_LE(r.chains[0].quotes[i - 1].strike, r.chains[0].quotes[i].strike);
  }
}

TEST(LoadChain, HeaderVariants) {
  std::istringstream empty("");
  EXPECT_TRUE(load_chain(empty).chains.empty());
  std::istringstream reordered("Ask;Bid;KIND;Strike;Expiry\n2.0;1.5;C;100;2027-01-15\n");
  const LoadResult r = load_chain(reordered, ';');
  ASSERT_EQ(r.chains.size(), 1u);
  EXPECT_EQ(r.chains[0].quotes[0].ask, 2.0);
  EXPECT_EQ(r.chains[0].quotes[0].kind, bs::OptionKind::Call);
  std::istringstream missing("expiry,strike,kind,bid\n");
  EXPECT_EQ(code_of([&] { load_chain(missing); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { load_chain_file("/nonexistent/chain.csv"); }), ErrorCode::ParseError);
}

TEST(LoadChain, RowRejections) {
  std::istringstream in(
      "expiry,strike,kind,bid,ask\n"
      "2027-01-15,100,call,1,2\n"
      "2027-01-15,100,call,1,2\n"
      "2027-02-30,100,call,1,2\n"
      "2027-01-15,100,fwd,1,2\n"
      "2027-01-15,100,put,-1,2\n"
      "2027-01-15,100,put,1\n");
  const LoadResult r = load_chain(in);
  EXPECT_EQ(r.chains.size(), 1u);
  ASSERT_EQ(r.rejects.size(), 5u);
  EXPECT_NE(r.rejects[0].reason.find("duplicate"), std::string::npos);
  EXPECT_NE(r.rejects[1].reason.find("expiry"), std::string::npos);
  EXPECT_NE(r.rejects[2].reason.find("kind"), std::string::npos);
  EXPECT_NE(r.rejects[3].reason.find("negative"), std::string::npos);
  EXPECT_NE(r.rejects[4].reason.find("fields"), std::string::npos);
}

TEST(LoadChain, WriteRoundTrip) {
  const LoadResult r = load_chain_file(kFixture);
  std::stringstream buf;
  write_chain(buf, r.chains);
  const LoadResult back = load_chain(buf);
  EXPECT_TRUE(back.rejects.empty());
  ASSERT_EQ(back.chains.size(), r.chains.size());
  for (std::size_t c = 0; c < r.chains.size(); ++c) {
    EXPECT_EQ(back.chains[c].spot, r.chains[c].spot);
    ASSERT_EQ(back.chains[c].quotes.size(), r.chains[c].quotes.size());
    for (std::size_t i = 0; i < r.chains[c].quotes.size(); ++i) {
      EXPECT_EQ(back.chains[c].quotes[i].strike, r.chains[c].quotes[i].strike);
      EXPECT_EQ(back.chains[c].quotes[i].bid, r.chains[c].quotes[i].bid);
      EXPECT_EQ(back.chains[c].quotes[i].ask, r.chains[c].quotes[i].ask);
      EXPECT_EQ(back.chains[c].quotes[i].kind, r.chains[c].quotes[i].kind);
    }
  }
}

TEST(Dates, YearFraction) {
  EXPECT_DOUBLE_EQ(year_fraction("2026-01-15", "2027-01-15"), 365.0 / 365.25);
  EXPECT_DOUBLE_EQ(year_fraction("2024-01-01", "2025-01-01"), 366.0 / 365.25);
  EXPECT_EQ(code_of([] { parse_date("2026-13-01"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { parse_date("15/01/2026"); }), ErrorCode::ParseError);
}

TEST(Pipeline, FixtureToCalibratedSlice) {
  const LoadResult r = load_chain_file(kFixture);
  const ForwardDiscount fd = infer_forward_discount(r.chains[0]);
  EXPECT_NEAR(fd.forward, 100.0, 1e-8);
  EXPECT_NEAR(fd.discount, 0.99, 1e-10);
  const VolSlice v = build_vol_slice(r.chains[0], fd, 1.0);
  EXPECT_EQ(v.slice.size(), 21u);
  CalibrationConfig cfg;
  cfg.alpha_cap = 3.0;
  const CalibrationResult res = calibrate(v.slice, cfg);
  EXPECT_TRUE(res.diagnostics.free());
  EXPECT_LE(params_rel_error(res.params, kModelRows[0]), 1e-6);
}

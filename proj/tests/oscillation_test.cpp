#include <oscillax/oscillation.hpp>

#include "support/property.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace oscillax;
using std::numbers::pi;

const OscillationSpec& default_spec() {
  static const OscillationSpec spec = build_oscillation(OscillationParams{});
  return spec;
}

const PairSpec& default_pair() {
  static const PairSpec pair = build_pair(PairParams{});
  return pair;
}

double closed_tail(int m) { return 1.0 / (2.0 * std::pow(2.0 * m * pi, 2)); }

TEST(BuildOscillation, MidBandD) {
  const auto& spec = default_spec();
  EXPECT_NEAR(spec.d.front(), 3.0 / pi, 1e-15);
  EXPECT_GE(pi / 2 * spec.d.front(), 1.0);
  EXPECT_LE(pi / 2 * spec.d.front(), 2.0);
}

TEST(BuildOscillation, LowerEdgeCMatchesClosedForm) {
  const auto& spec = default_spec();
  EXPECT_NEAR(spec.lambda, 1.0 / (8 * pi * pi), 1e-14);
  for (int m = 1; m <= 25; ++m) {
    double expected = 3.0 / pi + 6.0 * (2.0 / pi) * closed_tail(m);
    EXPECT_NEAR(spec.c[static_cast<std::size_t>(m - 1)], expected, 1e-13) << "m = " << m;
  }
}

TEST(BuildOscillation, SupBound) {
  const auto& spec = default_spec();
  double lambda = 1.0 / (8 * pi * pi);
  EXPECT_NEAR(spec.sup_bound, ((2 + 7 * lambda) * 2 + 1) / pi, 1e-12);
  EXPECT_NEAR(spec.sup_bound, 1.64799, 1e-5);
  double sampled = 0.0;
  for (double s = 2 * pi; s < 200 * pi; s += pi / 97) sampled = std::max(sampled, std::abs(spec.q(s)));
  EXPECT_LE(sampled, spec.sup_bound);
}

TEST(BuildOscillation, ZeroDampingBandWidth) {
  OscillationParams params;
  params.p = CoefficientExpr::parse("0");
  params.p_tail = TailModel::power(3.0, 0.0);
  params.extent = 100.0;
  auto spec = build_oscillation(params);
  EXPECT_EQ(spec.lambda, 0.0);
  // with I_m = 0 and eta = 0 the band is [d_1, d_1 + 1/pi] at m = 1
  EXPECT_NEAR(spec.c.front(), spec.d.front(), 1e-15);
  EXPECT_NEAR(params.theta * std::ldexp(1.0, 0) / pi, 1.0 / pi, 1e-15);
}

TEST(BuildOscillation, LobeIdentities) {
  const auto& spec = default_spec();
  auto abs_q = [&](double s) { return std::abs(spec.q(s)); };
  for (int m = 1; m <= 25; ++m) {
    auto k = static_cast<std::size_t>(2 * m);
    double pos = integrate_finite(spec.q_function(), spec.nodes[k], spec.nodes[k + 1], 1e-14).value;
    double neg = integrate_finite(abs_q, spec.nodes[k + 1], spec.nodes[k + 2], 1e-14).value;
    double c = spec.c[static_cast<std::size_t>(m - 1)];
    double d = spec.d[static_cast<std::size_t>(m - 1)];
    EXPECT_LE(std::abs(pos - pi / 2 * c) / (pi / 2 * c), 1e-9);
    EXPECT_LE(std::abs(neg - pi / 2 * d) / (pi / 2 * d), 1e-9);
  }
}

TEST(BuildOscillation, SmoothAcrossNodes) {
  const auto& spec = default_spec();
  for (int k = 3; k < 60; ++k) {
    double a = k * pi;
    EXPECT_NEAR(spec.q(a), 0.0, 1e-12);
    double h = 1e-5;
    double left = (spec.q(a) - spec.q(a - h)) / h;
    double right = (spec.q(a + h) - spec.q(a)) / h;
    EXPECT_NEAR(left, right, 1e-4);
  }
}

TEST(BuildOscillation, ConstraintErrorsNameTheRow) {
  auto expect_row = [](OscillationParams p, const std::string& row) {
    try {
      (void)build_oscillation(p);
      FAIL() << "expected a constraint error";
    } catch (const ConstraintError& e) {
      EXPECT_NE(std::string(e.what()).find(row), std::string::npos) << e.what();
    }
  };
  OscillationParams p;
  p.q_minus = 3.0;
  expect_row(p, "0 < q_minus < q_plus");
  p = {};
  p.gamma = 5.0;
  expect_row(p, "6 <= gamma < sigma");
  p = {};
  p.sigma = 6.0;
  expect_row(p, "6 <= gamma < sigma");
  p = {};
  p.eta = 1.0;
  expect_row(p, "0 <= eta < theta");
  p = {};
  p.p = CoefficientExpr::parse("200/s^3");
  p.p_tail = TailModel::power(3.0, 200.0);
  expect_row(p, "lambda");
}

TEST(BuildOscillation, TableCoversExtent) {
  const auto& spec = default_spec();
  EXPECT_GE(spec.q.domain().hi, 1.05e4);
  EXPECT_EQ(spec.q.domain().lo, 2 * pi);
  EXPECT_THROW((void)spec.q(spec.q.domain().hi + 1.0), DomainError);
}

TEST(BuildPair, AmplitudeOrderingAndChain) {
  const auto& pair = default_pair();
  for (int m = 1; m <= 25; ++m) {
    auto i = static_cast<std::size_t>(m - 1);
    EXPECT_GE(pair.q2.c[i], pair.q1.c[i]);
    EXPECT_GE(pair.q1.c[i], pair.q1.d[i]);
    EXPECT_GE(pair.q1.d[i], pair.q2.d[i]);
    EXPECT_GT(pair.q2.d[i], 0.0);
    for (const auto& link : pair.chain) EXPECT_GE(link[i], 0.0);
    EXPECT_GE(pair.d_chain_margin[i], 0.0);
  }
}

TEST(BuildPair, ClosedFormAmplitudes) {
  const auto& pair = default_pair();
  for (int m = 1; m <= 25; ++m) {
    auto i = static_cast<std::size_t>(m - 1);
    double KI = 2.0 / pi * closed_tail(m);
    double J = std::ldexp(1.0, 1 - m) / pi;
    EXPECT_NEAR(pair.q2.d[i], 2.0 / pi, 1e-15);
    EXPECT_NEAR(pair.q1.d[i], 2.0 / pi + 0.5 * KI + 0.5 * J, 1e-13);
    EXPECT_NEAR(pair.q2.c[i], 2.0 / pi + 8.0 * KI + 2.0 * J, 1e-13);
  }
}

TEST(BuildPair, Smallness) {
  const auto& pair = default_pair();
  double lambda = 1.0 / (8 * pi * pi);
  EXPECT_NEAR(pair.smallness, 1.0 + 0.25 * 2.0 * lambda + 0.25, 1e-14);
  EXPECT_NEAR(pair.smallness, 1.2563, 1e-4);
}

TEST(BuildPair, RejectsBadGaps) {
  PairParams p;
  p.alpha_gap = 1.0;  // gamma2 - sigma1 = 1
  EXPECT_THROW((void)build_pair(p), ConstraintError);
  p = {};
  p.beta_gap = 0.0;
  EXPECT_THROW((void)build_pair(p), ConstraintError);
  p = {};
  p.gamma2 = 7.0;
  EXPECT_THROW((void)build_pair(p), ConstraintError);
  p = {};
  p.q_plus = 1.2;
  p.beta_gap = 0.9;
  p.eta2 = 2.0;
  EXPECT_THROW((void)build_pair(p), ConstraintError);
}

TEST(BuildPair, DegenerateCollapse) {
  PairParams p;
  p.p = CoefficientExpr::parse("0");
  p.p_tail = TailModel::power(3.0, 0.0);
  p.beta_gap = 1e-12;
  p.extent = 200.0;
  auto pair = build_pair(p);
  for (std::size_t i = 0; i < pair.q1.d.size(); ++i) EXPECT_NEAR(pair.q1.d[i], pair.q2.d[i], 1e-12);
}

TEST(BuildPair, MonotoneInAlphaGap) {
  double previous = -1.0;
  for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    PairParams p;
    p.alpha_gap = alpha;
    p.extent = 200.0;
    auto pair = build_pair(p);
    double gap = 1e300;
    for (std::size_t i = 0; i < pair.q1.d.size(); ++i) gap = std::min(gap, pair.q1.d[i] - pair.q2.d[i]);
    EXPECT_GE(gap, previous);
    previous = gap;
  }
}

TEST(VerifyPair, DefaultPairIsOrdered) {
  const auto& pair = default_pair();
  std::vector<double> grid;
  for (int i = 0; i <= 25 * 200; ++i) grid.push_back(2 * pi + i * pi / 100);
  auto r = verify_pair(pair.q1, pair.q2, grid);
  EXPECT_TRUE(r.pass);
  EXPECT_GE(r.min_slack, 0.0);
  EXPECT_LE(r.sign_logic_gap, 1e-14);

  auto same = verify_pair(pair.q1, pair.q1, grid);
  EXPECT_TRUE(same.pass);
  EXPECT_EQ(same.min_slack, 0.0);

  auto swapped = verify_pair(pair.q2, pair.q1, grid);
  EXPECT_FALSE(swapped.pass);
  ASSERT_TRUE(swapped.first_violation.has_value());
  EXPECT_NEAR(*swapped.first_violation, 2 * pi + pi / 100, 1e-12);
}

TEST(IntegralFeatures, DivergenceEvidence) {
  auto r = check_integral_features(default_spec(), 1.0, 50);
  double harmonic = 0.0;
  for (int k = 2; k <= 51; ++k) harmonic += 1.0 / k;
  double brute = 3.0 / (8 * pi) * harmonic;
  EXPECT_NEAR(r.lower_bounds.back(), brute, 1e-12);
  EXPECT_NEAR(brute, 0.4200, 1e-4);
  EXPECT_GE(r.lower_bounds.back(), 0.376);
  EXPECT_GE(r.dominance_margin, 0.0);
  EXPECT_GT(r.log_slope, 0.0);
  EXPECT_TRUE(r.divergence_ok);
}

TEST(IntegralFeatures, WeightedConvergence) {
  const auto& spec = default_spec();
  auto r = check_integral_features(spec, 1.0, 50);
  EXPECT_NEAR(r.tail_bounds.front(), spec.sup_bound / (102 * pi), 1e-15);
  EXPECT_NEAR(r.tail_bounds.front(), 0.00514, 5e-5);
  EXPECT_GE(r.weighted.size(), 5U);
  EXPECT_TRUE(r.convergence_ok);
}

TEST(SpecJson, CarriesAmplitudes) {
  auto j = to_json(default_spec());
  EXPECT_EQ(j["c"].size(), 25U);
  EXPECT_EQ(j["d"].size(), 25U);
  EXPECT_DOUBLE_EQ(j["params"]["gamma"].get<double>(), 6.0);
}

}  // namespace

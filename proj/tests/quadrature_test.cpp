#include <oscillax/quadrature.hpp>

#include "support/property.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace oscillax;
using std::numbers::pi;

double inv_cube(double s) { return 1.0 / (s * s * s); }

TEST(IntegrateFinite, SinSquaredLobe) {
  auto r = integrate_finite([](double s) { return std::sin(s) * std::sin(s); }, 2 * pi, 3 * pi);
  EXPECT_NEAR(r.value, pi / 2, 1e-12);
  EXPECT_EQ(r.tail_bound, 0.0);
  EXPECT_GE(r.abs_error_estimate, 0.0);
  EXPECT_GT(r.evaluations, 0U);
}

TEST(IntegrateFinite, ZeroIntegrand) {
  auto r = integrate_finite([](double) { return 0.0; }, 0.0, 1.0);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.abs_error_estimate, 0.0);
}

TEST(IntegrateFinite, InverseCubeClosedForm) {
  auto r = integrate_finite(inv_cube, 10.0, 100.0);
  EXPECT_NEAR(r.value, 0.00495, 1e-12);
}

TEST(IntegrateFinite, DegenerateAndInvalidIntervals) {
  EXPECT_EQ(integrate_finite(inv_cube, 3.0, 3.0).value, 0.0);
  EXPECT_THROW((void)integrate_finite(inv_cube, 3.0, 2.0), std::invalid_argument);
  EXPECT_THROW((void)integrate_finite(inv_cube, 1.0, 2.0, 0.0), std::invalid_argument);
}

TEST(IntegrateFinite, PolynomialsUpToDegreeThirteenAreExactInOneCell) {
  auto r = integrate_finite([](double x) { return std::pow(x, 13) + 3 * std::pow(x, 6); }, 0.0, 1.0);
  EXPECT_NEAR(r.value, 1.0 / 14 + 3.0 / 7, 1e-15);
  EXPECT_EQ(r.evaluations, 15U);
}

TEST(IntegrateFinite, NonFiniteSampleIsAnError) {
  EXPECT_THROW((void)integrate_finite([](double s) { return 1.0 / s; }, -1.0, 1.0), QuadratureError);
}

TEST(IntegrateFinite, SubdivisionLimit) {
  auto nasty = [](double s) { return std::sin(1.0 / s); };
  EXPECT_THROW((void)integrate_finite(nasty, 1e-9, 1.0, 1e-14, {}, 10), QuadratureError);
}

TEST(IntegrateFinite, BreakpointsSeedThePartition) {
  auto kink = [](double s) { return std::abs(s - 1.0); };
  std::vector<double> bp{1.0};
  auto seeded = integrate_finite(kink, 0.0, 3.0, 1e-13, bp);
  EXPECT_NEAR(seeded.value, 2.5, 1e-14);
  EXPECT_EQ(seeded.evaluations, 30U);
  auto blind = integrate_finite(kink, 0.0, 3.0, 1e-13);
  EXPECT_NEAR(blind.value, 2.5, 1e-12);
  EXPECT_GT(blind.evaluations, seeded.evaluations);
}

TEST(IntegrateTail, InverseCubeFromTen) {
  auto model = TailModel::power(3.0, 1.0);
  auto r = integrate_tail(inv_cube, 10.0, model);
  EXPECT_NEAR(r.value, 0.005, kTailTol);
  EXPECT_LE(r.tail_bound, 0.5 * kTailTol * (1 + 1e-12));
  EXPECT_LE(std::abs(r.value - 0.005), kTailTol + r.tail_bound);
  // value excludes the tail, so it undershoots a positive integrand
  EXPECT_LT(r.value, 0.005);
}

TEST(IntegrateTail, LambdaOfDefaultWeight) {
  // 1 / (2 (2 pi)^2): antiderivative -1/(2 s^2)
  const double lambda = 1.0 / (8 * pi * pi);
  auto r = integrate_tail(inv_cube, 2 * pi, TailModel::power(3.0, 1.0));
  EXPECT_NEAR(r.value, 0.012665147955292222, 1e-8);
  EXPECT_NEAR(r.value + r.tail_bound, lambda, 1e-8);
  EXPECT_LE(r.value, lambda);
}

TEST(IntegrateTail, ZeroIntegrand) {
  auto r = integrate_tail([](double) { return 0.0; }, 2 * pi, TailModel::exponential(1.0, 1.0));
  EXPECT_EQ(r.value, 0.0);
}

TEST(IntegrateTail, ExponentialAndUserModels) {
  auto e = [](double s) { return std::exp(-2 * s); };
  auto r = integrate_tail(e, 1.0, TailModel::exponential(2.0, 1.0), 1e-12);
  EXPECT_NEAR(r.value, std::exp(-2.0) / 2, 1e-12);
  auto user = TailModel::user([](double c) { return 1.0 / c; }, [](double s) { return 1.0 / (s * s); });
  auto u = integrate_tail([](double s) { return 1.0 / (s * s); }, 1.0, user, 1e-6);
  EXPECT_NEAR(u.value, 1.0, 1e-6);
  EXPECT_LE(u.tail_bound, 0.5e-6);
}

TEST(IntegrateTail, InconsistentModelRejected) {
  auto slow = [](double s) { return 1.0 / (s * s); };
  EXPECT_THROW((void)integrate_tail(slow, 10.0, TailModel::power(3.0, 1.0)), QuadratureError);
}

TEST(IntegrateTail, FirstMomentModel) {
  // int_{2 pi}^inf (s - 2 pi) s^-3 ds = 1/(4 pi)
  const double s0 = 2 * pi;
  auto moment = TailModel::power(3.0, 1.0).first_moment();
  EXPECT_DOUBLE_EQ(moment.exponent, 2.0);
  auto r = integrate_tail([s0](double s) { return (s - s0) / (s * s * s); }, s0, moment, 1e-9);
  EXPECT_NEAR(r.value, 1.0 / (4 * pi), 1e-9 + r.tail_bound);
}

TEST(Cumulative, Examples) {
  std::vector<double> g{0, 1, 2};
  auto zero = cumulative_integral([](double) { return 0.0; }, std::span<const double>(g));
  EXPECT_EQ(zero.values, (std::vector<double>{0, 0, 0}));
  auto one = cumulative_integral([](double) { return 1.0; }, std::span<const double>(g));
  EXPECT_NEAR(one.values[1], 1.0, 1e-15);
  EXPECT_NEAR(one.values[2], 2.0, 1e-15);

  auto grid = uniform_grid(2 * pi, 4 * pi, 50);
  auto cube = cumulative_integral(inv_cube, std::span<const double>(grid));
  const double closed = 1.0 / (8 * pi * pi) - 1.0 / (32 * pi * pi);
  EXPECT_NEAR(cube.values.back(), closed, 1e-14);
  EXPECT_NEAR(cube.values.back(), 0.009498860966469166, 1e-15);
  auto whole = integrate_finite(inv_cube, 2 * pi, 4 * pi, 1e-14);
  EXPECT_NEAR(cube.values.back(), whole.value, 1e-14);
  EXPECT_EQ(cube.values.front(), 0.0);
}

TEST(Cumulative, MonotoneForNonnegativeIntegrand) {
  auto grid = uniform_grid(0.0, 20.0, 400);
  auto c = cumulative_integral([](double s) { return std::sin(s) * std::sin(s); }, std::span<const double>(grid));
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_GE(c.values[i], c.values[i - 1]);
}

TEST(Cumulative, RejectsNonIncreasingGrid) {
  std::vector<double> g{1, 2, 2};
  EXPECT_THROW((void)cumulative_integral(inv_cube, std::span<const double>(g)), GridError);
}

// Closed-form set for the tolerance and linearity properties.
struct Case {
  double (*f)(double);
  double lo, hi, exact;
};

double sq_sin(double s) { return std::sin(s) * std::sin(s); }
double gaussian(double s) { return std::exp(-s * s); }
double osc(double s) { return std::cos(7 * s) * s; }

const Case kCases[] = {
    {inv_cube, 10.0, 100.0, 0.00495},
    {sq_sin, 2 * pi, 3 * pi, pi / 2},
    {gaussian, 0.0, 3.0, 0.5 * std::sqrt(pi) * std::erf(3.0)},
    {osc, 0.0, 2.0, (2 * std::sin(14.0)) / 7 + (std::cos(14.0) - 1) / 49},
};

TEST(QuadratureProperty, ErrorWithinEstimateOrTolerance) {
  for (const auto& c : kCases) {
    for (double tol : {1e-6, 1e-9, 1e-12}) {
      auto r = integrate_finite(c.f, c.lo, c.hi, tol);
      EXPECT_LE(std::abs(r.value - c.exact), std::max(r.abs_error_estimate, tol)) << tol;
    }
  }
}

TEST(QuadratureProperty, HalvingToleranceNeverIncreasesError) {
  for (const auto& c : kCases) {
    double prev = INFINITY;
    for (double tol = 1e-4; tol > 1e-13; tol *= 0.5) {
      double err = std::abs(integrate_finite(c.f, c.lo, c.hi, tol).value - c.exact);
      EXPECT_LE(err, std::max(prev, 1e-15)) << "tol " << tol;
      prev = err;
    }
  }
}

TEST(QuadratureProperty, LinearityAndAdditivity) {
  proptest::Sampler rng(11);
  for (int i = 0; i < 50; ++i) {
    double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    double lo = rng.uniform(0.5, 2.0), mid = lo + rng.uniform(0.1, 3.0), hi = mid + rng.uniform(0.1, 3.0);
    auto f = [](double s) { return std::sin(3 * s) / s; };
    auto g = [](double s) { return std::exp(-s) * s; };
    auto combined = integrate_finite([&](double s) { return a * f(s) + b * g(s); }, lo, hi);
    auto rf = integrate_finite(f, lo, hi);
    auto rg = integrate_finite(g, lo, hi);
    double slack = combined.abs_error_estimate + std::abs(a) * rf.abs_error_estimate +
                   std::abs(b) * rg.abs_error_estimate + 3 * kFiniteTol;
    EXPECT_NEAR(combined.value, a * rf.value + b * rg.value, slack);

    auto left = integrate_finite(f, lo, mid);
    auto right = integrate_finite(f, mid, hi);
    EXPECT_NEAR(rf.value, left.value + right.value,
                rf.abs_error_estimate + left.abs_error_estimate + right.abs_error_estimate + 3 * kFiniteTol);

    auto pos = integrate_finite([](double s) { return std::sin(s) * std::sin(s) * s; }, lo, hi);
    EXPECT_GE(pos.value, -pos.abs_error_estimate);
  }
}

}  // namespace

#include <oscillax/kernel.hpp>

#include "support/property.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

namespace {

using namespace oscillax;
using std::numbers::pi;

Function inv_cube() {
  return Function([](double s) { return 1.0 / (s * s * s); });
}

// sin^2 lobes on [m pi, (m+1) pi), alternately scaled by `up` and -`down`.
Function lobes(double up, double down, double end = 2000.0) {
  std::vector<double> nodes;
  for (int m = 0; m * pi <= end; ++m) nodes.push_back(m * pi);
  return Function(
      [up, down](double s) {
        double sn = std::sin(s);
        auto m = static_cast<long>(std::floor(s / pi));
        return (m % 2 == 0 ? up : -down) * sn * sn;
      },
      nodes, Domain{0.0, end});
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

TEST(ComputeZ, ZeroForcing) {
  auto grid = uniform_grid(2 * pi, 6 * pi, 40);
  auto z = compute_z(inv_cube(), Function::constant(0.0), grid);
  for (double v : z) EXPECT_EQ(v, 0.0);
  auto o = z_ode_oracle(inv_cube(), Function::constant(0.0), grid);
  for (double v : o) EXPECT_EQ(v, 0.0);
}

TEST(ComputeZ, UnitForcingWithoutDamping) {
  auto grid = uniform_grid(0.0, 1.0, 10);
  auto z = compute_z(Function::constant(0.0), Function::constant(1.0), grid);
  EXPECT_NEAR(z.back(), -1.0, 1e-14);
  EXPECT_EQ(z.front(), 0.0);
  auto o = z_ode_oracle(Function::constant(0.0), Function::constant(1.0), uniform_grid(0.5, 1.5, 10));
  for (std::size_t i = 0; i <= 10; ++i) EXPECT_NEAR(o[i], -0.1 * static_cast<double>(i), 1e-12);
}

TEST(ComputeZ, NegativeAfterFirstPeriod) {
  auto grid = uniform_grid(2 * pi, 4 * pi, 400);
  auto z = compute_z(inv_cube(), lobes(1.6, 1.0), grid);
  EXPECT_LT(z.back(), 0.0);
  EXPECT_EQ(z.front(), 0.0);
}

TEST(ComputeZ, MatchesOdeOracle) {
  auto grid = uniform_grid(2 * pi, 42 * pi, 8000);
  auto t0 = std::chrono::steady_clock::now();
  auto z = compute_z(inv_cube(), lobes(1.6, 1.0), grid);
  auto o = z_ode_oracle(inv_cube(), lobes(1.6, 1.0), grid, 1e-10);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double gap = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) gap = std::max(gap, std::abs(z[i] - o[i]));
  EXPECT_LE(gap, 1e-6);
  EXPECT_LT(secs, 5.0);
}

TEST(ComputeH, ConstantKernels) {
  auto grid = uniform_grid(1.0, 50.0, 490);
  std::vector<double> zero(grid.size(), 0.0);
  auto h0 = compute_h(Function::constant(0.0), Function::constant(0.0), grid, zero, HTail{1.0});
  for (double v : h0.h) EXPECT_EQ(v, 0.0);

  std::vector<double> minus_one(grid.size(), -1.0);
  auto h1 = compute_h(Function::constant(0.0), Function::constant(0.0), grid, minus_one, HTail{1.0});
  for (std::size_t i = 0; i < grid.size(); ++i) {
    EXPECT_NEAR(h1.h[i], 1.0, 1e-12);
    EXPECT_NEAR(h1.h_over_s[i], 1.0 / grid[i], 1e-14);
  }
}

TEST(ComputeH, RequiresFiniteBound) {
  auto grid = uniform_grid(1.0, 2.0, 4);
  std::vector<double> z(grid.size(), 0.0);
  EXPECT_THROW((void)compute_h(Function::constant(0.0), Function::constant(0.0), grid, z, HTail{}), Error);
}

TEST(OdeResidual, LinearFunctionIsExact) {
  auto grid = uniform_grid(1.0, 2.0, 64);
  std::vector<double> h(grid.begin(), grid.end());
  auto r = ode_residual(grid, h, Function::constant(0.0), Function::constant(0.0));
  EXPECT_EQ(r.sup, 0.0);
  EXPECT_EQ(r.l2, 0.0);

  std::vector<double> ones(grid.size(), 1.0);
  auto c = ode_residual(grid, ones, Function::constant(0.0), Function::constant(0.0));
  EXPECT_EQ(c.sup, 0.0);
}

TEST(OdeResidual, Preconditions) {
  std::vector<double> two{1.0, 2.0};
  EXPECT_THROW((void)ode_residual(two, two, Function::constant(0.0), Function::constant(0.0)), std::invalid_argument);
  std::vector<double> uneven{1.0, 2.0, 4.0};
  EXPECT_THROW((void)ode_residual(uneven, uneven, Function::constant(0.0), Function::constant(0.0)),
               std::invalid_argument);
}

class BuiltKernel : public ::testing::Test {
 protected:
  static const KernelPair& kernel() {
    static const KernelPair k = [] {
      auto grid = uniform_grid(2 * pi, 42 * pi, 40000);
      return build_kernel(inv_cube(), lobes(1.6, 1.0), grid, KernelBounds{1.0 / (8 * pi * pi), 2.0});
    }();
    return k;
  }
};

TEST_F(BuiltKernel, SolvesComparisonEquation) {
  const auto& k = kernel();
  EXPECT_EQ(k.z.front(), 0.0);
  EXPECT_GT(k.h.front(), 0.0);
  EXPECT_GE(k.extension_end, 8.0 * k.grid.back() - pi / 32);
  auto r = ode_residual(k.grid, k.h, inv_cube(), lobes(1.6, 1.0), k.z);
  EXPECT_LE(r.sup, 1e-4);
  // central differences are second order, so the identity holds to O(step^2)
  EXPECT_LE(r.identity_sup, 1e-5);
}

TEST_F(BuiltKernel, HOverSIsDecreasingWhereZIsNegative) {
  const auto& k = kernel();
  for (std::size_t i = 1; i < k.grid.size(); ++i) {
    if (k.z[i - 1] < 0.0 && k.z[i] < 0.0) {
      EXPECT_LT(k.h_over_s[i], k.h_over_s[i - 1]);
    }
  }
}

TEST(BuildKernel, LinearInForcing) {
  auto grid = uniform_grid(2 * pi, 12 * pi, 1000);
  KernelBounds b{1.0 / (8 * pi * pi), 2.0};
  KernelOptions o;
  o.extension_factor = 2.0;
  auto base = build_kernel(inv_cube(), lobes(1.6, 1.0), grid, b, o);
  proptest::Sampler rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    double c = rng.uniform(0.1, 10.0);
    auto scaled = build_kernel(inv_cube(), lobes(1.6 * c, 1.0 * c), grid, KernelBounds{b.lambda, c * b.z_sup_bound}, o);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_LE(rel_gap(scaled.z[i], c * base.z[i]), 1e-12);
      EXPECT_LE(rel_gap(scaled.h[i], c * base.h[i]), 1e-12);
    }
  }
}

TEST(BuildKernel, RejectsBadInput) {
  std::vector<double> bad{1.0, 1.0, 2.0};
  EXPECT_THROW((void)build_kernel(inv_cube(), lobes(1, 1), bad, KernelBounds{0.1, 1.0}), GridError);
  auto grid = uniform_grid(2 * pi, 4 * pi, 10);
  EXPECT_THROW((void)build_kernel(inv_cube(), lobes(1, 1), grid, KernelBounds{1.5, 1.0}), Error);
  EXPECT_THROW((void)build_kernel(inv_cube(), lobes(1, 1), grid, KernelBounds{0.1}), Error);
}

}  // namespace

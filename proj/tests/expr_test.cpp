#include <oscillax/expr.hpp>
#include <oscillax/function.hpp>

#include "support/property.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <string>

namespace {

using oscillax::CoefficientExpr;
using oscillax::Expr;
using std::numbers::pi;

TEST(ExprParse, SinSquaredAtHalfPi) {
  auto e = CoefficientExpr::parse("sin(s)^2");
  EXPECT_DOUBLE_EQ(e(pi / 2), 1.0);
}

TEST(ExprParse, InverseCube) {
  auto e = CoefficientExpr::parse("1/s^3");
  EXPECT_DOUBLE_EQ(e(2.0), 0.125);
}

TEST(ExprParse, PiecewiseBranchWithBinding) {
  auto branch = oscillax::parse_expr("c*sin(s)^2", {{"c", 1.0}});
  auto q = CoefficientExpr::piecewise({2 * pi, 3 * pi}, {branch});
  EXPECT_NEAR(q(2.5 * pi), 1.0, 1e-15);
}

TEST(ExprParse, PrecedenceAndAssociativity) {
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("1+2*3")(0), 7.0);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("2^3^2")(0), 512.0);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("-2^2")(0), -4.0);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("8/2/2")(0), 2.0);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("2^-1")(0), 0.5);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("1 - 2 - 3")(0), -4.0);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("r*2")(3.0), 6.0);
  EXPECT_DOUBLE_EQ(CoefficientExpr::parse("1.5e2 + 2E-1")(0), 150.2);
}

TEST(ExprParse, SyntaxErrorCarriesPosition) {
  try {
    (void)oscillax::parse_expr("1 + * s");
    FAIL() << "expected ParseError";
  } catch (const oscillax::ParseError& e) {
    EXPECT_EQ(e.position(), 4U);
  }
  EXPECT_THROW((void)oscillax::parse_expr("sin(s"), oscillax::ParseError);
  EXPECT_THROW((void)oscillax::parse_expr(""), oscillax::ParseError);
  EXPECT_THROW((void)oscillax::parse_expr("(s))"), oscillax::ParseError);
}

TEST(ExprParse, UnknownIdentifier) {
  try {
    (void)oscillax::parse_expr("2*mu/s");
    FAIL() << "expected ParseError";
  } catch (const oscillax::ParseError& e) {
    EXPECT_EQ(e.position(), 2U);
    EXPECT_NE(std::string(e.what()).find("mu"), std::string::npos);
  }
}

TEST(ExprEval, Examples) {
  EXPECT_EQ(CoefficientExpr::parse("0")(123.0), 0.0);
  EXPECT_EQ(CoefficientExpr::parse("exp(-s)")(0.0), 1.0);
  EXPECT_NEAR(CoefficientExpr::parse("s*sin(s)^2/ (s^2)")(pi), 0.0, 1e-30);
}

TEST(ExprEval, DomainErrorsInsteadOfNaN) {
  EXPECT_THROW((void)CoefficientExpr::parse("log(s)")(0.0), oscillax::DomainError);
  EXPECT_THROW((void)CoefficientExpr::parse("log(s)")(-1.0), oscillax::DomainError);
  EXPECT_THROW((void)CoefficientExpr::parse("1/s")(0.0), oscillax::DomainError);
  EXPECT_THROW((void)CoefficientExpr::parse("s^0.5")(-1.0), oscillax::DomainError);
  auto bounded = CoefficientExpr::parse("s", {}, oscillax::Domain{1.0, 2.0});
  EXPECT_THROW((void)bounded(2.5), oscillax::DomainError);
  EXPECT_DOUBLE_EQ(bounded(2.0), 2.0);
}

TEST(ExprEval, RepeatedCallsIdentical) {
  auto e = CoefficientExpr::parse("exp(-s/3)*cos(s)^3 + abs(s-2)");
  for (double s : {0.1, 1.7, 9.3}) EXPECT_EQ(e(s), e(s));
}

TEST(ExprGrid, Examples) {
  auto id = CoefficientExpr::parse("s").eval_grid(std::vector<double>{1, 2, 3});
  EXPECT_EQ(id, (std::vector<double>{1, 2, 3}));
  auto sq = CoefficientExpr::parse("sin(s)^2").eval_grid(std::vector<double>{0, pi / 4, pi / 2});
  EXPECT_NEAR(sq[0], 0.0, 1e-300);
  EXPECT_NEAR(sq[1], 0.5, 1e-15);
  EXPECT_NEAR(sq[2], 1.0, 1e-15);
  auto cube = CoefficientExpr::parse("1/s^3").eval_grid(std::vector<double>{10, 20});
  EXPECT_DOUBLE_EQ(cube[0], 1e-3);
  EXPECT_DOUBLE_EQ(cube[1], 1.25e-4);
}

TEST(ExprGrid, ErrorReportsOffendingIndex) {
  auto e = CoefficientExpr::parse("log(s)");
  try {
    (void)e.eval_grid(std::vector<double>{2.0, 1.0, 0.5});
    FAIL();
  } catch (const oscillax::GridError& err) {
    EXPECT_EQ(err.index(), 1U);  // not increasing
  }
  try {
    (void)e.eval_grid(std::vector<double>{-1.0, 0.0, 1.0});
    FAIL();
  } catch (const oscillax::GridError& err) {
    EXPECT_EQ(err.index(), 0U);
  }
}

TEST(ExprPiecewise, OwnershipConvention) {
  // [0,1) -> 10, [1,2) -> 20, [2,3] -> 30
  auto q = CoefficientExpr::piecewise({0, 1, 2, 3}, {Expr::number(10), Expr::number(20), Expr::number(30)});
  EXPECT_EQ(q(0.0), 10);
  EXPECT_EQ(q(0.999), 10);
  EXPECT_EQ(q(1.0), 20);
  EXPECT_EQ(q(2.0), 30);
  EXPECT_EQ(q(3.0), 30);
  EXPECT_THROW((void)q(3.0000001), oscillax::DomainError);
  EXPECT_THROW((void)q(-0.1), oscillax::DomainError);
  EXPECT_THROW((void)CoefficientExpr::piecewise({0, 1, 1}, {Expr::number(1), Expr::number(2)}), std::invalid_argument);
}

TEST(ExprPiecewise, FunctionWrapperExposesBreakpoints) {
  auto q = CoefficientExpr::piecewise({0, 1, 2}, {Expr::number(1), Expr::number(2)});
  oscillax::Function f(q);
  ASSERT_EQ(f.breakpoints().size(), 3U);
  EXPECT_EQ(f(1.5), 2.0);
  auto inside = f.breakpoints_in(0.0, 2.0);
  ASSERT_EQ(inside.size(), 1U);
  EXPECT_EQ(inside[0], 1.0);
}

// Random well-formed sources for the round-trip property.
std::string random_source(oscillax::proptest::Sampler& rng, int depth) {
  if (depth == 0 || rng.integer(0, 3) == 0) {
    switch (rng.integer(0, 3)) {
      case 0: return "s";
      case 1: return std::to_string(rng.integer(0, 9));
      case 2: return "pi";
      default: return "0.125";
    }
  }
  static const char* ops[] = {"+", "-", "*", "/", "^"};
  static const char* funcs[] = {"sin", "cos", "exp", "log", "abs"};
  switch (rng.integer(0, 3)) {
    case 0: return "-" + random_source(rng, depth - 1);
    case 1: return std::string(funcs[rng.integer(0, 4)]) + "(" + random_source(rng, depth - 1) + ")";
    case 2: return "(" + random_source(rng, depth - 1) + ")";
    default:
      return random_source(rng, depth - 1) + " " + ops[rng.integer(0, 4)] + " " + random_source(rng, depth - 1);
  }
}

TEST(ExprProperty, PrintParseIdempotent) {
  oscillax::proptest::Sampler rng(1);
  for (int i = 0; i < 500; ++i) {
    std::string src = random_source(rng, 5);
    Expr first = oscillax::parse_expr(src);
    std::string printed = oscillax::to_string(first);
    Expr second = oscillax::parse_expr(printed);
    ASSERT_TRUE(first == second) << src << " -> " << printed;
    EXPECT_EQ(printed, oscillax::to_string(second));
  }
}

TEST(ExprProperty, GridMatchesPointwise) {
  oscillax::proptest::Sampler rng(2);
  auto e = CoefficientExpr::parse("exp(-s)*sin(3*s)^2 + s^2/(1+s)");
  std::vector<double> grid;
  double s = 0.0;
  for (int i = 0; i < 200; ++i) grid.push_back(s += rng.uniform(1e-3, 0.5));
  auto values = e.eval_grid(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(values[i], e(grid[i]));
}

}  // namespace

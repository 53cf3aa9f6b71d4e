#include <oscillax/config.hpp>

#include <gtest/gtest.h>

#include <numbers>

namespace {

using namespace oscillax;
using nlohmann::json;

TEST(Config, EmptyDocumentGivesDefaults) {
  auto c = parse_config(json::object(), Mode::full_pipeline);
  EXPECT_EQ(c.m_max, 25);
  EXPECT_EQ(c.example.gamma, 6.0);
  EXPECT_EQ(c.pair.params.gamma2, 8.0);
  EXPECT_EQ(c.bridge.n, 3);
  EXPECT_EQ(c.bvp.cells, kDefaultSolverCells);
  EXPECT_TRUE(c.wants("csv") && c.wants("json") && c.wants("svg"));
  EXPECT_FALSE(c.lemma.q.has_value());
}

TEST(Config, ConstantExpressionsAsNumbers) {
  auto c = parse_config(json{{"pair", {{"order_step", "pi/100"}}}}, Mode::build_pair);
  EXPECT_DOUBLE_EQ(c.pair.order_step, std::numbers::pi / 100);
  EXPECT_THROW((void)parse_config(json{{"pair", {{"order_step", "s/100"}}}}, Mode::build_pair), ConfigError);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW((void)parse_config(json{{"exmaple", json::object()}}, Mode::full_pipeline), ConfigError);
  EXPECT_THROW((void)parse_config(json{{"bvp", {{"tolerance", 1e-9}}}}, Mode::full_pipeline), ConfigError);
}

TEST(Config, ConstraintViolationsNamed) {
  try {
    (void)parse_config(json{{"example", {{"gamma", 5}}}}, Mode::construct_example);
    FAIL() << "expected ConstraintError";
  } catch (const ConstraintError& e) {
    EXPECT_NE(std::string(e.what()).find("6 <= gamma"), std::string::npos);
  }
  EXPECT_THROW((void)parse_config(json{{"example", {{"q_minus", 3}}}}, Mode::construct_example), ConstraintError);
  EXPECT_THROW((void)parse_config(json{{"bridge", {{"R", 10}}}}, Mode::bridge), ConstraintError);
  EXPECT_THROW((void)parse_config(json{{"bvp", {{"cells", 10}}}}, Mode::solve_bvp), ConstraintError);
}

TEST(Config, BadValues) {
  EXPECT_THROW((void)parse_config(json{{"kernel", {{"step", -1}}}}, Mode::compute_kernel), ConfigError);
  EXPECT_THROW((void)parse_config(json{{"kernel", {{"periods", 1.5}}}}, Mode::compute_kernel), ConfigError);
  EXPECT_THROW((void)parse_config(json{{"output", {{"formats", {"pdf"}}}}}, Mode::compute_kernel), ConfigError);
  EXPECT_THROW((void)parse_config(json{{"bridge", {{"f", "cubic"}}}}, Mode::bridge), ConfigError);
  EXPECT_THROW((void)parse_config(json::array(), Mode::bridge), ConfigError);
}

TEST(Config, ExpressionsMustParse) {
  EXPECT_THROW((void)parse_config(json{{"lemma", {{"q", "sin(s"}}}}, Mode::verify_lemma), ParseError);
  EXPECT_THROW((void)parse_config(json{{"bridge", {{"g", "1/r^^4"}}}}, Mode::bridge), ParseError);
  auto c = parse_config(json{{"lemma", {{"q", "sin(s)"}, {"node_step", "pi"}}}}, Mode::verify_lemma);
  EXPECT_EQ(*c.lemma.q, "sin(s)");
}

TEST(Config, Modes) {
  for (const auto& [m, name] : kModeNames) EXPECT_EQ(parse_mode(name), m);
  EXPECT_THROW((void)parse_mode("solve"), ConfigError);
}

}  // namespace

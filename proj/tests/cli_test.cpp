#include <oscillax/pipeline.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef OSCILLAX_SOURCE_DIR
#error "OSCILLAX_SOURCE_DIR must point at the source tree"
#endif

namespace {

using namespace oscillax;
namespace fs = std::filesystem;

const fs::path kSource = OSCILLAX_SOURCE_DIR;

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "oscillax_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::string& mode, const fs::path& config, const fs::path& out,
               std::optional<std::vector<std::string>> formats = std::nullopt) {
  CliRequest req;
  req.mode = mode;
  req.config = config;
  req.out = out;
  req.formats = std::move(formats);
  std::ostringstream o, e;
  int code = run_cli(req, o, e);
  return {code, o.str(), e.str()};
}

TEST(Cli, ConstructExamplePassesAndIsDeterministic) {
  auto a = fresh_dir("example_a");
  auto b = fresh_dir("example_b");
  auto ra = invoke("construct-example", kSource / "configs/default.json", a);
  auto rb = invoke("construct-example", kSource / "configs/default.json", b);
  ASSERT_EQ(ra.code, 0) << ra.err;
  ASSERT_EQ(rb.code, 0) << rb.err;
  for (const char* f : {"example_report.json", "q.csv", "q.svg"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_FALSE(fs::exists(a / "failures.json"));
}

TEST(Cli, FormatSelection) {
  auto dir = fresh_dir("csv_only");
  auto r = invoke("construct-example", kSource / "tests/data/example_csv_only.json", dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "q.csv"));
  EXPECT_FALSE(fs::exists(dir / "example_report.json"));
  EXPECT_FALSE(fs::exists(dir / "q.svg"));
  auto dir2 = fresh_dir("svg_override");
  r = invoke("construct-example", kSource / "tests/data/example_csv_only.json", dir2, std::vector<std::string>{"svg"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir2 / "q.svg"));
  EXPECT_FALSE(fs::exists(dir2 / "q.csv"));
}

TEST(Cli, CheckFailureWritesFailureList) {
  auto dir = fresh_dir("sine");
  auto r = invoke("verify-lemma", kSource / "configs/sine_lemma.json", dir);
  EXPECT_EQ(r.code, 1);
  ASSERT_TRUE(fs::exists(dir / "failures.json"));
  auto j = nlohmann::json::parse(slurp(dir / "failures.json"));
  bool balance = false;
  for (const auto& f : j["failures"]) {
    EXPECT_FALSE(f["pass"].get<bool>());
    if (f["name"] == "lobe_balance") {
      balance = true;
      EXPECT_LT(f["margin"].get<double>(), 0.0);
    }
  }
  EXPECT_TRUE(balance);
  EXPECT_NE(r.out.find("FAIL lemma.lobe_balance"), std::string::npos);
}

TEST(Cli, ConfigErrors) {
  auto dir = fresh_dir("bad");
  auto r = invoke("construct-example", kSource / "configs/bad_gamma.json", dir);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("6 <= gamma"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir));
  EXPECT_EQ(invoke("construct-example", kSource / "tests/data/malformed.json", dir).code, 2);
  EXPECT_EQ(invoke("construct-example", kSource / "tests/data/does_not_exist.json", dir).code, 2);
  EXPECT_EQ(invoke("explode", kSource / "configs/default.json", dir).code, 2);
  EXPECT_EQ(invoke("construct-example", kSource / "configs/default.json", dir, std::vector<std::string>{"pdf"}).code, 2);
}

TEST(Cli, InternalErrorIsThree) {
  // One iteration cannot reach tol, which the solver reports as an error.
  auto dir = fresh_dir("slow_bvp");
  auto r = invoke("solve-bvp", kSource / "tests/data/slow_bvp.json", dir);
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("internal error"), std::string::npos) << r.err;
}

TEST(Cli, StaleFailureListRemoved) {
  auto dir = fresh_dir("stale");
  fs::create_directories(dir);
  { std::ofstream(dir / "failures.json") << "{}"; }
  auto r = invoke("construct-example", kSource / "configs/default.json", dir);
  EXPECT_EQ(r.code, 0);
  EXPECT_FALSE(fs::exists(dir / "failures.json"));
}

}  // namespace

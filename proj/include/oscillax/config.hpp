#pragma once

// Run configuration, read from one JSON document. Every block is optional;
// unknown keys are rejected so that a typo cannot silently fall back to a default.

#include <oscillax/bridge.hpp>
#include <oscillax/bvp.hpp>
#include <oscillax/error.hpp>
#include <oscillax/expr.hpp>
#include <oscillax/lemma.hpp>
#include <oscillax/oscillation.hpp>
#include <oscillax/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace oscillax {

enum class Mode { construct_example, verify_lemma, compute_kernel, build_pair, bridge, solve_bvp, full_pipeline };

inline constexpr std::array<std::pair<Mode, std::string_view>, 7> kModeNames{{
    {Mode::construct_example, "construct-example"},
    {Mode::verify_lemma, "verify-lemma"},
    {Mode::compute_kernel, "compute-kernel"},
    {Mode::build_pair, "build-pair"},
    {Mode::bridge, "bridge"},
    {Mode::solve_bvp, "solve-bvp"},
    {Mode::full_pipeline, "full-pipeline"},
}};

inline Mode parse_mode(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  throw ConfigError("unknown mode '" + std::string(name) + "'");
}

inline std::string_view mode_name(Mode m) {
  for (const auto& [k, n] : kModeNames) {
    if (k == m) return n;
  }
  return "?";
}

/// Input of the lemma and kernel stages. Without `q` it is the constructed example.
struct LemmaInput {
  std::optional<std::string> q;
  std::optional<std::string> p;
  std::optional<TailModel> p_tail;
  double node_step = std::numbers::pi;
  double node_offset = 0.0;
  EpsilonStrategy epsilon = EpsilonStrategy::slack;
  std::optional<double> epsilon_remainder;
  double strict_threshold = 1e-12;
};

struct KernelConfig {
  double step = 1e-3;
  int periods = 20;  // window [s0, s0 + 2 pi periods]
  double cell_tol = kKernelCellTol;
  double oracle_tol = 1e-10;
  double oracle_gate = 1e-6;
  double residual_gate = 1e-4;
};

struct PairConfig {
  PairParams params;
  double order_step = std::numbers::pi / 100;
  int order_periods = 25;
};

struct FeatureConfig {
  double varsigma = 1.0;
  int M = 50;
};

struct BridgeConfig {
  int n = 3;
  double R = 1.0;
  std::string g = "1/r^4";
  PowerEnvelope g_envelope;
  Nonlinearity::Kind f = Nonlinearity::Kind::blend;
  double step = 1e-3;
  int periods = 20;
  std::vector<double> growth_T{1e2, 1e3, 1e4};
  std::vector<int> round_trip_dims{3, 4, 5, 6};
  int round_trip_points = 1000;
  double round_trip_tol = 1e-12;
  double residual_tol = 1e-6;
};

struct BvpConfig {
  std::size_t cells = kDefaultSolverCells;
  int periods = 20;
  BvpOptions options;
  int iteration_gate = 50;
  double decay_window = 0.3;
  double boundary_layer = 0.05;
  double sandwich_tol = 1e-8;
  double decay_lo = -1.15;
  double decay_hi = -0.85;
  double linear_oracle_tol = 1e-4;
};

struct RunConfig {
  Mode mode = Mode::full_pipeline;
  int m_max = 25;
  OscillationParams example;
  LemmaInput lemma;
  KernelConfig kernel;
  PairConfig pair;
  FeatureConfig features;
  BridgeConfig bridge;
  BvpConfig bvp;
  std::filesystem::path out = "out";
  std::set<std::string> formats{"csv", "json", "svg"};
  bool parallel = false;

  bool wants(const std::string& format) const { return formats.count(format) > 0; }
};

namespace detail {

/// Walks one JSON object, remembering which keys were consumed.
class Block {
 public:
  Block(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  /// Numbers may also be given as constant expressions such as "pi/100".
  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    out = to_number(j_.at(key), where(key));
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw ConfigError(where(key) + ": expected an integer");
    out = v.get<int>();
  }

  void count(const std::string& key, std::size_t& out) {
    int v = 0;
    if (!has(key)) return;
    integer(key, v);
    if (v < 0) throw ConfigError(where(key) + ": expected a nonnegative integer");
    out = static_cast<std::size_t>(v);
  }

  void string(const std::string& key, std::string& out) {
    if (!has(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(where(key) + ": expected a string");
    out = v.get<std::string>();
  }

  std::optional<Block> child(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return Block(j_.at(key), where(key));
  }

  const nlohmann::json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(where(key) + ": unknown key");
    }
  }

  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static double to_number(const nlohmann::json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      // Evaluating at NaN makes any dependence on the variable visible.
      double x = parse_expr(v.get<std::string>()).evaluate(std::numeric_limits<double>::quiet_NaN());
      if (!std::isfinite(x)) throw ConfigError(where + ": '" + v.get<std::string>() + "' is not a finite constant");
      return x;
    }
    throw ConfigError(where + ": expected a number");
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline TailModel read_tail(Block b) {
  double exponent = 0.0, constant = 1.0, cutoff = 0.0;
  std::string kind = "power";
  b.string("kind", kind);
  b.number("exponent", exponent);
  b.number("constant", constant);
  b.number("cutoff", cutoff);
  b.finish();
  if (kind == "power") return TailModel::power(exponent, constant, cutoff);
  if (kind == "exponential") return TailModel::exponential(exponent, constant, cutoff);
  throw ConfigError(b.where("kind") + ": expected 'power' or 'exponential'");
}

inline void read_family(Block& b, OscillationParams& o) {
  b.number("q_minus", o.q_minus);
  b.number("q_plus", o.q_plus);
  b.number("gamma", o.gamma);
  b.number("sigma", o.sigma);
  b.number("eta", o.eta);
  b.number("theta", o.theta);
  b.number("extent", o.extent);
  std::string p;
  b.string("p", p);
  if (!p.empty()) o.p = CoefficientExpr::parse(p, {}, Domain{0.0, std::numeric_limits<double>::infinity()});
  if (auto t = b.child("p_tail")) o.p_tail = read_tail(*t);
  b.finish();
}

}  // namespace detail

/// Builds and validates a configuration. Throws ConfigError, ParseError or ConstraintError.
inline RunConfig parse_config(const nlohmann::json& doc, Mode mode) {
  using detail::Block;
  RunConfig c;
  c.mode = mode;
  Block root(doc, "");
  root.integer("m_max", c.m_max);
  if (auto b = root.child("example")) detail::read_family(*b, c.example);
  c.example.m_max = c.m_max;

  if (auto b = root.child("lemma")) {
    std::string q, p, eps = "slack";
    b->string("q", q);
    b->string("p", p);
    if (!q.empty()) c.lemma.q = q;
    if (!p.empty()) c.lemma.p = p;
    if (auto t = b->child("p_tail")) c.lemma.p_tail = detail::read_tail(*t);
    b->number("node_step", c.lemma.node_step);
    b->number("node_offset", c.lemma.node_offset);
    b->string("epsilon", eps);
    if (eps == "slack") {
      c.lemma.epsilon = EpsilonStrategy::slack;
    } else if (eps == "positive_lobe") {
      c.lemma.epsilon = EpsilonStrategy::positive_lobe;
    } else {
      throw ConfigError("lemma.epsilon: expected 'slack' or 'positive_lobe'");
    }
    if (b->has("epsilon_remainder")) {
      double r = 0.0;
      b->number("epsilon_remainder", r);
      c.lemma.epsilon_remainder = r;
    }
    b->number("strict_threshold", c.lemma.strict_threshold);
    b->finish();
  }

  if (auto b = root.child("kernel")) {
    b->number("step", c.kernel.step);
    b->integer("periods", c.kernel.periods);
    b->number("cell_tol", c.kernel.cell_tol);
    b->number("oracle_tol", c.kernel.oracle_tol);
    b->number("oracle_gate", c.kernel.oracle_gate);
    b->number("residual_gate", c.kernel.residual_gate);
    b->finish();
  }

  auto& pp = c.pair.params;
  if (auto b = root.child("pair")) {
    b->number("gamma1", pp.gamma1);
    b->number("sigma1", pp.sigma1);
    b->number("eta1", pp.eta1);
    b->number("theta1", pp.theta1);
    b->number("gamma2", pp.gamma2);
    b->number("sigma2", pp.sigma2);
    b->number("eta2", pp.eta2);
    b->number("theta2", pp.theta2);
    b->number("alpha_gap", pp.alpha_gap);
    b->number("beta_gap", pp.beta_gap);
    b->number("order_step", c.pair.order_step);
    b->integer("order_periods", c.pair.order_periods);
    b->finish();
  }
  pp.q_minus = c.example.q_minus;
  pp.q_plus = c.example.q_plus;
  pp.s0 = c.example.s0;
  pp.p = c.example.p;
  pp.p_tail = c.example.p_tail;
  pp.m_max = c.m_max;
  pp.extent = c.example.extent;

  if (auto b = root.child("features")) {
    b->number("varsigma", c.features.varsigma);
    b->integer("M", c.features.M);
    b->finish();
  }

  if (auto b = root.child("bridge")) {
    auto& br = c.bridge;
    b->integer("n", br.n);
    b->number("R", br.R);
    b->string("g", br.g);
    if (auto e = b->child("g_envelope")) {
      e->number("constant", br.g_envelope.constant);
      e->number("exponent", br.g_envelope.exponent);
      e->finish();
    }
    std::string f = "blend";
    b->string("f", f);
    if (f == "blend") {
      br.f = Nonlinearity::Kind::blend;
    } else if (f == "lower") {
      br.f = Nonlinearity::Kind::lower;
    } else if (f == "upper") {
      br.f = Nonlinearity::Kind::upper;
    } else {
      throw ConfigError("bridge.f: expected 'blend', 'lower' or 'upper'");
    }
    b->number("step", br.step);
    b->integer("periods", br.periods);
    if (b->has("growth_T")) {
      const auto& arr = b->raw("growth_T");
      if (!arr.is_array()) throw ConfigError("bridge.growth_T: expected an array");
      br.growth_T.clear();
      for (const auto& v : arr) br.growth_T.push_back(Block::to_number(v, "bridge.growth_T"));
    }
    if (b->has("round_trip_dims")) {
      const auto& arr = b->raw("round_trip_dims");
      if (!arr.is_array()) throw ConfigError("bridge.round_trip_dims: expected an array");
      br.round_trip_dims.clear();
      for (const auto& v : arr) {
        if (!v.is_number_integer()) throw ConfigError("bridge.round_trip_dims: expected integers");
        br.round_trip_dims.push_back(v.get<int>());
      }
    }
    b->integer("round_trip_points", br.round_trip_points);
    b->number("round_trip_tol", br.round_trip_tol);
    b->number("residual_tol", br.residual_tol);
    b->finish();
  }

  if (auto b = root.child("bvp")) {
    auto& bv = c.bvp;
    b->count("cells", bv.cells);
    b->integer("periods", bv.periods);
    b->number("tol", bv.options.tol);
    if (b->has("K")) {
      double k = 0.0;
      b->number("K", k);
      bv.options.K = k;
    }
    b->integer("max_iterations", bv.options.max_iterations);
    b->integer("iteration_gate", bv.iteration_gate);
    std::string boundary = "upper";
    b->string("boundary", boundary);
    if (boundary == "upper") {
      bv.options.boundary = BoundaryTrace::upper;
    } else if (boundary == "lower") {
      bv.options.boundary = BoundaryTrace::lower;
    } else {
      throw ConfigError("bvp.boundary: expected 'upper' or 'lower'");
    }
    b->number("decay_window", bv.decay_window);
    b->number("boundary_layer", bv.boundary_layer);
    b->number("sandwich_tol", bv.sandwich_tol);
    b->number("linear_oracle_tol", bv.linear_oracle_tol);
    b->finish();
  }

  if (auto b = root.child("output")) {
    std::string dir;
    b->string("dir", dir);
    if (!dir.empty()) c.out = dir;
    if (b->has("formats")) {
      const auto& arr = b->raw("formats");
      if (!arr.is_array()) throw ConfigError("output.formats: expected an array");
      c.formats.clear();
      for (const auto& v : arr) {
        if (!v.is_string()) throw ConfigError("output.formats: expected strings");
        c.formats.insert(v.get<std::string>());
      }
    }
    b->finish();
  }
  root.finish();

  // Validation: everything that can be decided before any numerics run.
  for (const auto& f : c.formats) {
    if (f != "csv" && f != "json" && f != "svg") throw ConfigError("unknown output format '" + f + "'");
  }
  if (c.m_max < 2) throw ConstraintError("m_max >= 2");
  c.example.validate();
  pp.validate();
  auto positive = [](double v, const char* what) {
    if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be > 0");
  };
  positive(c.kernel.step, "kernel.step");
  positive(c.kernel.cell_tol, "kernel.cell_tol");
  positive(c.kernel.oracle_tol, "kernel.oracle_tol");
  positive(c.kernel.oracle_gate, "kernel.oracle_gate");
  positive(c.kernel.residual_gate, "kernel.residual_gate");
  positive(c.pair.order_step, "pair.order_step");
  positive(c.features.varsigma, "features.varsigma");
  positive(c.bridge.step, "bridge.step");
  positive(c.bridge.round_trip_tol, "bridge.round_trip_tol");
  positive(c.bridge.residual_tol, "bridge.residual_tol");
  positive(c.bvp.options.tol, "bvp.tol");
  positive(c.bvp.sandwich_tol, "bvp.sandwich_tol");
  positive(c.bvp.linear_oracle_tol, "bvp.linear_oracle_tol");
  positive(c.lemma.strict_threshold, "lemma.strict_threshold");
  positive(c.lemma.node_step, "lemma.node_step");
  if (c.kernel.periods < 1 || c.bridge.periods < 1 || c.bvp.periods < 1) throw ConfigError("periods must be >= 1");
  if (c.pair.order_periods < 1 || c.pair.order_periods > c.m_max) throw ConfigError("pair.order_periods must lie in [1, m_max]");
  if (c.features.M < 2) throw ConfigError("features.M must be >= 2");
  if (c.bvp.cells < 1000) throw ConstraintError("N >= 1000 grid cells");
  if (c.bvp.options.K && *c.bvp.options.K < 0.0) throw ConstraintError("K >= 0");
  if (c.bridge.round_trip_points < 2) throw ConfigError("bridge.round_trip_points must be >= 2");
  for (int n : c.bridge.round_trip_dims) {
    if (n < 3) throw ConstraintError("n >= 3");
  }
  // Expressions must parse; domains follow the variable's natural range.
  (void)CoefficientExpr::parse(c.bridge.g);
  if (c.lemma.q) (void)CoefficientExpr::parse(*c.lemma.q);
  if (c.lemma.p) (void)CoefficientExpr::parse(*c.lemma.p);
  RadialMap(c.bridge.n, c.bridge.R, c.example.s0);
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path, Mode mode) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(doc, mode);
}

}  // namespace oscillax

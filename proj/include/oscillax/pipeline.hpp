#pragma once

// Orchestration behind the command-line tool: each stage turns a RunConfig
// into named checks plus rendered artifacts; run() writes them and maps the
// outcome to an exit status.

#include <oscillax/bridge.hpp>
#include <oscillax/bvp.hpp>
#include <oscillax/config.hpp>
#include <oscillax/error.hpp>
#include <oscillax/kernel.hpp>
#include <oscillax/lemma.hpp>
#include <oscillax/oscillation.hpp>
#include <oscillax/report.hpp>
#include <oscillax/svg.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <future>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oscillax {

struct CheckRecord {
  std::string stage;
  std::string name;
  bool pass = false;
  double margin = 0.0;
  nlohmann::json details = nlohmann::json::object();
};

struct Artifact {
  std::string file;
  std::string format;  // json, csv or svg
  std::string content;
};

struct StageOutput {
  std::string stage;
  std::vector<CheckRecord> checks;
  std::vector<Artifact> artifacts;

  void check(std::string name, bool pass, double margin, nlohmann::json details = nlohmann::json::object()) {
    checks.push_back({stage, std::move(name), pass, margin, std::move(details)});
  }
};

inline constexpr std::size_t kCsvMaxRows = 25000;

namespace detail {

inline nlohmann::json check_json(const CheckRecord& c) {
  return {{"name", c.name}, {"pass", c.pass}, {"margin", c.margin}, {"details", c.details}};
}

inline nlohmann::json checks_json(std::vector<CheckRecord> checks) {
  std::sort(checks.begin(), checks.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : checks) arr.push_back(check_json(c));
  return arr;
}

inline std::size_t csv_stride(std::size_t rows) { return rows <= kCsvMaxRows ? 1 : (rows + kCsvMaxRows - 1) / kCsvMaxRows; }

/// Every stride-th row plus the last one.
inline Table sampled_table(std::vector<std::string> names, const std::vector<const std::vector<double>*>& columns) {
  Table t;
  t.columns = std::move(names);
  const std::size_t n = columns.front()->size();
  const std::size_t stride = csv_stride(n);
  for (std::size_t i = 0; i < n; i += stride) {
    std::vector<double> row;
    for (const auto* c : columns) row.push_back((*c)[i]);
    t.rows.push_back(std::move(row));
  }
  if ((n - 1) % stride != 0) {
    std::vector<double> row;
    for (const auto* c : columns) row.push_back((*c)[n - 1]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<double> window_grid(double s0, int periods, double step) {
  const double width = 2.0 * std::numbers::pi * periods;
  auto cells = static_cast<std::size_t>(std::llround(width / step));
  return uniform_grid(s0, s0 + width, std::max<std::size_t>(cells, 2));
}

template <class F>
auto launch(bool parallel, F&& f) {
  return std::async(parallel ? std::launch::async : std::launch::deferred, std::forward<F>(f));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Shared contexts

struct LemmaContext {
  bool user = false;
  Function p;
  Function q;
  std::vector<double> nodes;
  LemmaOptions options;
  HypothesisReport hypotheses;
  std::vector<double> grid;
  std::optional<KernelPair> kernel;  // absent when the hypotheses give no finite bound on z
  std::optional<OscillationSpec> spec;
};

inline LemmaContext prepare_lemma(const RunConfig& cfg) {
  LemmaContext ctx;
  const auto& in = cfg.lemma;
  if (in.q) {
    ctx.user = true;
    const Domain half{0.0, std::numeric_limits<double>::infinity()};
    ctx.q = Function(CoefficientExpr::parse(*in.q));
    ctx.p = in.p ? Function(CoefficientExpr::parse(*in.p, {}, half)) : Function(cfg.example.p);
    for (int k = 0; k <= 2 * cfg.m_max + 2; ++k) ctx.nodes.push_back(in.node_offset + k * in.node_step);
    ctx.options.epsilon = in.epsilon;
    ctx.options.p_tail = in.p_tail.value_or(cfg.example.p_tail);
    ctx.options.epsilon_remainder = in.epsilon_remainder;
  } else {
    ctx.spec = build_oscillation(cfg.example);
    ctx.p = ctx.spec->p_function();
    ctx.q = ctx.spec->q_function();
    ctx.nodes = ctx.spec->nodes;
    ctx.options = lemma_options_for(*ctx.spec, cfg.m_max, in.epsilon);
    if (in.p_tail) ctx.options.p_tail = *in.p_tail;
    if (in.epsilon_remainder) ctx.options.epsilon_remainder = in.epsilon_remainder;
  }
  ctx.options.strict_threshold = in.strict_threshold;
  ctx.hypotheses = check_hypotheses(ctx.p, ctx.q, ctx.nodes, cfg.m_max, ctx.options);
  ctx.grid = detail::window_grid(ctx.nodes[2], cfg.kernel.periods, cfg.kernel.step);
  double bound = ctx.hypotheses.z_sup_bound();
  if (std::isfinite(bound) && ctx.hypotheses.lambda < 1.0) {
    KernelOptions ko;
    ko.cell_tol = cfg.kernel.cell_tol;
    ctx.kernel = build_kernel(ctx.p, ctx.q, ctx.grid, KernelBounds{ctx.hypotheses.lambda, bound}, ko);
  }
  return ctx;
}

struct BridgeContext {
  PairSpec pair;
  RadialProblem problem;
  LiftedCoefficients lifted;
  HypothesisReport hyp1;
  HypothesisReport hyp2;
  KernelBounds bounds1;
  KernelBounds bounds2;
};

inline RadialProblem make_problem(const RunConfig& cfg, const PairSpec& pair) {
  RadialProblem pr;
  pr.n = cfg.bridge.n;
  pr.R = cfg.bridge.R;
  pr.s0 = cfg.example.s0;
  pr.g = CoefficientExpr::parse(cfg.bridge.g);
  pr.g_envelope = cfg.bridge.g_envelope;
  pr.varsigma = cfg.features.varsigma;
  pr.f = Nonlinearity{cfg.bridge.f, {}, {}};
  auto map = pr.map();
  pr.a1 = push_a_from_q(map, pair.q1.q_function());
  pr.a2 = push_a_from_q(map, pair.q2.q_function());
  return pr;
}

inline BridgeContext prepare_bridge(const RunConfig& cfg, const PairSpec& pair) {
  BridgeContext ctx{pair, make_problem(cfg, pair), {}, {}, {}, {}, {}};
  ctx.lifted = lift_coefficients(ctx.problem);
  auto hyp = [&](const Function& q, const OscillationSpec& spec) {
    auto o = lemma_options_for(spec, cfg.m_max);
    o.p_tail = ctx.lifted.p_tail;
    return check_hypotheses(ctx.lifted.p, q, spec.nodes, cfg.m_max, o);
  };
  auto f1 = detail::launch(cfg.parallel, [&] { return hyp(ctx.lifted.q1, pair.q1); });
  auto f2 = detail::launch(cfg.parallel, [&] { return hyp(ctx.lifted.q2, pair.q2); });
  ctx.hyp1 = f1.get();
  ctx.hyp2 = f2.get();
  ctx.bounds1 = {ctx.hyp1.lambda, ctx.hyp1.z_sup_bound()};
  ctx.bounds2 = {ctx.hyp2.lambda, ctx.hyp2.z_sup_bound()};
  if (!ctx.hyp1.ok() || !ctx.hyp2.ok()) {
    throw ConstraintError("the lifted pair must satisfy the kernel hypotheses to serve as barriers");
  }
  return ctx;
}

inline BarrierPair barriers_on(const BridgeContext& ctx, std::span<const double> grid) {
  return build_barriers(ctx.problem.map(), ctx.lifted, grid, ctx.bounds1, ctx.bounds2);
}

// ---------------------------------------------------------------------------
// Stages

inline StageOutput example_stage(const RunConfig& cfg) {
  StageOutput out{"example", {}, {}};
  auto spec = build_oscillation(cfg.example);
  auto lobes = lobe_identities(spec, cfg.m_max);
  out.check("lobe_identities", lobes.max_rel_error <= 1e-9, 1e-9 - lobes.max_rel_error,
            {{"max_rel_error", lobes.max_rel_error}, {"positive", lobes.positive}, {"negative", lobes.negative}});

  auto grid = detail::window_grid(spec.params.s0, cfg.kernel.periods, cfg.kernel.step);
  auto q = spec.q.eval_grid(grid);
  double q_max = 0.0;
  for (double v : q) q_max = std::max(q_max, std::abs(v));
  out.check("sup_bound", q_max <= spec.sup_bound, spec.sup_bound - q_max,
            {{"sup_bound", spec.sup_bound}, {"max_sampled_abs_q", q_max}});

  int M = std::min(cfg.features.M, spec.periods());
  auto f = check_integral_features(spec, cfg.features.varsigma, M);
  out.check("divergence_lower_bound", f.dominance_margin >= 0.0, f.dominance_margin,
            {{"partial_sums", f.partial_sums}, {"lower_bounds", f.lower_bounds}, {"harmonic_bounds", f.harmonic_bounds}});
  out.check("divergence_log_growth", f.log_slope > 0.0, f.log_slope, {{"log_slope", f.log_slope}, {"M", f.M}});
  out.check("weighted_cauchy", f.convergence_ok, f.cauchy_margin,
            {{"varsigma", f.varsigma}, {"truncations", f.truncations}, {"weighted", f.weighted},
             {"tail_bounds", f.tail_bounds}});

  nlohmann::json report = to_json(spec);
  report["checks"] = detail::checks_json(out.checks);
  out.artifacts.push_back({"example_report.json", "json", dump_json(report)});
  out.artifacts.push_back({"q.csv", "csv", to_csv(detail::sampled_table({"s", "q"}, {&grid, &q}))});
  PlotOptions po;
  po.title = "oscillating forcing q(s)";
  po.x_label = "s";
  po.y_label = "q";
  out.artifacts.push_back({"q.svg", "svg", render_svg({{"q", grid, q}}, po)});
  return out;
}

inline StageOutput lemma_stage(const RunConfig& cfg, const LemmaContext& ctx) {
  StageOutput out{"lemma", {}, {}};
  LemmaReport report;
  report.hypotheses = ctx.hypotheses;
  if (ctx.kernel) {
    ConclusionOptions co;
    co.strict_threshold = cfg.lemma.strict_threshold;
    co.negativity_offset = std::numbers::pi;
    co.nodes = ctx.nodes;
    report.conclusions = check_conclusions(*ctx.kernel, co);
  }
  if (ctx.spec) {
    report.remark = check_remark(ctx.p, ctx.nodes, cfg.m_max, cfg.example.q_minus, ctx.hypotheses.epsilon, ctx.options);
  }
  auto entries = to_json(report);
  if (ctx.kernel) {
    auto r = ode_residual(ctx.kernel->grid, ctx.kernel->h, ctx.p, ctx.q, ctx.kernel->z);
    double margin = cfg.kernel.residual_gate - r.sup;
    entries.push_back({{"name", "h_ode_residual"},
                       {"pass", margin >= 0.0},
                       {"margin", margin},
                       {"details",
                        {{"verdict", margin >= 0.0 ? "pass" : "fail"},
                         {"sup", r.sup},
                         {"l2", r.l2},
                         {"identity_sup", r.identity_sup},
                         {"argmax", r.argmax},
                         {"step", cfg.kernel.step}}}});
  } else {
    entries.push_back({{"name", "kernel_conclusions"},
                       {"pass", false},
                       {"margin", 0.0},
                       {"details",
                        {{"verdict", "inconclusive"},
                         {"reason", "no finite bound on z from the hypotheses; conclusions not evaluated"}}}});
  }
  for (const auto& e : entries) {
    out.check(e["name"].get<std::string>(), e["pass"].get<bool>(), e["margin"].get<double>(), e["details"]);
  }
  out.artifacts.push_back({"lemma_report.json", "json", dump_json(detail::checks_json(out.checks))});
  return out;
}

inline StageOutput kernel_stage(const RunConfig& cfg, const LemmaContext& ctx) {
  StageOutput out{"kernel", {}, {}};
  if (!ctx.kernel) {
    out.check("kernel_available", false, 0.0, {{"reason", "no finite bound on z from the hypotheses"}});
    out.artifacts.push_back({"kernel_report.json", "json", dump_json({{"checks", detail::checks_json(out.checks)}})});
    return out;
  }
  const auto& k = *ctx.kernel;
  auto oracle = z_ode_oracle(ctx.p, ctx.q, k.grid, cfg.kernel.oracle_tol);
  double diff = 0.0;
  double at = k.grid.front();
  for (std::size_t i = 0; i < k.grid.size(); ++i) {
    double d = std::abs(k.z[i] - oracle[i]);
    if (d > diff) diff = d, at = k.grid[i];
  }
  out.check("z_oracle_equivalence", diff <= cfg.kernel.oracle_gate, cfg.kernel.oracle_gate - diff,
            {{"sup_difference", diff}, {"at", at}, {"oracle_tol", cfg.kernel.oracle_tol}});
  auto r = ode_residual(k.grid, k.h, ctx.p, ctx.q, k.z);
  out.check("h_ode_residual", r.sup <= cfg.kernel.residual_gate, cfg.kernel.residual_gate - r.sup,
            {{"sup", r.sup}, {"identity_sup", r.identity_sup}});

  nlohmann::json report{{"checks", detail::checks_json(out.checks)},
                        {"s0", k.s0},
                        {"S", k.grid.back()},
                        {"nodes", k.grid.size()},
                        {"lambda", k.lambda},
                        {"z_sup_bound", k.z_sup_bound},
                        {"extension_end", k.extension_end},
                        {"tail_mean", k.tail_mean},
                        {"h_s0", k.h.front()}};
  out.artifacts.push_back({"kernel_report.json", "json", dump_json(report)});
  out.artifacts.push_back(
      {"kernels.csv", "csv", to_csv(detail::sampled_table({"s", "z", "h", "h_over_s"}, {&k.grid, &k.z, &k.h, &k.h_over_s}))});
  PlotOptions po;
  po.title = "kernel z(s)";
  po.x_label = "s";
  po.y_label = "z";
  out.artifacts.push_back({"z.svg", "svg", render_svg({{"z", k.grid, k.z}}, po)});
  return out;
}

inline StageOutput pair_stage(const RunConfig& cfg, const PairSpec& pair) {
  StageOutput out{"pair", {}, {}};
  const auto m = static_cast<std::size_t>(cfg.m_max);
  static const char* link_names[kChainLinks] = {"c1_above_band1_floor", "c1_below_band1_ceiling",
                                                "band1_ceiling_below_shifted", "shifted_below_band2_floor",
                                                "c2_above_band2_floor", "c2_below_band2_ceiling"};
  nlohmann::json chain = nlohmann::json::object();
  double chain_min = std::numeric_limits<double>::infinity();
  for (int l = 0; l < kChainLinks; ++l) {
    std::vector<double> v(pair.chain[static_cast<std::size_t>(l)].begin(),
                          pair.chain[static_cast<std::size_t>(l)].begin() + static_cast<std::ptrdiff_t>(m));
    for (double x : v) chain_min = std::min(chain_min, x);
    chain[link_names[l]] = v;
  }
  out.check("band_chain", chain_min >= 0.0, chain_min, {{"links", chain}});
  std::vector<double> dchain(pair.d_chain_margin.begin(), pair.d_chain_margin.begin() + static_cast<std::ptrdiff_t>(m));
  double dchain_min = *std::min_element(dchain.begin(), dchain.end());
  out.check("d_band_chain", dchain_min >= 0.0, dchain_min, {{"per_period_margin", dchain}});
  std::vector<double> order(pair.order_margin.begin(), pair.order_margin.begin() + static_cast<std::ptrdiff_t>(m));
  double order_min = *std::min_element(order.begin(), order.end());
  double d2_min = *std::min_element(pair.q2.d.begin(), pair.q2.d.begin() + static_cast<std::ptrdiff_t>(m));
  out.check("amplitude_order", order_min >= 0.0 && d2_min > 0.0, std::min(order_min, d2_min),
            {{"per_period_margin", order}, {"min_d2", d2_min}});
  out.check("smallness", pair.smallness < cfg.pair.params.q_plus, cfg.pair.params.q_plus - pair.smallness,
            {{"value", pair.smallness}, {"q_plus", cfg.pair.params.q_plus}});

  auto grid = detail::window_grid(pair.q1.params.s0, cfg.pair.order_periods, cfg.pair.order_step);
  auto ord = verify_pair(pair.q1, pair.q2, grid);
  nlohmann::json od{{"min_slack", ord.min_slack}, {"min_slack_at", ord.min_slack_at},
                    {"sign_logic_gap", ord.sign_logic_gap}, {"grid_points", grid.size()}};
  if (ord.first_violation) od["first_violation"] = *ord.first_violation;
  out.check("pointwise_order", ord.pass, ord.min_slack, od);

  nlohmann::json report{{"checks", detail::checks_json(out.checks)},
                        {"q1", to_json(pair.q1)},
                        {"q2", to_json(pair.q2)},
                        {"alpha_gap", cfg.pair.params.alpha_gap},
                        {"beta_gap", cfg.pair.params.beta_gap}};
  out.artifacts.push_back({"pair_report.json", "json", dump_json(report)});
  auto q1 = pair.q1.q.eval_grid(grid);
  auto q2 = pair.q2.q.eval_grid(grid);
  out.artifacts.push_back({"pair.csv", "csv", to_csv(detail::sampled_table({"s", "q1", "q2"}, {&grid, &q1, &q2}))});
  PlotOptions po;
  po.title = "ordered pair q1 <= q2";
  po.x_label = "s";
  po.y_label = "q";
  out.artifacts.push_back({"pair.svg", "svg", render_svg({{"q1", grid, q1}, {"q2", grid, q2}}, po)});
  return out;
}

inline StageOutput bridge_stage(const RunConfig& cfg, const BridgeContext& ctx) {
  StageOutput out{"bridge", {}, {}};
  const auto& br = cfg.bridge;
  const double s0 = cfg.example.s0;
  const double S = s0 + 2.0 * std::numbers::pi * br.periods;

  // Round trip through r for several dimensions.
  auto q = ctx.pair.q1.q_function();
  auto rt_grid = uniform_grid(s0, S, static_cast<std::size_t>(br.round_trip_points - 1));
  double scale = 0.0;
  for (double s : rt_grid) scale = std::max(scale, std::abs(q(s)));
  nlohmann::json per_n = nlohmann::json::object();
  double worst = 0.0;
  for (int n : br.round_trip_dims) {
    RadialMap map(n, br.R, s0);
    auto back = lift_a(map, push_a_from_q(map, q));
    double err = 0.0;
    for (double s : rt_grid) err = std::max(err, std::abs(back(s) - q(s)) / std::max(std::abs(q(s)), scale));
    per_n[std::to_string(n)] = err;
    worst = std::max(worst, err);
  }
  out.check("round_trip", worst <= br.round_trip_tol, br.round_trip_tol - worst,
            {{"max_rel_error", per_n}, {"points", rt_grid.size()}});
  {
    RadialMap three(3, br.R, s0);
    bool exact = true;
    for (double s : rt_grid) exact = exact && three.beta(s) == s && three.inverse(s) == s;
    out.check("beta_identity_n3", exact, 0.0);
  }

  auto ic = integral_conditions(ctx.problem, ctx.lifted, br.growth_T, ctx.pair.q2.sup_bound);
  out.check("g_moment_finite", ic.g_moment_finite, ic.g_moment_tail, {{"g_moment", ic.g_moment}});
  out.check("moment_identity", ic.identity_gap <= 1e-8, 1e-8 - ic.identity_gap, {{"gap", ic.identity_gap}});
  out.check("growth_unbounded", ic.growth_ok, std::min(ic.growth_slope1, ic.growth_slope2));
  out.check("weighted_convergent", ic.weighted_ok, 0.0);
  out.check("barrier_hypotheses", ctx.hyp1.ok() && ctx.hyp2.ok(), 0.0,
            {{"lambda", ctx.hyp1.lambda}, {"z_sup_bound_1", ctx.bounds1.z_sup_bound},
             {"z_sup_bound_2", ctx.bounds2.z_sup_bound}});

  auto grid = detail::window_grid(s0, br.periods, br.step);
  auto fine_grid = detail::window_grid(s0, br.periods, br.step / 2);
  auto fb = detail::launch(cfg.parallel, [&] { return barriers_on(ctx, grid); });
  auto ff = detail::launch(cfg.parallel, [&] {
    auto b = barriers_on(ctx, fine_grid);
    return subsuper_residual(b, ctx.problem, ctx.lifted, br.residual_tol);
  });
  auto b = fb.get();
  auto bc = check_barriers(b);
  out.check("barriers_ordered", bc.ordered && bc.positive, bc.min_gap, {{"min_v1", bc.min_v1}});
  auto rho = subsuper_residual(b, ctx.problem, ctx.lifted, br.residual_tol);
  auto rho_fine = ff.get();
  out.check("subsolution_sign", rho.sub_ok, rho.min_rho1 + br.residual_tol,
            {{"min_rho1", rho.min_rho1}, {"tol", br.residual_tol}, {"step", br.step}});
  out.check("supersolution_sign", rho.super_ok, br.residual_tol - rho.max_rho2,
            {{"max_rho2", rho.max_rho2}, {"tol", br.residual_tol}, {"step", br.step}});
  bool stable = rho.sub_ok == rho_fine.sub_ok && rho.super_ok == rho_fine.super_ok;
  out.check("refinement_stable", stable, 0.0,
            {{"min_rho1_half_step", rho_fine.min_rho1}, {"max_rho2_half_step", rho_fine.max_rho2}});

  nlohmann::json report{{"checks", detail::checks_json(out.checks)},
                        {"integral_conditions", to_json(ic)},
                        {"n", br.n},
                        {"R", br.R},
                        {"g", ctx.problem.g.to_string()},
                        {"f", ctx.problem.f.name()},
                        {"p_tail", {{"exponent", ctx.lifted.p_tail.exponent}, {"constant", ctx.lifted.p_tail.constant}}}};
  out.artifacts.push_back({"bridge_report.json", "json", dump_json(report)});

  std::vector<double> s(rho.s), r, v1, v2;
  for (std::size_t i = 1; i + 1 < b.h1.grid.size(); ++i) {
    r.push_back(b.map.beta(b.h1.grid[i]));
    v1.push_back(b.v1()[i]);
    v2.push_back(b.v2()[i]);
  }
  out.artifacts.push_back({"bridge.csv", "csv",
                           to_csv(detail::sampled_table({"s", "r", "v1", "v2", "rho1", "rho2"},
                                                        {&s, &r, &v1, &v2, &rho.rho1, &rho.rho2}))});
  PlotOptions po;
  po.title = "barriers v1 <= v2";
  po.x_label = "r";
  po.y_label = "v";
  po.log_x = po.log_y = true;
  out.artifacts.push_back({"barriers.svg", "svg", render_svg({{"v1", r, v1}, {"v2", r, v2}}, po)});
  return out;
}

inline StageOutput bvp_stage(const RunConfig& cfg, const BridgeContext& ctx) {
  StageOutput out{"bvp", {}, {}};
  const auto& bv = cfg.bvp;
  const double s0 = cfg.example.s0;
  auto grid = uniform_grid(s0, s0 + 2.0 * std::numbers::pi * bv.periods, bv.cells);
  auto barrier = barriers_on(ctx, grid);

  auto linear = detail::launch(cfg.parallel, [&] {
    BvpOptions o = bv.options;
    o.boundary = BoundaryTrace::lower;
    auto problem = ctx.problem;
    problem.f = Nonlinearity::lower();
    return solve_radial(problem, barrier, ctx.lifted, o);
  });
  auto sol = solve_radial(ctx.problem, barrier, ctx.lifted, bv.options);
  sol.sandwich_margins = check_sandwich(sol, barrier, bv.sandwich_tol);
  sol.decay_exponent = decay_fit(sol, ctx.problem, bv.decay_window, bv.boundary_layer);

  out.check("iterations", sol.iterations <= bv.iteration_gate, bv.iteration_gate - sol.iterations,
            {{"iterations", sol.iterations}, {"tol", bv.options.tol}, {"K_used", sol.K_used}});
  out.check("monotone", sol.monotone && sol.deltas_decreasing, 0.0,
            {{"deltas_decreasing", sol.deltas_decreasing}, {"initial_rise", sol.initial_rise}});
  double sandwich = std::min(sol.sandwich_margins.lower, sol.sandwich_margins.upper);
  out.check("sandwich", sol.sandwich_margins.pass, sandwich + bv.sandwich_tol,
            {{"lower", sol.sandwich_margins.lower}, {"upper", sol.sandwich_margins.upper}, {"tol", bv.sandwich_tol}});
  out.check("residual", sol.residual_sup <= 10.0 * bv.options.tol, 10.0 * bv.options.tol - sol.residual_sup,
            {{"sup", sol.residual_sup}});
  double slope = sol.decay_exponent;
  out.check("decay_exponent", slope >= bv.decay_lo && slope <= bv.decay_hi,
            std::min(slope - bv.decay_lo, bv.decay_hi - slope),
            {{"slope", slope}, {"expected", 2.0 - ctx.problem.n}, {"window", bv.decay_window}});

  auto lin = linear.get();
  std::size_t stop = static_cast<std::size_t>((1.0 - bv.boundary_layer) * static_cast<double>(grid.size()));
  double worst = 0.0;
  for (std::size_t i = 1; i < stop; ++i) {
    worst = std::max(worst, std::abs(lin.u_values[i] - barrier.h1.h[i]) / std::abs(barrier.h1.h[i]));
  }
  out.check("linear_oracle", worst <= bv.linear_oracle_tol, bv.linear_oracle_tol - worst,
            {{"max_rel_error", worst}, {"iterations", lin.iterations},
             {"second_delta", lin.iteration_sup_deltas.size() > 1 ? lin.iteration_sup_deltas[1] : 0.0}});

  nlohmann::json report = to_json(sol);
  report["checks"] = detail::checks_json(out.checks);
  out.artifacts.push_back({"bvp_summary.json", "json", dump_json(report)});

  auto r = barrier.radii();
  auto u = sol.u_over_s();
  out.artifacts.push_back({"bvp.csv", "csv",
                           to_csv(detail::sampled_table({"s", "r", "u", "v1", "v2", "residual"},
                                                        {&grid, &r, &u, &barrier.v1(), &barrier.v2(), &sol.residual}))});
  PlotOptions po;
  po.title = "solution between barriers";
  po.x_label = "r";
  po.y_label = "u";
  po.log_x = po.log_y = true;
  out.artifacts.push_back(
      {"bvp.svg", "svg", render_svg({{"u", r, u}, {"v1", r, barrier.v1()}, {"v2", r, barrier.v2()}}, po)});
  return out;
}

// ---------------------------------------------------------------------------
// Driver

struct RunResult {
  int exit_code = 0;
  std::vector<CheckRecord> checks;
  std::vector<std::filesystem::path> files;

  std::vector<CheckRecord> failures() const {
    std::vector<CheckRecord> f;
    for (const auto& c : checks) {
      if (!c.pass) f.push_back(c);
    }
    return f;
  }
};

inline std::vector<StageOutput> run_stages(const RunConfig& cfg) {
  using M = Mode;
  const auto mode = cfg.mode;
  const bool all = mode == M::full_pipeline;
  const bool par = cfg.parallel;
  std::vector<StageOutput> stages;

  std::future<StageOutput> example;
  if (all || mode == M::construct_example) example = detail::launch(par, [&] { return example_stage(cfg); });

  std::shared_future<LemmaContext> lemma_ctx;
  if (all || mode == M::verify_lemma || mode == M::compute_kernel) {
    lemma_ctx = detail::launch(par, [&] { return prepare_lemma(cfg); }).share();
  }
  std::future<StageOutput> lemma, kernel;
  if (all || mode == M::verify_lemma) lemma = detail::launch(par, [&] { return lemma_stage(cfg, lemma_ctx.get()); });
  if (all || mode == M::compute_kernel) kernel = detail::launch(par, [&] { return kernel_stage(cfg, lemma_ctx.get()); });

  std::optional<PairSpec> pair;
  if (all || mode == M::build_pair || mode == M::bridge || mode == M::solve_bvp) pair = build_pair(cfg.pair.params);
  std::future<StageOutput> pair_out;
  if (all || mode == M::build_pair) pair_out = detail::launch(par, [&] { return pair_stage(cfg, *pair); });

  std::optional<BridgeContext> bridge_ctx;
  std::future<StageOutput> bridge, bvp;
  if (all || mode == M::bridge || mode == M::solve_bvp) {
    bridge_ctx = prepare_bridge(cfg, *pair);
    if (all || mode == M::bridge) bridge = detail::launch(par, [&] { return bridge_stage(cfg, *bridge_ctx); });
    if (all || mode == M::solve_bvp) bvp = detail::launch(par, [&] { return bvp_stage(cfg, *bridge_ctx); });
  }

  // Collected in a fixed order whatever the scheduling was.
  for (auto* f : {&example, &lemma, &kernel, &pair_out, &bridge, &bvp}) {
    if (f->valid()) stages.push_back(f->get());
  }
  return stages;
}

inline RunResult run(const RunConfig& cfg) {
  RunResult result;
  auto stages = run_stages(cfg);
  std::filesystem::create_directories(cfg.out);
  for (const auto& st : stages) {
    for (const auto& c : st.checks) result.checks.push_back(c);
    for (const auto& a : st.artifacts) {
      if (!cfg.wants(a.format)) continue;
      auto path = cfg.out / a.file;
      write_text(path, a.content);
      result.files.push_back(path);
    }
  }
  auto failures = result.failures();
  auto failure_path = cfg.out / "failures.json";
  if (failures.empty()) {
    std::filesystem::remove(failure_path);
  } else {
    std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
      return std::tie(a.stage, a.name) < std::tie(b.stage, b.name);
    });
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : failures) {
      auto j = detail::check_json(f);
      j["stage"] = f.stage;
      arr.push_back(j);
    }
    write_text(failure_path, dump_json({{"mode", std::string(mode_name(cfg.mode))}, {"failures", arr}}));
    result.files.push_back(failure_path);
  }
  result.exit_code = failures.empty() ? 0 : 1;
  return result;
}

struct CliRequest {
  std::string mode;
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  bool parallel = false;
  std::optional<std::vector<std::string>> formats;
};

/// Exit status: 0 all checks pass, 1 some check fails, 2 bad configuration, 3 internal error.
inline int run_cli(const CliRequest& req, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(req.config, parse_mode(req.mode));
    if (req.out) cfg.out = *req.out;
    cfg.parallel = req.parallel;
    if (req.formats) {
      cfg.formats.clear();
      for (const auto& f : *req.formats) {
        if (f != "csv" && f != "json" && f != "svg") throw ConfigError("unknown output format '" + f + "'");
        cfg.formats.insert(f);
      }
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    err << "config error: expression: " << e.what() << '\n';
    return 2;
  } catch (const ConstraintError& e) {
    err << "config error: constraint violated: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  }

  try {
    auto result = run(cfg);
    auto checks = result.checks;
    std::sort(checks.begin(), checks.end(),
              [](const auto& a, const auto& b) { return std::tie(a.stage, a.name) < std::tie(b.stage, b.name); });
    std::size_t failed = 0;
    for (const auto& c : checks) {
      out << (c.pass ? "PASS " : "FAIL ") << c.stage << '.' << c.name << " margin=" << format_double(c.margin) << '\n';
      failed += c.pass ? 0 : 1;
    }
    out << checks.size() << " checks, " << failed << " failed; output in " << cfg.out.string() << '\n';
    return result.exit_code;
  } catch (const ConstraintError& e) {
    err << "constraint violated: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace oscillax

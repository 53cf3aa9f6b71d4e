#pragma once

/**
 * @file oscillation.hpp
 * @brief The oscillating forcing family on nodes a_m = m pi, and ordered pairs of it.
 *
 *     q(s) =  c_m sin^2 s  on [a_2m,   a_2m+1]
 *     q(s) = -d_m sin^2 s  on [a_2m+1, a_2m+2]
 *
 * with (pi/2) d_m in [q_minus, q_plus] and c_m in the band
 *
 *     d_m + gamma (q_plus/pi) I_m + eta 2^{1-m}/pi  <=  c_m
 *         <=  d_m + sigma (q_plus/pi) I_m + theta 2^{1-m}/pi,
 *
 * where I_m = int_{a_2m}^inf p. The builder takes d_m at the middle of its
 * band and c_m at the lower edge of its band, which makes the lobe balance
 * condition as tight as the constraints allow.
 *
 * q is tabulated well past the checked periods (to `extent`) so that kernels
 * and growth integrals can run beyond the verification window.
 */

#include <oscillax/error.hpp>
#include <oscillax/expr.hpp>
#include <oscillax/function.hpp>
#include <oscillax/lemma.hpp>
#include <oscillax/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace oscillax {

inline CoefficientExpr default_p(double mu = 1.0) {
  return CoefficientExpr::parse("mu/s^3", Bindings{{"mu", mu}}, Domain{0.0, std::numeric_limits<double>::infinity()});
}

struct OscillationParams {
  double q_minus = 1.0;
  double q_plus = 2.0;
  double gamma = 6.0;
  double sigma = 7.0;
  double eta = 0.0;
  double theta = 1.0;
  double s0 = 2.0 * std::numbers::pi;
  CoefficientExpr p = default_p();
  TailModel p_tail = TailModel::power(3.0, 1.0);
  int m_max = 25;
  double extent = 1.05e4;  // q is tabulated on [s0, a_{2T+2}] with a_{2T+2} >= extent

  void validate() const {
    if (!(0.0 < q_minus && q_minus < q_plus && std::isfinite(q_plus))) throw ConstraintError("0 < q_minus < q_plus");
    if (!(6.0 <= gamma && gamma < sigma && std::isfinite(sigma))) throw ConstraintError("6 <= gamma < sigma");
    if (!(0.0 <= eta && eta < theta && std::isfinite(theta))) throw ConstraintError("0 <= eta < theta");
    if (std::abs(s0 - 2.0 * std::numbers::pi) > 1e-12) throw ConstraintError("s0 = a_2 = 2 pi for nodes a_m = m pi");
    if (m_max < 2) throw ConstraintError("m_max >= 2");
  }
};

struct OscillationSpec {
  OscillationParams params;
  std::vector<double> nodes;  // a_k = k pi, k = 0..2T+2
  std::vector<double> c;      // c[m-1] = c_m, m = 1..T
  std::vector<double> d;
  std::vector<double> p_tails;  // I_m
  double lambda = 0.0;
  double sup_bound = 0.0;  // ((2 + sigma lambda) q_plus + theta) / pi
  CoefficientExpr q;

  int periods() const { return static_cast<int>(c.size()); }
  Function p_function() const { return Function(params.p); }
  Function q_function() const { return Function(q); }
};

namespace detail {

inline Expr sin_squared_times(double amplitude) {
  auto sin2 = Expr::binary(ExprKind::pow, Expr::call(ExprFunc::sin, Expr::variable()), Expr::number(2.0));
  return Expr::binary(ExprKind::mul, Expr::number(amplitude), sin2);
}

inline std::vector<double> lobe_nodes(int periods) {
  std::vector<double> a(static_cast<std::size_t>(2 * periods + 3));
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = static_cast<double>(k) * std::numbers::pi;
  return a;
}

/// I_m = int_{a_2m}^inf p for m = 1..periods.
inline std::vector<double> family_p_tails(const Function& p, const TailModel& model, std::span<const double> a,
                                          int periods) {
  std::vector<double> I(static_cast<std::size_t>(periods));
  auto end = static_cast<std::size_t>(2 * periods + 2);
  auto tail = integrate_tail(p, a[end], model, 1e-14);
  double acc = tail.value;
  for (int m = periods; m >= 1; --m) {
    auto k = static_cast<std::size_t>(2 * m);
    acc += integrate_finite(p, a[k], a[k + 2], 1e-16).value;
    I[static_cast<std::size_t>(m - 1)] = acc;
  }
  return I;
}

inline double two_pow_one_minus(int m) { return std::ldexp(1.0, 1 - m); }

/// rhs - lhs, with differences at the rounding level of the operands read as 0.
inline double link_margin(double lhs, double rhs) {
  double g = rhs - lhs;
  double floor = 8.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(lhs), std::abs(rhs));
  return std::abs(g) <= floor ? 0.0 : g;
}

inline CoefficientExpr assemble_q(std::span<const double> a, std::span<const double> c, std::span<const double> d) {
  std::vector<double> nodes(a.begin() + 2, a.end());
  std::vector<Expr> pieces;
  pieces.reserve(2 * c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    pieces.push_back(sin_squared_times(c[i]));
    pieces.push_back(sin_squared_times(-d[i]));
  }
  return CoefficientExpr::piecewise(std::move(nodes), std::move(pieces));
}

/// Value and one-sided slopes agree across every interior node.
inline void check_smooth_joins(const CoefficientExpr& q, double scale) {
  auto nodes = q.nodes();
  const double step = 1e-6;
  for (std::size_t k = 1; k + 1 < nodes.size(); ++k) {
    double s = nodes[k];
    double left = q.eval_piece(k - 1, s);
    double right = q.eval_piece(k, s);
    double dl = (left - q.eval_piece(k - 1, s - step)) / step;
    double dr = (q.eval_piece(k, s + step) - right) / step;
    if (std::abs(left - right) > 1e-12 * scale || std::abs(dl - dr) > 1e-5 * scale) {
      throw Error("q is not continuously differentiable at node " + std::to_string(k));
    }
  }
}

}  // namespace detail

inline OscillationSpec build_oscillation(const OscillationParams& params) {
  params.validate();
  using std::numbers::pi;
  OscillationSpec spec;
  spec.params = params;
  int periods = std::max(params.m_max, static_cast<int>(std::ceil(params.extent / (2.0 * pi))));
  spec.nodes = detail::lobe_nodes(periods);
  Function p(params.p);
  spec.p_tails = detail::family_p_tails(p, params.p_tail, spec.nodes, periods);
  spec.lambda = spec.p_tails.front();
  if (!(spec.lambda < 1.0)) throw ConstraintError("lambda = int p < 1");

  const double K = params.q_plus / pi;
  const double d_mid = (params.q_minus + params.q_plus) / pi;
  for (int m = 1; m <= periods; ++m) {
    double I = spec.p_tails[static_cast<std::size_t>(m - 1)];
    double J = detail::two_pow_one_minus(m) / pi;
    double lower = d_mid + params.gamma * K * I + params.eta * J;
    double upper = d_mid + params.sigma * K * I + params.theta * J;
    if (!(lower <= upper)) throw Error("empty c_m band at m = " + std::to_string(m));
    spec.d.push_back(d_mid);
    spec.c.push_back(lower);
  }
  spec.sup_bound = ((2.0 + params.sigma * spec.lambda) * params.q_plus + params.theta) / pi;
  spec.q = detail::assemble_q(spec.nodes, spec.c, spec.d);
  detail::check_smooth_joins(spec.q, spec.sup_bound);
  return spec;
}

/// Lemma options carrying the remainder bounds this family certifies.
inline LemmaOptions lemma_options_for(const OscillationSpec& spec, int m_max,
                                      EpsilonStrategy strategy = EpsilonStrategy::slack) {
  using std::numbers::pi;
  LemmaOptions o;
  o.epsilon = strategy;
  o.p_tail = spec.params.p_tail;
  if (strategy == EpsilonStrategy::slack) {
    // eps_m <= (sigma/2) q_plus I_m + theta 2^-m, and sum_{m > M} I_m <= (1/A) int_{a_2M}^inf (s - a_2M) p
    const double A = 2.0 * pi;
    double R = shifted_moment(spec.p_function(), spec.nodes[static_cast<std::size_t>(2 * m_max)], spec.params.p_tail,
                              1e-10) / A;
    o.epsilon_remainder = 0.5 * spec.params.sigma * spec.params.q_plus * R + spec.params.theta * std::ldexp(1.0, -m_max);
  }
  // c_m beyond the table is bounded by the upper edge of its band
  double beyond = 0.0;
  for (std::size_t m = static_cast<std::size_t>(m_max); m < spec.c.size(); ++m) beyond = std::max(beyond, spec.c[m]);
  double last_I = spec.p_tails.back();
  double edge = 2.0 * spec.params.q_plus / pi + spec.params.sigma * spec.params.q_plus / pi * last_I +
                spec.params.theta * detail::two_pow_one_minus(spec.periods() + 1) / pi;
  o.delta_beyond = 0.5 * pi * std::max(beyond, edge);
  return o;
}

// ---------------------------------------------------------------------------
// Ordered pairs

struct PairParams {
  double q_minus = 1.0;
  double q_plus = 2.0;
  double s0 = 2.0 * std::numbers::pi;
  CoefficientExpr p = default_p();
  TailModel p_tail = TailModel::power(3.0, 1.0);
  double gamma1 = 6.0, sigma1 = 7.0, eta1 = 0.0, theta1 = 1.0;
  double gamma2 = 8.0, sigma2 = 9.0, eta2 = 2.0, theta2 = 3.0;
  double alpha_gap = 0.5;
  double beta_gap = 0.5;
  int m_max = 25;
  double extent = 1.05e4;

  OscillationParams set(int i) const {
    OscillationParams o;
    o.q_minus = q_minus;
    o.q_plus = q_plus;
    o.s0 = s0;
    o.p = p;
    o.p_tail = p_tail;
    o.m_max = m_max;
    o.extent = extent;
    o.gamma = i == 1 ? gamma1 : gamma2;
    o.sigma = i == 1 ? sigma1 : sigma2;
    o.eta = i == 1 ? eta1 : eta2;
    o.theta = i == 1 ? theta1 : theta2;
    return o;
  }

  void validate() const {
    set(1).validate();
    set(2).validate();
    if (!(sigma1 < gamma2)) throw ConstraintError("sigma1 < gamma2");
    if (!(theta1 < eta2)) throw ConstraintError("theta1 < eta2");
    if (!(alpha_gap > 0.0 && alpha_gap < gamma2 - sigma1)) throw ConstraintError("0 < alpha_gap < gamma2 - sigma1");
    if (!(beta_gap > 0.0 && beta_gap < eta2 - theta1)) throw ConstraintError("0 < beta_gap < eta2 - theta1");
  }

  /// q_minus + (alpha_gap/2) q_plus lambda + beta_gap/2, required below q_plus.
  double smallness(double lambda) const { return q_minus + 0.5 * alpha_gap * q_plus * lambda + 0.5 * beta_gap; }
};

inline constexpr int kChainLinks = 6;

struct PairSpec {
  PairParams params;
  OscillationSpec q1;
  OscillationSpec q2;
  double smallness = 0.0;
  // chain[l][m-1]: margin of link l (lhs <= rhs reported as rhs - lhs) at period m
  std::array<std::vector<double>, kChainLinks> chain;
  std::vector<double> d_chain_margin;  // min over the d restrictions, per m
  std::vector<double> order_margin;    // min(c2-c1, c1-d1, d1-d2), per m
};

inline PairSpec build_pair(const PairParams& params) {
  params.validate();
  using std::numbers::pi;
  PairSpec pair;
  pair.params = params;

  // Start from the single-family builds to share nodes, p tails and lambda.
  auto base1 = params.set(1);
  auto base2 = params.set(2);
  int periods = std::max(params.m_max, static_cast<int>(std::ceil(params.extent / (2.0 * pi))));
  auto nodes = detail::lobe_nodes(periods);
  auto I = detail::family_p_tails(Function(params.p), params.p_tail, nodes, periods);
  double lambda = I.front();
  if (!(lambda < 1.0)) throw ConstraintError("lambda = int p < 1");
  pair.smallness = params.smallness(lambda);
  if (!(pair.smallness < params.q_plus)) {
    throw ConstraintError("q_minus + (alpha_gap/2) q_plus lambda + beta_gap/2 < q_plus");
  }

  const double K = params.q_plus / pi;
  const double d_floor = 2.0 / pi * params.q_minus;
  const double d_ceiling = 2.0 / pi * params.q_plus;
  std::vector<double> c1, d1, c2, d2;
  for (auto& v : pair.chain) v.resize(static_cast<std::size_t>(periods));
  for (int m = 1; m <= periods; ++m) {
    auto i = static_cast<std::size_t>(m - 1);
    double KI = K * I[i];
    double J = detail::two_pow_one_minus(m) / pi;
    double shift = params.alpha_gap * KI + params.beta_gap * J;
    double dd2 = d_floor;
    double dd1 = dd2 + shift;
    double cc1 = dd1 + params.gamma1 * KI + params.eta1 * J;
    double cc2 = dd2 + params.gamma2 * KI + params.eta2 * J;
    d1.push_back(dd1);
    d2.push_back(dd2);
    c1.push_back(cc1);
    c2.push_back(cc2);

    double upper1 = dd1 + params.sigma1 * KI + params.theta1 * J;
    double bridge = dd2 + shift + params.sigma1 * KI + params.theta1 * J;
    double lower2 = dd2 + params.gamma2 * KI + params.eta2 * J;
    double upper2 = dd2 + params.sigma2 * KI + params.theta2 * J;
    using detail::link_margin;
    pair.chain[0][i] = link_margin(dd1 + params.gamma1 * KI + params.eta1 * J, cc1);
    pair.chain[1][i] = link_margin(cc1, upper1);
    pair.chain[2][i] = link_margin(upper1, bridge);
    pair.chain[3][i] = link_margin(bridge, lower2);
    pair.chain[4][i] = link_margin(lower2, cc2);
    pair.chain[5][i] = link_margin(cc2, upper2);
    pair.d_chain_margin.push_back(std::min({link_margin(d_floor, dd1 - shift), link_margin(dd1 - shift, dd2),
                                            link_margin(dd2, dd1), link_margin(dd1, d_ceiling)}));
    pair.order_margin.push_back(std::min({link_margin(cc1, cc2), link_margin(dd1, cc1), link_margin(dd2, dd1)}));
  }
  for (int l = 0; l < kChainLinks; ++l) {
    for (int m = 1; m <= periods; ++m) {
      double v = pair.chain[static_cast<std::size_t>(l)][static_cast<std::size_t>(m - 1)];
      if (!(v >= 0.0)) {
        throw ConstraintError("amplitude chain violated at link " + std::to_string(l + 1) + ", m = " + std::to_string(m));
      }
    }
  }
  for (int m = 1; m <= periods; ++m) {
    auto i = static_cast<std::size_t>(m - 1);
    if (!(pair.d_chain_margin[i] >= 0.0) || !(pair.order_margin[i] >= 0.0) || !(d2[i] > 0.0)) {
      throw ConstraintError("amplitude ordering violated at m = " + std::to_string(m));
    }
  }

  auto finish = [&](OscillationSpec& spec, const OscillationParams& op, std::vector<double> c, std::vector<double> d) {
    spec.params = op;
    spec.nodes = nodes;
    spec.p_tails = I;
    spec.lambda = lambda;
    spec.c = std::move(c);
    spec.d = std::move(d);
    spec.sup_bound = ((2.0 + op.sigma * lambda) * op.q_plus + op.theta) / pi;
    spec.q = detail::assemble_q(spec.nodes, spec.c, spec.d);
    detail::check_smooth_joins(spec.q, spec.sup_bound);
  };
  finish(pair.q1, base1, std::move(c1), std::move(d1));
  finish(pair.q2, base2, std::move(c2), std::move(d2));
  return pair;
}

struct PairOrdering {
  bool pass = true;
  double min_slack = std::numeric_limits<double>::infinity();
  double min_slack_at = 0.0;
  std::optional<double> first_violation;  // s of the first point with q1 > q2
  double sign_logic_gap = 0.0;            // max |(q2 - q1) - predicted slack|
};

/// Pointwise q1 <= q2 on `grid`; both specs must share nodes.
inline PairOrdering verify_pair(const OscillationSpec& q1, const OscillationSpec& q2, std::span<const double> grid) {
  if (q1.nodes.size() != q2.nodes.size() || q1.nodes.empty() || q1.nodes[2] != q2.nodes[2]) {
    throw std::invalid_argument("verify_pair: specs must share nodes and s0");
  }
  PairOrdering r;
  // sin^2 at a floating-point node is O(eps^2), not 0; differences below this are rounding
  const double floor = 8.0 * std::numeric_limits<double>::epsilon() * std::max(q1.sup_bound, q2.sup_bound);
  for (double s : grid) {
    double a = q1.q(s);
    double b = q2.q(s);
    double slack = b - a;
    if (slack < r.min_slack) {
      r.min_slack = slack;
      r.min_slack_at = s;
    }
    if (slack < -floor && !r.first_violation) {
      r.first_violation = s;
      r.pass = false;
    }
    std::size_t piece = q1.q.piece_index(s);
    std::size_t m = piece / 2;
    double sn = std::sin(s);
    double predicted = piece % 2 == 0 ? (q2.c[m] - q1.c[m]) * sn * sn : (q1.d[m] - q2.d[m]) * sn * sn;
    r.sign_logic_gap = std::max(r.sign_logic_gap, std::abs(slack - predicted));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Integral features

struct FeatureReport {
  int M = 0;
  std::vector<double> partial_sums;  // int_{s0}^{a_2M+2} |q|/s, M = 1..M
  std::vector<double> lower_bounds;  // sum_{m<=M} d_m / (8(m+1))
  std::vector<double> harmonic_bounds;  // (q_minus/(4 pi)) sum_{m<=M} 1/(m+1)
  double dominance_margin = 0.0;     // min over M of partial - lower
  double log_slope = 0.0;            // least-squares c in partial ~ c ln M + b
  bool divergence_ok = false;

  double varsigma = 1.0;
  std::vector<double> truncations;   // T_k, doubling
  std::vector<double> weighted;      // int_{s0}^{T_k} |q|/s^{1+varsigma}
  std::vector<double> tail_bounds;   // sup_bound T_k^-varsigma / varsigma
  double cauchy_margin = 0.0;        // min over k of bound - |I(T_k+1) - I(T_k)|
  bool convergence_ok = false;
};

inline FeatureReport check_integral_features(const OscillationSpec& spec, double varsigma, int M) {
  if (!(varsigma > 0.0)) throw std::invalid_argument("varsigma must be positive");
  if (M < 2 || M > spec.periods()) throw std::invalid_argument("M must lie in [2, periods]");
  using std::numbers::pi;
  FeatureReport r;
  r.M = M;
  r.varsigma = varsigma;
  const auto& q = spec.q;
  auto abs_over_s = [&q](double s) { return std::abs(q(s)) / s; };

  double partial = 0.0;
  double lower = 0.0;
  double harmonic = 0.0;
  r.dominance_margin = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= M; ++m) {
    auto k = static_cast<std::size_t>(2 * m);
    partial += integrate_finite(abs_over_s, spec.nodes[k], spec.nodes[k + 1], 1e-14).value;
    partial += integrate_finite(abs_over_s, spec.nodes[k + 1], spec.nodes[k + 2], 1e-14).value;
    lower += spec.d[static_cast<std::size_t>(m - 1)] / (8.0 * (m + 1));
    harmonic += spec.params.q_minus / (4.0 * pi) / (m + 1);
    r.partial_sums.push_back(partial);
    r.lower_bounds.push_back(lower);
    r.harmonic_bounds.push_back(harmonic);
    r.dominance_margin = std::min({r.dominance_margin, partial - lower, lower - harmonic});
  }
  // least-squares slope against ln M
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int m = 1; m <= M; ++m) {
    double x = std::log(static_cast<double>(m));
    double y = r.partial_sums[static_cast<std::size_t>(m - 1)];
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double n = M;
  r.log_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  r.divergence_ok = r.dominance_margin >= 0.0 && r.log_slope > 0.0;

  auto weighted = [&q, varsigma](double s) { return std::abs(q(s)) / std::pow(s, 1.0 + varsigma); };
  double T = spec.nodes[static_cast<std::size_t>(2 * M + 2)];
  double end = q.domain().hi;
  double acc = 0.0;
  double from = spec.nodes[2];
  while (T <= end) {
    acc += integrate_finite(Function(weighted, std::vector<double>(q.nodes().begin(), q.nodes().end())), from, T, 1e-13)
               .value;
    r.truncations.push_back(T);
    r.weighted.push_back(acc);
    r.tail_bounds.push_back(spec.sup_bound * std::pow(T, -varsigma) / varsigma);
    from = T;
    T *= 2.0;
  }
  r.cauchy_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < r.weighted.size(); ++k) {
    r.cauchy_margin = std::min(r.cauchy_margin, r.tail_bounds[k] - std::abs(r.weighted[k + 1] - r.weighted[k]));
  }
  r.convergence_ok = r.weighted.size() >= 2 && r.cauchy_margin >= 0.0;
  return r;
}

struct LobeIdentity {
  std::vector<double> positive;  // int over (a_2m, a_2m+1) of q
  std::vector<double> negative;  // int over (a_2m+1, a_2m+2) of |q|
  double max_rel_error = 0.0;    // against (pi/2) c_m and (pi/2) d_m
};

inline LobeIdentity lobe_identities(const OscillationSpec& spec, int m_max, double tol = 1e-14) {
  using std::numbers::pi;
  if (m_max < 1 || m_max > spec.periods()) throw std::invalid_argument("lobe_identities: m_max out of range");
  LobeIdentity r;
  auto q = spec.q_function();
  auto abs_q = [&q](double s) { return std::abs(q(s)); };
  for (int m = 1; m <= m_max; ++m) {
    auto k = static_cast<std::size_t>(2 * m);
    auto i = static_cast<std::size_t>(m - 1);
    r.positive.push_back(integrate_finite(q, spec.nodes[k], spec.nodes[k + 1], tol).value);
    r.negative.push_back(integrate_finite(abs_q, spec.nodes[k + 1], spec.nodes[k + 2], tol).value);
    double c = pi / 2 * spec.c[i], d = pi / 2 * spec.d[i];
    r.max_rel_error = std::max({r.max_rel_error, std::abs(r.positive.back() - c) / c, std::abs(r.negative.back() - d) / d});
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const OscillationParams& p) {
  return {{"q_minus", p.q_minus}, {"q_plus", p.q_plus}, {"gamma", p.gamma}, {"sigma", p.sigma}, {"eta", p.eta},
          {"theta", p.theta},     {"s0", p.s0},         {"p", p.p.to_string()}, {"m_max", p.m_max}};
}

/// Parameters plus the explicit amplitudes for the checked periods.
inline nlohmann::json to_json(const OscillationSpec& spec) {
  auto m = static_cast<std::ptrdiff_t>(std::min(spec.params.m_max, spec.periods()));
  return {{"params", to_json(spec.params)},
          {"c", std::vector<double>(spec.c.begin(), spec.c.begin() + m)},
          {"d", std::vector<double>(spec.d.begin(), spec.d.begin() + m)},
          {"lambda", spec.lambda},
          {"sup_bound", spec.sup_bound}};
}

}  // namespace oscillax

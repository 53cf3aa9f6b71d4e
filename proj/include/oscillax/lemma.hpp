#pragma once

/**
 * @file lemma.hpp
 * @brief Numerical verification of the sufficient conditions for a negative,
 * bounded kernel z (and hence a positive bounded h), with margins.
 *
 * Node convention: nodes[k] = a_k. Positive lobes are (a_{2m}, a_{2m+1}),
 * negative lobes (a_{2m+1}, a_{2m+2}), m = 1..m_max, and s0 = a_2.
 */

#include <oscillax/error.hpp>
#include <oscillax/function.hpp>
#include <oscillax/kernel.hpp>
#include <oscillax/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oscillax {

enum class Verdict { pass, fail, inconclusive };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass:
      return "pass";
    case Verdict::fail:
      return "fail";
    case Verdict::inconclusive:
      return "inconclusive";
  }
  return "fail";
}

/// A margin m is a pass when m > threshold, inconclusive in [0, threshold], fail below.
inline Verdict strict_verdict(double margin, double threshold) {
  if (!std::isfinite(margin) || margin < 0.0) return Verdict::fail;
  if (margin <= threshold) return Verdict::inconclusive;
  return Verdict::pass;
}

inline Verdict weak_verdict(double margin) {
  return (std::isfinite(margin) && margin >= 0.0) ? Verdict::pass : Verdict::fail;
}

struct Check {
  Verdict verdict = Verdict::fail;
  double margin = 0.0;
  bool ok() const { return verdict == Verdict::pass; }
};

enum class EpsilonStrategy { slack, positive_lobe };

struct LemmaOptions {
  EpsilonStrategy epsilon = EpsilonStrategy::slack;
  double strict_threshold = 1e-12;
  int sign_samples = 64;
  double lobe_tol = 1e-13;
  double tail_tol = 1e-12;
  TailModel p_tail = TailModel::power(3.0, 1.0);
  // Bound on sum_{m > m_max} eps_m, when the caller can certify one.
  std::optional<double> epsilon_remainder;
  // Bound on the positive-lobe integrals beyond m_max.
  std::optional<double> delta_beyond;
};

struct HypothesisReport {
  int m_max = 0;
  double lambda = 0.0;
  double lambda_upper = 0.0;  // value plus quadrature error and tail bound
  Check lambda_check;
  std::vector<double> positive_lobes;  // int over (a_2m, a_2m+1) of q
  std::vector<double> negative_lobes;  // int over (a_2m+1, a_2m+2) of |q|
  std::vector<double> p_tails;         // I_m = int_{a_2m}^inf p
  std::vector<double> sign_margins;    // per lobe pair, min over samples of +-q
  Check sign_pattern;
  std::vector<double> hyp1_margins;
  Check hyp1;
  std::vector<double> epsilons;
  std::vector<double> hyp2_margins;
  double epsilon_partial = 0.0;
  double epsilon_remainder = 0.0;
  bool remainder_certified = false;
  double epsilon = 0.0;
  Check hyp2;
  double delta = 0.0;
  Check hyp3;

  bool ok() const { return lambda_check.ok() && sign_pattern.ok() && hyp1.ok() && hyp2.ok() && hyp3.ok(); }
  /// Bound on sup |z| delivered by the proof: (eps + delta) e^lambda.
  double z_sup_bound() const { return (epsilon + delta) * std::exp(lambda_upper); }
};

namespace detail {

inline void require_nodes(std::span<const double> nodes, int m_max) {
  if (m_max < 1) throw std::invalid_argument("m_max must be at least 1");
  auto need = static_cast<std::size_t>(2 * m_max + 3);
  if (nodes.size() < need) {
    throw std::invalid_argument("node sequence too short: need a_0..a_" + std::to_string(need - 1));
  }
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    if (!(nodes[k] > nodes[k - 1])) throw GridError("node sequence not increasing", k);
  }
}

/// I_m for m = 1..m_max (index m-1) by backward recursion from a tail integral.
inline std::vector<double> p_tails(const Function& p, std::span<const double> nodes, int m_max, const TailModel& model,
                                   double tol) {
  std::vector<double> I(static_cast<std::size_t>(m_max));
  auto far = static_cast<std::size_t>(2 * m_max + 2);
  auto tail = integrate_tail(p, nodes[far], model, tol);
  double acc = tail.value + tail.tail_bound;
  for (int m = m_max; m >= 1; --m) {
    auto lo = static_cast<std::size_t>(2 * m);
    acc += integrate_finite(p, nodes[lo], nodes[lo + 2], 1e-15).value;
    I[static_cast<std::size_t>(m - 1)] = acc;
  }
  return I;
}

}  // namespace detail

inline HypothesisReport check_hypotheses(const Function& p, const Function& q, std::span<const double> nodes,
                                         int m_max, const LemmaOptions& options = {}) {
  detail::require_nodes(nodes, m_max);
  HypothesisReport r;
  r.m_max = m_max;
  const double s0 = nodes[2];

  auto lam = integrate_tail(p, s0, options.p_tail, 1e-3 * options.tail_tol);
  r.lambda = lam.value;
  r.lambda_upper = lam.value + lam.abs_error_estimate + lam.tail_bound;
  r.lambda_check = {lam.value >= 0.0 ? strict_verdict(1.0 - r.lambda_upper, 0.0) : Verdict::fail, 1.0 - r.lambda_upper};

  r.p_tails = detail::p_tails(p, nodes, m_max, options.p_tail, options.tail_tol);
  auto abs_q = [&q](double s) { return std::abs(q(s)); };

  double sign_min = std::numeric_limits<double>::infinity();
  double hyp1_min = std::numeric_limits<double>::infinity();
  double hyp2_min = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= m_max; ++m) {
    auto k = static_cast<std::size_t>(2 * m);
    double a0 = nodes[k];
    double a1 = nodes[k + 1];
    double a2 = nodes[k + 2];
    double pos = integrate_finite(q, a0, a1, options.lobe_tol).value;
    double neg = integrate_finite(abs_q, a1, a2, options.lobe_tol, q.breakpoints_in(a1, a2)).value;
    r.positive_lobes.push_back(pos);
    r.negative_lobes.push_back(neg);

    double margin = std::numeric_limits<double>::infinity();
    const int n = options.sign_samples;
    for (int j = 0; j < n; ++j) {
      double t = (j + 1.0) / (n + 1.0);
      margin = std::min(margin, q(a0 + t * (a1 - a0)));
      margin = std::min(margin, -q(a1 + t * (a2 - a1)));
    }
    r.sign_margins.push_back(margin);
    sign_min = std::min(sign_min, margin);

    double I = r.p_tails[static_cast<std::size_t>(m - 1)];
    double h1 = pos - (1.0 + 3.0 * I) * neg;
    r.hyp1_margins.push_back(h1);
    hyp1_min = std::min(hyp1_min, h1);

    double eps = options.epsilon == EpsilonStrategy::slack ? std::max(0.0, pos - neg) : pos;
    r.epsilons.push_back(eps);
    double h2 = eps + neg - pos;
    r.hyp2_margins.push_back(h2);
    hyp2_min = std::min(hyp2_min, h2);
    r.epsilon_partial += eps;
    r.delta = std::max(r.delta, pos);
  }
  r.sign_pattern = {strict_verdict(sign_min, options.strict_threshold), sign_min};
  r.hyp1 = {weak_verdict(hyp1_min), hyp1_min};

  r.remainder_certified = options.epsilon_remainder.has_value();
  r.epsilon_remainder = options.epsilon_remainder.value_or(0.0);
  r.epsilon = r.epsilon_partial + r.epsilon_remainder;
  Verdict v2 = weak_verdict(hyp2_min);
  if (v2 == Verdict::pass && !(std::isfinite(r.epsilon) && r.remainder_certified)) v2 = Verdict::inconclusive;
  r.hyp2 = {v2, hyp2_min};

  if (options.delta_beyond) r.delta = std::max(r.delta, *options.delta_beyond);
  r.hyp3 = {std::isfinite(r.delta) ? Verdict::pass : Verdict::fail, r.delta};
  return r;
}

struct PeriodPeak {
  int m = 0;
  double s = 0.0;
  double z = 0.0;
};

struct ConclusionOptions {
  double strict_threshold = 1e-12;
  double negativity_offset = 0.0;  // z < 0 is required for s > s0 + offset
  std::vector<double> nodes;       // optional; enables the per-period argmax diagnostic
};

struct ConclusionReport {
  Check z_negative;
  Check z_bounded;
  Check h_positive;
  Check h_over_s_decreasing;
  Check h_bounded;
  bool decreasing_agrees = true;  // difference test and sign-of-z test agree
  double sup_abs_z = 0.0;
  double sup_h = 0.0;
  double z_sup_bound = 0.0;
  std::vector<PeriodPeak> peaks;

  bool ok() const {
    return z_negative.ok() && z_bounded.ok() && h_positive.ok() && h_over_s_decreasing.ok() && h_bounded.ok();
  }
};

inline ConclusionReport check_conclusions(const KernelPair& k, const ConclusionOptions& options = {}) {
  const auto& s = k.grid;
  if (s.size() < 2 || k.z.size() != s.size() || k.h.size() != s.size() || k.h_over_s.size() != s.size()) {
    throw std::invalid_argument("check_conclusions: malformed kernel");
  }
  if (!options.nodes.empty()) {
    if (options.nodes.size() < 3 || std::abs(options.nodes[2] - s.front()) > 1e-12 * std::max(1.0, std::abs(s.front()))) {
      throw std::invalid_argument("check_conclusions: kernel grid does not start at a_2");
    }
  }
  ConclusionReport r;
  r.z_sup_bound = k.z_sup_bound;

  double z_max = -std::numeric_limits<double>::infinity();
  bool all_negative = true;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (!(k.z[i] < 0.0)) all_negative = false;
    if (s[i] > s.front() + options.negativity_offset) z_max = std::max(z_max, k.z[i]);
    r.sup_abs_z = std::max(r.sup_abs_z, std::abs(k.z[i]));
  }
  r.z_negative = {strict_verdict(-z_max, options.strict_threshold), -z_max};
  double bound_margin = k.z_sup_bound - r.sup_abs_z;
  r.z_bounded = {strict_verdict(bound_margin, 0.0), bound_margin};

  double h_min = std::numeric_limits<double>::infinity();
  for (double v : k.h) {
    h_min = std::min(h_min, v);
    r.sup_h = std::max(r.sup_h, v);
  }
  r.h_positive = {strict_verdict(h_min, 0.0), h_min};

  double drop = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < s.size(); ++i) drop = std::min(drop, k.h_over_s[i - 1] - k.h_over_s[i]);
  Verdict by_difference = strict_verdict(drop, 0.0);
  r.decreasing_agrees = (by_difference == Verdict::pass) == all_negative;
  r.h_over_s_decreasing = {r.decreasing_agrees ? by_difference : Verdict::fail, drop};

  // h(s) = -s int_s^inf z/t^2 <= sup|z|, so the certified ceiling is the z bound
  double tail = k.h_tail_bound.empty() ? 0.0 : *std::max_element(k.h_tail_bound.begin(), k.h_tail_bound.end());
  double h_margin = k.z_sup_bound + tail - r.sup_h;
  r.h_bounded = {std::isfinite(r.sup_h) ? weak_verdict(h_margin) : Verdict::fail, h_margin};

  const auto& a = options.nodes;
  for (std::size_t m = 1; 2 * m + 2 < a.size(); ++m) {
    double lo = a[2 * m];
    double hi = a[2 * m + 2];
    if (hi > s.back()) break;
    auto first = std::lower_bound(s.begin(), s.end(), lo);
    auto last = std::upper_bound(s.begin(), s.end(), hi);
    PeriodPeak peak{static_cast<int>(m), lo, -std::numeric_limits<double>::infinity()};
    if (first == s.begin()) ++first;  // z(s0) = 0 by construction
    for (auto it = first; it != last; ++it) {
      auto i = static_cast<std::size_t>(it - s.begin());
      if (k.z[i] > peak.z) peak = {static_cast<int>(m), *it, k.z[i]};
    }
    if (first != last) r.peaks.push_back(peak);
  }
  return r;
}

struct RemarkReport {
  double A = 0.0;
  double p_moment = 0.0;     // int_{s0}^inf (s - s0) p
  double tail_sum = 0.0;     // sum_{m <= m_max} I_m
  double chain_sum = 0.0;    // sum_{2 <= m <= m_max} I_m
  double tail_remainder = 0.0;  // bound on sum_{m > m_max} I_m
  double budget = 0.0;       // eps / q_minus
  Check sum;                 // tail_sum + remainder <= eps / q_minus
  Check chain;               // A * chain_sum <= p_moment
};

/// (1/A) int_{a}^inf (s - a) p, a bound on sum over later periods of int_{a_2m}^inf p.
inline double shifted_moment(const Function& p, double a, const TailModel& model, double tol) {
  auto f = [&p, a](double s) { return (s - a) * p(s); };
  auto r = integrate_tail(f, a, model.first_moment(), tol, p.breakpoints());
  return r.value + r.abs_error_estimate + r.tail_bound;
}

inline RemarkReport check_remark(const Function& p, std::span<const double> nodes, int m_max, double q_minus,
                                 double epsilon, const LemmaOptions& options = {}) {
  if (!(q_minus > 0.0)) throw std::invalid_argument("check_remark: q_minus must be positive");
  detail::require_nodes(nodes, m_max);
  RemarkReport r;
  r.A = std::numeric_limits<double>::infinity();
  for (int m = 1; m <= m_max; ++m) {
    auto k = static_cast<std::size_t>(2 * m);
    r.A = std::min(r.A, nodes[k + 2] - nodes[k]);
  }
  const double moment_tol = 1e-10;
  r.p_moment = shifted_moment(p, nodes[2], options.p_tail, moment_tol);
  auto I = detail::p_tails(p, nodes, m_max, options.p_tail, options.tail_tol);
  for (double v : I) r.tail_sum += v;
  r.chain_sum = r.tail_sum - I.front();
  r.tail_remainder = shifted_moment(p, nodes[static_cast<std::size_t>(2 * m_max)], options.p_tail, moment_tol) / r.A;
  r.budget = epsilon / q_minus;
  double sum_margin = r.budget - (r.tail_sum + r.tail_remainder);
  r.sum = {weak_verdict(sum_margin), sum_margin};
  // the moment bounds periods from the second one on: each I_m, m >= 2, is dominated over [a_2m-2, a_2m]
  double chain_margin = r.p_moment - r.A * r.chain_sum;
  r.chain = {weak_verdict(chain_margin + 1e-12 * std::max(1.0, r.p_moment)), chain_margin};
  return r;
}

struct LemmaReport {
  std::optional<HypothesisReport> hypotheses;
  std::optional<ConclusionReport> conclusions;
  std::optional<RemarkReport> remark;

  bool ok() const {
    return (!hypotheses || hypotheses->ok()) && (!conclusions || conclusions->ok()) &&
           (!remark || (remark->sum.ok() && remark->chain.ok()));
  }
};

namespace detail {

inline nlohmann::json entry(const std::string& name, const Check& c, nlohmann::json details = nlohmann::json::object()) {
  details["verdict"] = to_string(c.verdict);
  return {{"name", name}, {"pass", c.ok()}, {"margin", c.margin}, {"details", std::move(details)}};
}

}  // namespace detail

/// One {name, pass, margin, details} entry per hypothesis and conclusion.
inline nlohmann::json to_json(const LemmaReport& report) {
  using nlohmann::json;
  json entries = json::array();
  if (const auto& h = report.hypotheses) {
    entries.push_back(detail::entry("lambda_below_one", h->lambda_check,
                                    {{"lambda", h->lambda}, {"lambda_upper", h->lambda_upper}}));
    entries.push_back(detail::entry("sign_pattern", h->sign_pattern, {{"per_period_margin", h->sign_margins}}));
    entries.push_back(detail::entry("lobe_balance", h->hyp1,
                                    {{"per_period_margin", h->hyp1_margins},
                                     {"positive_lobes", h->positive_lobes},
                                     {"negative_lobes", h->negative_lobes},
                                     {"p_tails", h->p_tails}}));
    entries.push_back(detail::entry("epsilon_summable", h->hyp2,
                                    {{"epsilons", h->epsilons},
                                     {"epsilon", h->epsilon},
                                     {"epsilon_partial", h->epsilon_partial},
                                     {"epsilon_remainder", h->epsilon_remainder},
                                     {"remainder_certified", h->remainder_certified}}));
    entries.push_back(detail::entry("delta_finite", h->hyp3, {{"delta", h->delta}}));
  }
  if (const auto& c = report.conclusions) {
    json peaks = json::array();
    for (const auto& pk : c->peaks) peaks.push_back({{"m", pk.m}, {"s", pk.s}, {"z", pk.z}});
    entries.push_back(detail::entry("z_negative", c->z_negative, {{"period_peaks", peaks}}));
    entries.push_back(detail::entry("z_bounded", c->z_bounded,
                                    {{"sup_abs_z", c->sup_abs_z}, {"z_sup_bound", c->z_sup_bound}}));
    entries.push_back(detail::entry("h_positive", c->h_positive));
    entries.push_back(detail::entry("h_over_s_decreasing", c->h_over_s_decreasing,
                                    {{"agrees_with_sign_of_z", c->decreasing_agrees}}));
    entries.push_back(detail::entry("h_bounded", c->h_bounded, {{"sup_h", c->sup_h}}));
  }
  if (const auto& r = report.remark) {
    entries.push_back(detail::entry("p_tail_sum", r->sum,
                                    {{"A", r->A},
                                     {"tail_sum", r->tail_sum},
                                     {"tail_remainder", r->tail_remainder},
                                     {"budget", r->budget}}));
    entries.push_back(detail::entry("p_moment_chain", r->chain, {{"A", r->A}, {"p_moment", r->p_moment}, {"chain_sum", r->chain_sum}}));
  }
  return entries;
}

}  // namespace oscillax

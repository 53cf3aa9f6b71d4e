#pragma once

/**
 * @file bridge.hpp
 * @brief Change of variables between the radial exterior problem
 *
 *     Delta v + f(x, v) + g(|x|) x . grad v = 0,   |x| > R,  x in R^n,
 *
 * and the comparison equation in s, via |x| = beta(s) = (s/(n-2))^{1/(n-2)}
 * and v(x) = h(s)/s. Under this map
 *
 *     p(s)   = beta beta' g(beta),
 *     q_i(s) = (s/(n-2)) beta beta' a_i(beta),
 *
 * and the PDE operator equals (n-2)/(beta beta') times
 *
 *     h'' + p (h' - h/s) + (beta beta'/(n-2)) f(beta, h/s).
 *
 * With beta^{n-2} = s/(n-2) one has beta' = beta^{3-n}/(n-2)^2 and
 * beta beta' = beta^{4-n}/(n-2)^2; both are evaluated in closed form.
 */

#include <oscillax/error.hpp>
#include <oscillax/expr.hpp>
#include <oscillax/function.hpp>
#include <oscillax/kernel.hpp>
#include <oscillax/quadrature.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oscillax {

class RadialMap {
 public:
  RadialMap(int n, double R, double s0) : n_(n), R_(R), s0_(s0) {
    if (n < 3) throw ConstraintError("n >= 3");
    if (!(R > 0.0)) throw ConstraintError("R > 0");
    if (!(s0 > (n - 2) * std::pow(R, n - 2))) throw ConstraintError("s0 > (n-2) R^(n-2)");
  }

  int n() const noexcept { return n_; }
  double R() const noexcept { return R_; }
  double s0() const noexcept { return s0_; }
  double r0() const { return beta_unchecked(s0_); }

  double beta(double s) const {
    if (s < s0_) throw DomainError("s below s0");
    return beta_unchecked(s);
  }

  double inverse(double r) const {
    if (r < r0()) throw DomainError("r below beta(s0)");
    return inverse_unchecked(r);
  }

  double beta_prime(double s) const {
    double b = beta(s);
    return std::pow(b, 3 - n_) / sq(n_ - 2);
  }

  /// beta(s) beta'(s) = beta^{4-n}/(n-2)^2.
  double beta_beta_prime(double s) const {
    double b = beta(s);
    return std::pow(b, 4 - n_) / sq(n_ - 2);
  }

  /// (s/(n-2)) beta beta' = beta^{n-1} beta'.
  double q_factor(double s) const { return s / (n_ - 2) * beta_beta_prime(s); }

  double beta_unchecked(double s) const {
    switch (n_) {
      case 3:
        return s;
      case 4:
        return std::sqrt(s / 2.0);
      default:
        return std::pow(s / (n_ - 2), 1.0 / (n_ - 2));
    }
  }

  double inverse_unchecked(double r) const {
    switch (n_) {
      case 3:
        return r;
      case 4:
        return 2.0 * r * r;
      default:
        return (n_ - 2) * std::pow(r, n_ - 2);
    }
  }

 private:
  static double sq(int k) { return static_cast<double>(k) * static_cast<double>(k); }

  int n_;
  double R_;
  double s0_;
};

/// g(r) <= constant * r^-exponent for r >= R.
struct PowerEnvelope {
  double constant = 1.0;
  double exponent = 4.0;
};

/// How f depends on u inside the ribbon [h1/s, h2/s].
struct Nonlinearity {
  enum class Kind { lower, upper, blend, custom };
  Kind kind = Kind::blend;
  // custom: f(r, u, a1(r), a2(r), ribbon_lo, ribbon_hi) and its u-derivative
  std::function<double(double, double, double, double, double, double)> custom;
  std::function<double(double, double, double, double, double, double)> custom_du;

  static Nonlinearity lower() { return {Kind::lower, {}, {}}; }
  static Nonlinearity upper() { return {Kind::upper, {}, {}}; }
  static Nonlinearity blend() { return {Kind::blend, {}, {}}; }

  double operator()(double r, double u, double a1, double a2, double lo, double hi) const {
    switch (kind) {
      case Kind::lower:
        return a1;
      case Kind::upper:
        return a2;
      case Kind::blend: {
        double mid = 0.5 * (lo + hi);
        double w = 0.25 * (hi - lo);
        double t = w > 0.0 ? std::tanh((u - mid) / w) : (u > mid ? 1.0 : (u < mid ? -1.0 : 0.0));
        return 0.5 * (a1 + a2) + 0.5 * (a2 - a1) * t;
      }
      case Kind::custom:
        return custom(r, u, a1, a2, lo, hi);
    }
    return a1;
  }

  double du(double r, double u, double a1, double a2, double lo, double hi) const {
    switch (kind) {
      case Kind::lower:
      case Kind::upper:
        return 0.0;
      case Kind::blend: {
        double w = 0.25 * (hi - lo);
        if (!(w > 0.0)) return 0.0;
        double c = std::cosh((u - 0.5 * (lo + hi)) / w);
        return 0.5 * (a2 - a1) / (w * c * c);
      }
      case Kind::custom:
        if (custom_du) return custom_du(r, u, a1, a2, lo, hi);
        {
          double step = 1e-7 * std::max(1.0, std::abs(u));
          return (custom(r, u + step, a1, a2, lo, hi) - custom(r, u - step, a1, a2, lo, hi)) / (2 * step);
        }
    }
    return 0.0;
  }

  const char* name() const {
    switch (kind) {
      case Kind::lower:
        return "lower";
      case Kind::upper:
        return "upper";
      case Kind::blend:
        return "blend";
      case Kind::custom:
        return "custom";
    }
    return "custom";
  }
};

struct RadialProblem {
  int n = 3;
  double R = 1.0;
  double s0 = 2.0 * std::numbers::pi;
  CoefficientExpr g = CoefficientExpr::parse("1/r^4");
  PowerEnvelope g_envelope;
  Function a1;  // functions of r on [beta(s0), inf)
  Function a2;
  Nonlinearity f = Nonlinearity::blend();
  double varsigma = 1.0;

  RadialMap map() const { return RadialMap(n, R, s0); }
};

inline constexpr double kRibbonGuard = 1e-12;

// ---------------------------------------------------------------------------
// Coefficient lift and push

struct LiftedCoefficients {
  Function p;
  Function q1;
  Function q2;
  TailModel p_tail;
};

namespace detail {

inline std::vector<double> map_breakpoints(std::span<const double> bp, const std::function<double(double)>& to) {
  std::vector<double> out;
  out.reserve(bp.size());
  for (double b : bp) out.push_back(to(b));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline Domain map_domain(const Domain& d, const std::function<double(double)>& to, double floor) {
  double lo = std::max(d.lo, floor);
  return Domain{to(lo), std::isfinite(d.hi) ? to(d.hi) : d.hi};
}

}  // namespace detail

/// Envelope of p implied by g <= C r^-k: p <= C (n-2)^{(k+n-4)/(n-2) - 2} s^{-(k+n-4)/(n-2)}.
inline TailModel lifted_p_tail(const RadialMap& map, const PowerEnvelope& g) {
  double m = map.n() - 2.0;
  double exponent = (g.exponent + map.n() - 4.0) / m;
  double constant = g.constant * std::pow(m, exponent - 2.0);
  return TailModel::power(exponent, constant, map.s0());
}

/// q(s) = beta^{n-1} beta' a(beta(s)), i.e. the coefficient a of r seen in s.
inline Function lift_a(const RadialMap& map, const Function& a) {
  auto to_s = [map](double r) { return map.inverse_unchecked(r); };
  return Function([map, a](double s) { return map.q_factor(s) * a(map.beta(s)); },
                  detail::map_breakpoints(a.breakpoints(), to_s), detail::map_domain(a.domain(), to_s, map.r0()));
}

/// a(r) = q(s) / (beta^{n-1} beta') at s = beta^{-1}(r).
inline Function push_a_from_q(const RadialMap& map, const Function& q) {
  auto to_r = [map](double s) { return map.beta_unchecked(s); };
  return Function(
      [map, q](double r) {
        // beta^{-1}(beta(s)) can land an ulp outside the domain of q
        double s = std::clamp(map.inverse(r), std::max(q.domain().lo, map.s0()), q.domain().hi);
        return q(s) / map.q_factor(s);
      },
      detail::map_breakpoints(q.breakpoints(), to_r), detail::map_domain(q.domain(), to_r, map.s0()));
}

/// p, q1, q2 in s from g, a1, a2 in r. Rejects negative samples of g.
inline LiftedCoefficients lift_coefficients(const RadialProblem& problem, double s_max = 0.0) {
  auto map = problem.map();
  Function g(problem.g);
  double r_hi = map.beta_unchecked(std::max(s_max, 64.0 * map.s0()));
  const int samples = 4096;
  for (int i = 0; i <= samples; ++i) {
    double r = problem.R * std::pow(r_hi / problem.R, static_cast<double>(i) / samples);
    if (g(r) < 0.0) throw ConstraintError("g(r) >= 0 for r >= R (negative sample at r = " + detail::format_number(r) + ")");
  }
  LiftedCoefficients out;
  auto to_s = [map](double r) { return map.inverse_unchecked(r); };
  out.p = Function([map, g](double s) { return map.beta_beta_prime(s) * g(map.beta(s)); },
                   detail::map_breakpoints(g.breakpoints(), to_s), Domain{map.s0(), std::numeric_limits<double>::infinity()});
  out.q1 = lift_a(map, problem.a1);
  out.q2 = lift_a(map, problem.a2);
  out.p_tail = lifted_p_tail(map, problem.g_envelope);
  return out;
}

// ---------------------------------------------------------------------------
// Barriers and residuals

struct BarrierPair {
  KernelPair h1;
  KernelPair h2;
  RadialMap map;

  std::vector<double> radii() const {
    std::vector<double> r;
    for (double s : h1.grid) r.push_back(map.beta(s));
    return r;
  }
  const std::vector<double>& v1() const { return h1.h_over_s; }
  const std::vector<double>& v2() const { return h2.h_over_s; }
};

struct BarrierCheck {
  double min_gap = 0.0;       // min over grid of v2 - v1
  double min_v1 = 0.0;
  bool ordered = false;
  bool positive = false;
};

inline BarrierPair build_barriers(const RadialMap& map, const LiftedCoefficients& lifted, std::span<const double> grid,
                                  const KernelBounds& b1, const KernelBounds& b2, const KernelOptions& options = {}) {
  return BarrierPair{build_kernel(lifted.p, lifted.q1, grid, b1, options),
                     build_kernel(lifted.p, lifted.q2, grid, b2, options), map};
}

inline BarrierCheck check_barriers(const BarrierPair& b) {
  if (b.h1.grid != b.h2.grid) throw std::invalid_argument("barrier kernels must share a grid");
  BarrierCheck c;
  c.min_gap = std::numeric_limits<double>::infinity();
  c.min_v1 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < b.h1.grid.size(); ++i) {
    c.min_gap = std::min(c.min_gap, b.v2()[i] - b.v1()[i]);
    c.min_v1 = std::min(c.min_v1, b.v1()[i]);
  }
  c.ordered = c.min_gap >= 0.0;
  c.positive = c.min_v1 > 0.0;
  return c;
}

struct SubSuperResidual {
  std::vector<double> s;    // interior nodes
  std::vector<double> rho1;  // should be >= -tol
  std::vector<double> rho2;  // should be <= tol
  double min_rho1 = 0.0;
  double max_rho2 = 0.0;
  double tol = 0.0;
  bool sub_ok = false;
  bool super_ok = false;
};

/**
 * rho_i = h_i'' + p (h_i' - h_i/s) + (beta beta'/(n-2)) f(beta, h_i/s) on the
 * interior nodes, with central differences. The PDE residual of v_i is
 * (n-2)/(beta beta') rho_i, so only signs matter.
 */
inline SubSuperResidual subsuper_residual(const BarrierPair& b, const RadialProblem& problem,
                                          const LiftedCoefficients& lifted, double tol = 1e-6) {
  const auto& s = b.h1.grid;
  if (s.size() < 3 || b.h2.grid != s) throw std::invalid_argument("subsuper_residual: barriers need a shared grid of >= 3 nodes");
  if (!is_uniform(s)) throw std::invalid_argument("subsuper_residual: grid spacing must be uniform");
  const auto& map = b.map;
  const double step = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
  SubSuperResidual out;
  out.tol = tol;
  out.min_rho1 = std::numeric_limits<double>::infinity();
  out.max_rho2 = -std::numeric_limits<double>::infinity();
  auto bracket = [&](const std::vector<double>& h, std::size_t i, double f) {
    double d2 = (h[i + 1] - 2.0 * h[i] + h[i - 1]) / (step * step);
    double d1 = (h[i + 1] - h[i - 1]) / (2.0 * step);
    return d2 + lifted.p(s[i]) * (d1 - h[i] / s[i]) + map.beta_beta_prime(s[i]) / (map.n() - 2) * f;
  };
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    double r = map.beta(s[i]);
    double a1 = problem.a1(r);
    double a2 = problem.a2(r);
    double lo = b.v1()[i];
    double hi = b.v2()[i];
    double f1 = problem.f(r, lo, a1, a2, lo, hi);
    double f2 = problem.f(r, hi, a1, a2, lo, hi);
    for (double f : {f1, f2}) {
      if (f < std::min(a1, a2) - kRibbonGuard * std::max(1.0, std::abs(a1)) ||
          f > std::max(a1, a2) + kRibbonGuard * std::max(1.0, std::abs(a2)) || a1 > a2 + kRibbonGuard) {
        throw ConstraintError("f leaves [a1, a2] on the ribbon at r = " + detail::format_number(r));
      }
    }
    double rho1 = bracket(b.h1.h, i, f1);
    double rho2 = bracket(b.h2.h, i, f2);
    out.s.push_back(s[i]);
    out.rho1.push_back(rho1);
    out.rho2.push_back(rho2);
    out.min_rho1 = std::min(out.min_rho1, rho1);
    out.max_rho2 = std::max(out.max_rho2, rho2);
  }
  out.sub_ok = out.min_rho1 >= -tol;
  out.super_ok = out.max_rho2 <= tol;
  return out;
}

/// v'' + ((n-1)/r) v' + f(r, v) + g(r) r v' by central differences in r.
template <class V, class F>
double radial_pde_residual(int n, const Function& g, const V& v, const F& f, double r, double dr) {
  double vm = v(r - dr);
  double v0 = v(r);
  double vp = v(r + dr);
  double d1 = (vp - vm) / (2.0 * dr);
  double d2 = (vp - 2.0 * v0 + vm) / (dr * dr);
  return d2 + (n - 1.0) / r * d1 + f(r, v0) + g(r) * r * d1;
}

/// (n-2)/(beta beta') [h'' + p (h' - h/s) + (beta beta'/(n-2)) f(beta, h/s)] with exact h derivatives.
template <class F>
double transformed_residual(const RadialMap& map, const Function& g, double h, double dh, double d2h, const F& f,
                            double s) {
  double bb = map.beta_beta_prime(s);
  double r = map.beta(s);
  double p = bb * g(r);
  double bracket = d2h + p * (dh - h / s) + bb / (map.n() - 2) * f(r, h / s);
  return (map.n() - 2) / bb * bracket;
}

// ---------------------------------------------------------------------------
// Integral conditions

struct GrowthRow {
  double T = 0.0;
  double integral = 0.0;
};

struct IntegralConditions {
  // int_R^inf r^{n-1} g
  double g_moment = 0.0;
  double g_moment_tail = 0.0;
  double g_moment_window = 0.0;   // int_{beta(s0)}^{T} r^{n-1} g
  double s_p_window = 0.0;        // (1/(n-2)) int_{s0}^{beta^{-1}(T)} s p
  double identity_gap = 0.0;
  bool g_moment_finite = false;

  std::vector<GrowthRow> growth1;  // int_{beta(s0)}^T r |a_1|
  std::vector<GrowthRow> growth2;
  double growth_slope1 = 0.0;      // least squares against ln T
  double growth_slope2 = 0.0;
  bool growth_ok = false;

  std::vector<GrowthRow> weighted1;  // int r^{1 - varsigma(n-2)} |a_1|, T doubling
  std::vector<GrowthRow> weighted2;
  std::vector<double> weighted_tail;  // closed-form tail bound at each T
  bool weighted_ok = false;
};

namespace detail {

inline double ls_slope(const std::vector<GrowthRow>& rows) {
  double n = static_cast<double>(rows.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& row : rows) {
    double x = std::log(row.T);
    sx += x;
    sy += row.integral;
    sxx += x * x;
    sxy += x * row.integral;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Every segment grows at a rate comparable with the overall fit.
inline bool steady_growth(const std::vector<GrowthRow>& rows, double slope) {
  if (rows.size() < 2 || !(slope > 0.0)) return false;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    double seg = (rows[k].integral - rows[k - 1].integral) / (std::log(rows[k].T) - std::log(rows[k - 1].T));
    if (seg < std::max(1e-3, 0.25 * slope)) return false;
  }
  return true;
}

}  // namespace detail

/**
 * growth_T: truncation points for the divergent integrals (r |a_i|).
 * q_sup: bound on |q_i| used for the tail of the weighted integrals.
 */
inline IntegralConditions integral_conditions(const RadialProblem& problem, const LiftedCoefficients& lifted,
                                              std::span<const double> growth_T, double q_sup) {
  auto map = problem.map();
  const int n = problem.n;
  const double r0 = map.r0();
  IntegralConditions c;
  Function g(problem.g);

  // (i) int_R^inf r^{n-1} g with a power tail from the envelope of g
  auto moment = [&g, n](double r) { return std::pow(r, n - 1) * g(r); };
  double k = problem.g_envelope.exponent - (n - 1);
  if (!(k > 1.0)) throw ConstraintError("g envelope exponent must exceed n for a finite moment");
  auto tail_model = TailModel::power(k, problem.g_envelope.constant, problem.R);
  auto gm = integrate_tail(moment, problem.R, tail_model, 1e-10, g.breakpoints());
  c.g_moment = gm.value;
  c.g_moment_tail = gm.tail_bound;
  c.g_moment_finite = std::isfinite(gm.value);

  double T_id = growth_T.empty() ? 100.0 * r0 : growth_T.front();
  c.g_moment_window = integrate_finite(moment, r0, T_id, 1e-12, g.breakpoints()).value;
  auto s_p = [&lifted](double s) { return s * lifted.p(s); };
  c.s_p_window = integrate_finite(s_p, map.s0(), map.inverse(T_id), 1e-12, lifted.p.breakpoints()).value / (n - 2);
  c.identity_gap = std::abs(c.g_moment_window - c.s_p_window);

  // (ii) growth of int r |a_i|
  auto growth = [&](const Function& a) {
    std::vector<GrowthRow> rows;
    auto f = [&a](double r) { return r * std::abs(a(r)); };
    double acc = 0.0;
    double from = r0;
    for (double T : growth_T) {
      if (!(T > from)) throw std::invalid_argument("growth truncation points must increase past beta(s0)");
      if (T > a.domain().hi) throw ConstraintError("truncation point beyond the coefficient table");
      acc += integrate_finite(f, from, T, 1e-11, a.breakpoints_in(from, T)).value;
      rows.push_back({T, acc});
      from = T;
    }
    return rows;
  };
  c.growth1 = growth(problem.a1);
  c.growth2 = growth(problem.a2);
  if (c.growth1.size() >= 2) {
    c.growth_slope1 = detail::ls_slope(c.growth1);
    c.growth_slope2 = detail::ls_slope(c.growth2);
    c.growth_ok = detail::steady_growth(c.growth1, c.growth_slope1) && detail::steady_growth(c.growth2, c.growth_slope2);
  }

  // (iii) int r^{1 - varsigma(n-2)} |a_i| under doubling; in s this is (n-2)^{1+vs} int |q| s^{-1-vs}
  const double vs = problem.varsigma;
  auto weighted = [&](const Function& a) {
    std::vector<GrowthRow> rows;
    auto f = [&a, vs, n](double r) { return std::pow(r, 1.0 - vs * (n - 2)) * std::abs(a(r)); };
    double acc = 0.0;
    double from = r0;
    double T = 4.0 * r0;
    while (T <= a.domain().hi) {
      acc += integrate_finite(f, from, T, 1e-12, a.breakpoints_in(from, T)).value;
      rows.push_back({T, acc});
      from = T;
      T *= 2.0;
    }
    return rows;
  };
  c.weighted1 = weighted(problem.a1);
  c.weighted2 = weighted(problem.a2);
  for (const auto& row : c.weighted1) {
    double S = map.inverse(row.T);
    c.weighted_tail.push_back(std::pow(n - 2.0, 1.0 + vs) * q_sup * std::pow(S, -vs) / vs);
  }
  bool cauchy = c.weighted1.size() >= 2;
  for (std::size_t i = 0; i + 1 < c.weighted1.size(); ++i) {
    cauchy = cauchy && std::abs(c.weighted1[i + 1].integral - c.weighted1[i].integral) <= c.weighted_tail[i] &&
             std::abs(c.weighted2[i + 1].integral - c.weighted2[i].integral) <= c.weighted_tail[i];
  }
  c.weighted_ok = cauchy;
  return c;
}

inline nlohmann::json to_json(const IntegralConditions& c) {
  auto rows = [](const std::vector<GrowthRow>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : v) a.push_back({{"T", r.T}, {"integral", r.integral}});
    return a;
  };
  return {{"g_moment", {{"value", c.g_moment}, {"tail_bound", c.g_moment_tail}, {"finite", c.g_moment_finite},
                        {"window", c.g_moment_window}, {"s_p_window", c.s_p_window}, {"identity_gap", c.identity_gap}}},
          {"growth", {{"a1", rows(c.growth1)}, {"a2", rows(c.growth2)}, {"slope_a1", c.growth_slope1},
                      {"slope_a2", c.growth_slope2}, {"unbounded", c.growth_ok}}},
          {"weighted", {{"a1", rows(c.weighted1)}, {"a2", rows(c.weighted2)}, {"tail_bounds", c.weighted_tail},
                        {"cauchy", c.weighted_ok}}}};
}

}  // namespace oscillax

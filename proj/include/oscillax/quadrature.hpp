#pragma once

/**
 * @file quadrature.hpp
 * @brief Adaptive Gauss-Kronrod integration with explicit tail accounting.
 *
 * Finite intervals use a globally adaptive (7,15) Gauss-Kronrod scheme: the
 * interval is pre-split at the integrand's breakpoints, every cell carries the
 * rule-pair difference as its error estimate, and the worst cell is bisected
 * until the summed estimate meets the tolerance.
 *
 * Semi-infinite integrals are truncated at a cutoff chosen from a TailModel
 * so that the certified bound on the discarded tail is at most tol/2. The
 * returned value is the finite part only; the bound is reported separately.
 */

#include <oscillax/error.hpp>
#include <oscillax/expr.hpp>
#include <oscillax/function.hpp>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

namespace oscillax {

inline constexpr double kFiniteTol = 1e-10;
inline constexpr double kTailTol = 1e-8;
inline constexpr std::size_t kMaxSubdivisions = 20000;

struct IntegralResult {
  double value = 0.0;
  double abs_error_estimate = 0.0;
  double tail_bound = 0.0;  // zero for finite intervals
  std::size_t evaluations = 0;
};

/// Certified envelope for the tail of a semi-infinite integral.
struct TailModel {
  enum class Kind { power, exponential, user };

  Kind kind = Kind::power;
  double exponent = 2.0;  // power: |f(s)| <= constant * s^-exponent, exponent > 1
  double rate = 1.0;      // exponential: |f(s)| <= constant * exp(-rate s)
  double constant = 1.0;
  double cutoff = 0.0;  // the envelope is only claimed for s >= cutoff
  std::function<double(double)> user_bound;  // user: bound on int_c^inf |f|
  std::function<double(double)> envelope;    // user: optional pointwise bound

  static TailModel power(double exponent, double constant, double cutoff = 0.0) {
    if (!(exponent > 1.0)) throw std::invalid_argument("power tail model needs exponent > 1");
    TailModel m;
    m.kind = Kind::power;
    m.exponent = exponent;
    m.constant = constant;
    m.cutoff = cutoff;
    return m;
  }

  static TailModel exponential(double rate, double constant, double cutoff = 0.0) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential tail model needs rate > 0");
    TailModel m;
    m.kind = Kind::exponential;
    m.rate = rate;
    m.constant = constant;
    m.cutoff = cutoff;
    return m;
  }

  static TailModel user(std::function<double(double)> bound, std::function<double(double)> env = {},
                        double cutoff = 0.0) {
    TailModel m;
    m.kind = Kind::user;
    m.user_bound = std::move(bound);
    m.envelope = std::move(env);
    m.cutoff = cutoff;
    return m;
  }

  /// Upper bound on int_c^inf |f| for c >= cutoff.
  double bound_from(double c) const {
    switch (kind) {
      case Kind::power:
        return constant * std::pow(c, 1.0 - exponent) / (exponent - 1.0);
      case Kind::exponential:
        return constant * std::exp(-rate * c) / rate;
      case Kind::user:
        return user_bound(c);
    }
    return std::numeric_limits<double>::infinity();
  }

  std::optional<double> envelope_at(double s) const {
    switch (kind) {
      case Kind::power:
        return constant * std::pow(s, -exponent);
      case Kind::exponential:
        return constant * std::exp(-rate * s);
      case Kind::user:
        if (envelope) return envelope(s);
        return std::nullopt;
    }
    return std::nullopt;
  }

  /// Smallest truncation point >= lo (and >= cutoff) whose tail bound is <= tol/2.
  double truncation_point(double lo, double tol) const {
    double start = std::max(lo, cutoff);
    double target = 0.5 * tol;
    double c = start;
    switch (kind) {
      case Kind::power:
        if (start > 0.0 && bound_from(start) <= target) return start;
        c = std::pow(target * (exponent - 1.0) / constant, 1.0 / (1.0 - exponent));
        break;
      case Kind::exponential:
        if (bound_from(start) <= target) return start;
        c = -std::log(target * rate / constant) / rate;
        break;
      case Kind::user: {
        c = std::max(start, 1.0);
        for (int i = 0; i < 400 && !(bound_from(c) <= target); ++i) c *= 2.0;
        if (!(bound_from(c) <= target)) throw QuadratureError("user tail bound never reaches tolerance");
        return std::max(c, start);
      }
    }
    return std::max(c, start);
  }

  /// Model for s * f(s), used for first moments.
  TailModel first_moment() const {
    switch (kind) {
      case Kind::power:
        return power(exponent - 1.0, constant, std::max(cutoff, 0.0));
      case Kind::exponential: {
        double k = rate;
        double C = constant;
        return user([k, C](double c) { return C * std::exp(-k * c) * (c / k + 1.0 / (k * k)); },
                    [k, C](double s) { return C * s * std::exp(-k * s); }, std::max(cutoff, 0.0));
      }
      case Kind::user:
        throw std::invalid_argument("first moment of a user tail model is not derivable");
    }
    return *this;
  }
};

namespace detail {

struct Cell {
  double lo;
  double hi;
  double value;
  double error;
  bool operator<(const Cell& o) const { return error < o.error; }
};

template <class F>
Cell gauss_kronrod_cell(const F& f, double lo, double hi, std::size_t& evals) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  using G = boost::math::quadrature::gauss<double, 7>;
  const auto& x = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G::weights();
  double half = 0.5 * (hi - lo);
  double mid = 0.5 * (hi + lo);
  double kronrod = 0.0;
  double gauss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double fx = 0.0;
    if (x[i] == 0.0) {
      fx = f(mid);
      ++evals;
    } else {
      double a = f(mid - half * x[i]);
      double b = f(mid + half * x[i]);
      evals += 2;
      fx = a + b;
    }
    if (!std::isfinite(fx)) {
      throw QuadratureError("non-finite integrand sample on [" + format_number(lo) + ", " + format_number(hi) + "]");
    }
    kronrod += wk[i] * fx;
    // Gauss nodes are the even-indexed Kronrod abscissae.
    if (i % 2 == 0) gauss += wg[i / 2] * fx;
  }
  kronrod *= half;
  gauss *= half;
  return Cell{lo, hi, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

/**
 * Integral of f over [lo, hi] to absolute tolerance `tol`.
 * `breakpoints` (sorted) seed the initial partition; points outside (lo, hi)
 * are ignored.
 */
template <class F>
IntegralResult integrate_finite(const F& f, double lo, double hi, double tol = kFiniteTol,
                                std::span<const double> breakpoints = {},
                                std::size_t max_subdivisions = kMaxSubdivisions) {
  if (!(lo <= hi)) throw std::invalid_argument("integrate_finite: need lo <= hi");
  if (!(tol > 0.0)) throw std::invalid_argument("integrate_finite: need tol > 0");
  IntegralResult r;
  if (lo == hi) return r;

  std::priority_queue<detail::Cell> cells;
  double value = 0.0;
  double error = 0.0;
  double left = lo;
  auto first = std::upper_bound(breakpoints.begin(), breakpoints.end(), lo);
  for (auto it = first; it != breakpoints.end() && *it < hi; ++it) {
    auto c = detail::gauss_kronrod_cell(f, left, *it, r.evaluations);
    value += c.value;
    error += c.error;
    cells.push(c);
    left = *it;
  }
  auto last = detail::gauss_kronrod_cell(f, left, hi, r.evaluations);
  value += last.value;
  error += last.error;
  cells.push(last);

  std::size_t splits = 0;
  // Stop once the estimate is below tol or at the roundoff floor of the sum.
  while (error > tol && error > 64.0 * std::numeric_limits<double>::epsilon() * std::abs(value)) {
    if (++splits > max_subdivisions) {
      throw QuadratureError("subdivision limit exceeded on [" + detail::format_number(lo) + ", " +
                            detail::format_number(hi) + "], error estimate " + detail::format_number(error));
    }
    auto worst = cells.top();
    cells.pop();
    double mid = 0.5 * (worst.lo + worst.hi);
    if (!(mid > worst.lo && mid < worst.hi)) {
      cells.push(worst);
      break;  // cell cannot be split further in floating point
    }
    auto a = detail::gauss_kronrod_cell(f, worst.lo, mid, r.evaluations);
    auto b = detail::gauss_kronrod_cell(f, mid, worst.hi, r.evaluations);
    value += a.value + b.value - worst.value;
    error += a.error + b.error - worst.error;
    cells.push(a);
    cells.push(b);
  }

  // Re-sum to shed the drift of incremental updates.
  value = 0.0;
  error = 0.0;
  std::vector<detail::Cell> all;
  all.reserve(cells.size());
  while (!cells.empty()) {
    all.push_back(cells.top());
    cells.pop();
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
  for (const auto& c : all) {
    value += c.value;
    error += c.error;
  }
  r.value = value;
  r.abs_error_estimate = error;
  return r;
}

inline IntegralResult integrate_finite(const Function& f, double lo, double hi, double tol = kFiniteTol) {
  return integrate_finite(f, lo, hi, tol, f.breakpoints());
}

/**
 * Integral of f over [lo, inf). The finite part [lo, c] is integrated to
 * tol/2 where c is the model's truncation point; tail_bound certifies the
 * discarded piece. The model is checked against samples of |f| beyond c.
 */
template <class F>
IntegralResult integrate_tail(const F& f, double lo, const TailModel& model, double tol = kTailTol,
                              std::span<const double> breakpoints = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("integrate_tail: need tol > 0");
  double cut = model.truncation_point(lo, tol);
  for (int j = 0; j < 16; ++j) {
    double s = cut * std::pow(2.0, 0.25 * j);
    auto env = model.envelope_at(s);
    if (!env) break;
    double v = std::abs(f(s));
    if (v > *env * (1.0 + 1e-9) + std::numeric_limits<double>::min()) {
      throw QuadratureError("tail model inconsistent with sampled decay at s = " + detail::format_number(s) +
                            ": |f| = " + detail::format_number(v) + " > " + detail::format_number(*env));
    }
  }
  IntegralResult r = integrate_finite(f, lo, cut, 0.5 * tol, breakpoints);
  r.tail_bound = model.bound_from(cut);
  return r;
}

inline IntegralResult integrate_tail(const Function& f, double lo, const TailModel& model, double tol = kTailTol) {
  return integrate_tail(f, lo, model, tol, f.breakpoints());
}

struct CumulativeIntegral {
  std::vector<double> values;  // values[i] = integral from grid[0] to grid[i]
  double abs_error_estimate = 0.0;
  std::size_t evaluations = 0;
};

/// Prefix integrals over a strictly increasing grid; cells are integrated
/// independently to `cell_tol` and summed in grid order.
template <class F>
CumulativeIntegral cumulative_integral(const F& f, std::span<const double> grid, double cell_tol = 1e-13,
                                       std::span<const double> breakpoints = {}) {
  CumulativeIntegral out;
  if (grid.empty()) return out;
  out.values.assign(grid.size(), 0.0);
  double acc = 0.0;
  auto bp = breakpoints.begin();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw GridError("grid not strictly increasing", i);
    while (bp != breakpoints.end() && *bp <= grid[i - 1]) ++bp;
    auto bp_end = bp;
    while (bp_end != breakpoints.end() && *bp_end < grid[i]) ++bp_end;
    IntegralResult cell;
    try {
      cell = integrate_finite(f, grid[i - 1], grid[i], cell_tol, std::span<const double>(bp, bp_end));
    } catch (const DomainError& e) {
      throw GridError(e.what(), i);
    }
    acc += cell.value;
    out.values[i] = acc;
    out.abs_error_estimate += cell.abs_error_estimate;
    out.evaluations += cell.evaluations;
  }
  return out;
}

inline CumulativeIntegral cumulative_integral(const Function& f, std::span<const double> grid,
                                              double cell_tol = 1e-13) {
  return cumulative_integral(f, grid, cell_tol, f.breakpoints());
}

}  // namespace oscillax

#pragma once

/**
 * @file kernel.hpp
 * @brief Kernel functions of the linear comparison equation
 *
 *     h'' + p(s) (h' - h/s) + q(s)/s = 0,   s >= s0.
 *
 * With P(s) = int_{s0}^s p, the kernel is
 *
 *     z(s) = -exp(-P(s)) int_{s0}^s q(t) exp(P(t)) dt,
 *     h(s) = -s int_s^inf z(t) / t^2 dt,
 *
 * so that z' = -p z - q, h' - h/s = z/s, and h solves the equation above.
 *
 * z is computed by cell-wise adaptive quadrature of the weighted integrand
 * q e^P (cells split at the breakpoints of p and q, so no lobe of an
 * oscillating q is straddled). An independent Dormand-Prince integration of
 * z' = -p z - q serves as the cross-check.
 *
 * h is assembled from per-cell integrals of z/t^2 over a Hermite interpolant
 * of z (slopes from the ODE) out to the end of the sampled range S; the part
 * beyond S is estimated from the trailing mean of z and certified with the
 * bound |z| <= z_sup.
 */

#include <oscillax/error.hpp>
#include <oscillax/function.hpp>
#include <oscillax/quadrature.hpp>

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oscillax {

inline constexpr double kKernelCellTol = 1e-13;

/// Samples of z on `grid`; grid[0] plays the role of s0.
inline std::vector<double> compute_z(const Function& p, const Function& q, std::span<const double> grid,
                                     double cell_tol = kKernelCellTol) {
  if (grid.empty()) return {};
  auto weight = cumulative_integral(p, grid, cell_tol);
  const auto& P = weight.values;
  std::vector<double> z(grid.size(), 0.0);
  double forcing = 0.0;  // int_{s0}^{s_i} q e^P
  for (std::size_t i = 1; i < grid.size(); ++i) {
    double a = grid[i - 1];
    double b = grid[i];
    double base = P[i - 1];
    auto p_bp = p.breakpoints_in(a, b);
    auto integrand = [&](double t) {
      double inner = integrate_finite(p, a, t, cell_tol, p_bp).value;
      return q(t) * std::exp(base + inner);
    };
    auto seeds = merge_breakpoints(p_bp, q.breakpoints_in(a, b));
    IntegralResult cell;
    try {
      cell = integrate_finite(integrand, a, b, cell_tol, seeds);
    } catch (const DomainError& e) {
      throw GridError(e.what(), i);
    }
    forcing += cell.value;
    double scale = std::exp(-P[i]);
    if (!std::isfinite(scale) || !std::isfinite(forcing)) throw GridError("overflow in exp(int p)", i);
    z[i] = -scale * forcing;
  }
  return z;
}

/**
 * Reference solution of z' = -p z - q, z(s0) = 0, by an adaptive embedded
 * Runge-Kutta (Dormand-Prince 5(4)) method. Steps are forced to land on every
 * grid point and every breakpoint of p and q.
 */
inline std::vector<double> z_ode_oracle(const Function& p, const Function& q, std::span<const double> grid,
                                        double tol = 1e-10) {
  namespace odeint = boost::numeric::odeint;
  using State = std::array<double, 1>;
  if (grid.empty()) return {};
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw GridError("grid not strictly increasing", i);
  }
  auto bp = merge_breakpoints(p.breakpoints_in(grid.front(), grid.back()), q.breakpoints_in(grid.front(), grid.back()));
  std::vector<double> times = merge_breakpoints(grid, bp);

  std::vector<double> out(grid.size(), 0.0);
  std::size_t next = 0;
  auto rhs = [&](const State& x, State& dxdt, double t) { dxdt[0] = -p(t) * x[0] - q(t); };
  auto observe = [&](const State& x, double t) {
    if (next < grid.size() && t == grid[next]) out[next++] = x[0];
  };
  State x{0.0};
  auto stepper = odeint::make_controlled(tol, tol, odeint::runge_kutta_dopri5<State>());
  double dt0 = (grid.size() > 1 ? (grid[1] - grid[0]) : 1.0) * 0.25;
  try {
    odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt0, observe);
  } catch (const odeint::step_adjustment_error& e) {
    throw SolverError(std::string("step-size underflow in z oracle: ") + e.what());
  } catch (const odeint::no_progress_error& e) {
    throw SolverError(std::string("step-size underflow in z oracle: ") + e.what());
  }
  if (next != grid.size()) throw SolverError("z oracle did not visit every grid point");
  return out;
}

/// How the part of int z/t^2 beyond the sampled range is handled.
struct HTail {
  double z_sup_bound = std::numeric_limits<double>::infinity();  // |z| <= z_sup_bound on [s0, inf)
  double mean_window = 2.0 * std::numbers::pi;                   // trailing window for the mean of z
};

struct HSamples {
  std::vector<double> h;
  std::vector<double> h_over_s;
  std::vector<double> tail_bound;  // certified |error| of h from the tail estimate
  double tail_mean = 0.0;           // estimate of z beyond the grid
};

namespace detail {

// Five-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 5> kGL5x{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                             0.9061798459386640};
inline constexpr std::array<double, 5> kGL5w{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                             0.2369268850561891, 0.2369268850561891};

// Integral over [a, b] of w(t) * H(t), H the cubic Hermite interpolant.
template <class W>
double hermite_weighted(double a, double b, double za, double zb, double da, double db, const W& w) {
  double len = b - a;
  double acc = 0.0;
  for (std::size_t k = 0; k < 5; ++k) {
    double u = 0.5 * (kGL5x[k] + 1.0);
    double u2 = u * u;
    double u3 = u2 * u;
    double h00 = 2 * u3 - 3 * u2 + 1;
    double h10 = u3 - 2 * u2 + u;
    double h01 = -2 * u3 + 3 * u2;
    double h11 = u3 - u2;
    double t = a + u * len;
    double value = h00 * za + h10 * len * da + h01 * zb + h11 * len * db;
    acc += kGL5w[k] * w(t) * value;
  }
  return 0.5 * len * acc;
}

}  // namespace detail

/// h and h/s on `grid` from samples of z (z must satisfy z' = -p z - q).
inline HSamples compute_h(const Function& p, const Function& q, std::span<const double> grid,
                          std::span<const double> z, const HTail& tail) {
  if (grid.size() != z.size()) throw std::invalid_argument("compute_h: grid and z sizes differ");
  if (grid.empty()) return {};
  if (!std::isfinite(tail.z_sup_bound) || !(tail.z_sup_bound >= 0.0)) {
    throw Error("h tail bound unavailable: verify the lemma hypotheses to obtain a finite bound on |z|");
  }
  const std::size_t n = grid.size();
  std::vector<double> slope(n);
  for (std::size_t i = 0; i < n; ++i) slope[i] = -p(grid[i]) * z[i] - q(grid[i]);

  // Per-cell integrals of z/t^2 accumulated from the right.
  std::vector<double> right(n, 0.0);
  auto inv_sq = [](double t) { return 1.0 / (t * t); };
  for (std::size_t i = n - 1; i-- > 0;) {
    right[i] = right[i + 1] +
               detail::hermite_weighted(grid[i], grid[i + 1], z[i], z[i + 1], slope[i], slope[i + 1], inv_sq);
  }

  // Trailing mean of z over the last mean_window of the grid.
  const double S = grid.back();
  double zbar = z.back();
  if (tail.mean_window > 0.0 && S - grid.front() >= tail.mean_window) {
    double from = S - tail.mean_window;
    double area = 0.0;
    double length = 0.0;
    auto one = [](double) { return 1.0; };
    for (std::size_t i = n - 1; i-- > 0 && grid[i + 1] > from;) {
      double a = std::max(grid[i], from);
      if (a > grid[i]) {
        // partial cell: linear interpolation is enough for the mean estimate
        double zb = z[i + 1];
        double za = z[i] + (z[i + 1] - z[i]) * (a - grid[i]) / (grid[i + 1] - grid[i]);
        area += 0.5 * (za + zb) * (grid[i + 1] - a);
      } else {
        area += detail::hermite_weighted(grid[i], grid[i + 1], z[i], z[i + 1], slope[i], slope[i + 1], one);
      }
      length += grid[i + 1] - a;
    }
    if (length > 0.0) zbar = area / length;
  }

  HSamples out;
  out.tail_mean = zbar;
  out.h.resize(n);
  out.h_over_s.resize(n);
  out.tail_bound.resize(n);
  double tail_integral = zbar / S;
  double tail_error = (tail.z_sup_bound + std::abs(zbar)) / S;
  for (std::size_t i = 0; i < n; ++i) {
    out.h_over_s[i] = -(right[i] + tail_integral);
    out.h[i] = grid[i] * out.h_over_s[i];
    out.tail_bound[i] = grid[i] * tail_error;
  }
  return out;
}

struct OdeResidual {
  double sup = 0.0;            // sup |h'' + p (h' - h/s) + q/s| over interior nodes
  double l2 = 0.0;             // discrete L2 norm of the same residual
  double identity_sup = std::numeric_limits<double>::quiet_NaN();  // sup |h' - h/s - z/s|
  double argmax = 0.0;         // s where the sup is attained
};

/**
 * Residual of sampled h in the comparison equation, by central differences on
 * the interior nodes of a uniform grid. Nodes outside [lo, hi] are skipped.
 */
inline OdeResidual ode_residual(std::span<const double> grid, std::span<const double> h, const Function& p,
                                const Function& q, std::span<const double> z = {},
                                double lo = -std::numeric_limits<double>::infinity(),
                                double hi = std::numeric_limits<double>::infinity()) {
  if (grid.size() < 3) throw std::invalid_argument("ode_residual: need at least 3 grid nodes");
  if (h.size() != grid.size()) throw std::invalid_argument("ode_residual: size mismatch");
  if (!is_uniform(grid)) throw std::invalid_argument("ode_residual: grid spacing must be uniform");
  const bool with_z = !z.empty();
  if (with_z && z.size() != grid.size()) throw std::invalid_argument("ode_residual: z size mismatch");
  const double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  OdeResidual r;
  double sum_sq = 0.0;
  double identity = 0.0;
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    double s = grid[i];
    if (s < lo || s > hi) continue;
    double d2 = (h[i + 1] - 2.0 * h[i] + h[i - 1]) / (step * step);
    double d1 = (h[i + 1] - h[i - 1]) / (2.0 * step);
    double res = d2 + p(s) * (d1 - h[i] / s) + q(s) / s;
    if (std::abs(res) > r.sup) {
      r.sup = std::abs(res);
      r.argmax = s;
    }
    sum_sq += res * res * step;
    if (with_z) identity = std::max(identity, std::abs(d1 - h[i] / s - z[i] / s));
  }
  r.l2 = std::sqrt(sum_sq);
  if (with_z) r.identity_sup = identity;
  return r;
}

struct KernelOptions {
  double cell_tol = kKernelCellTol;
  double extension_factor = 8.0;                // z is carried out to this multiple of the window end
  double extension_step = std::numbers::pi / 32.0;
  double mean_window = 2.0 * std::numbers::pi;  // trailing window for the tail estimate
};

/// Constants certified by the lemma hypotheses for the (p, q) at hand.
struct KernelBounds {
  double lambda = 0.0;       // int_{s0}^inf p
  double z_sup_bound = std::numeric_limits<double>::infinity();  // (eps + delta) e^lambda
};

/// Sampled kernel on a window grid starting at s0.
struct KernelPair {
  std::vector<double> grid;
  std::vector<double> z;
  std::vector<double> h;
  std::vector<double> h_over_s;
  std::vector<double> h_tail_bound;
  double s0 = 0.0;
  double lambda = 0.0;
  double z_sup_bound = 0.0;
  HTail tail;
  double extension_end = 0.0;  // right end of the range z was carried to
  double tail_mean = 0.0;
};

inline KernelPair build_kernel(const Function& p, const Function& q, std::span<const double> grid,
                               const KernelBounds& bounds, const KernelOptions& options = {}) {
  if (grid.size() < 2) throw std::invalid_argument("build_kernel: grid needs at least two points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw GridError("grid not strictly increasing", i);
  }
  if (!(bounds.lambda >= 0.0 && bounds.lambda < 1.0)) {
    throw Error("build_kernel: lambda = int p must lie in [0, 1)");
  }
  HTail tail{bounds.z_sup_bound, options.mean_window};

  std::vector<double> extended(grid.begin(), grid.end());
  const double window_end = grid.back();
  double limit = std::min({options.extension_factor * window_end, q.domain().hi, p.domain().hi});
  if (options.extension_factor > 1.0 && options.extension_step > 0.0 && limit > window_end) {
    auto steps = static_cast<std::size_t>(std::floor((limit - window_end) / options.extension_step));
    for (std::size_t k = 1; k <= steps; ++k) extended.push_back(window_end + options.extension_step * static_cast<double>(k));
  }

  auto z = compute_z(p, q, extended, options.cell_tol);
  auto hs = compute_h(p, q, extended, z, tail);

  KernelPair k;
  const std::size_t n = grid.size();
  k.grid.assign(grid.begin(), grid.end());
  k.z.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
  k.h.assign(hs.h.begin(), hs.h.begin() + static_cast<std::ptrdiff_t>(n));
  k.h_over_s.assign(hs.h_over_s.begin(), hs.h_over_s.begin() + static_cast<std::ptrdiff_t>(n));
  k.h_tail_bound.assign(hs.tail_bound.begin(), hs.tail_bound.begin() + static_cast<std::ptrdiff_t>(n));
  k.s0 = grid.front();
  k.lambda = bounds.lambda;
  k.z_sup_bound = bounds.z_sup_bound;
  k.tail = tail;
  k.extension_end = extended.back();
  k.tail_mean = hs.tail_mean;
  return k;
}

/// Kernel samples restricted to every `stride`-th node (nested grids).
inline KernelPair subsample(const KernelPair& k, std::size_t stride) {
  if (stride == 0 || (k.grid.size() - 1) % stride != 0) throw std::invalid_argument("subsample: stride must divide the cell count");
  KernelPair out = k;
  auto pick = [stride](const std::vector<double>& v) {
    std::vector<double> r;
    for (std::size_t i = 0; i < v.size(); i += stride) r.push_back(v[i]);
    return r;
  };
  out.grid = pick(k.grid);
  out.z = pick(k.z);
  out.h = pick(k.h);
  out.h_over_s = pick(k.h_over_s);
  out.h_tail_bound = pick(k.h_tail_bound);
  return out;
}

}  // namespace oscillax

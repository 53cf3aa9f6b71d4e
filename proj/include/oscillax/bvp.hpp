#pragma once

// Monotone iteration for the truncated radial problem in the s variable
//
//     H'' + p (H' - H/s) + F(s, H) = 0,   F(s, H) = (beta beta'/(n-2)) f(beta(s), H/s),
//
// on the barrier grid, with u(x) = H(s)/s. With f = a_i one has F = q_i/s, so
// the kernel h_i is the exact solution of the linear case.

#include <oscillax/bridge.hpp>
#include <oscillax/error.hpp>
#include <oscillax/function.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oscillax {

/// Solves a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i; a_0 and c_{n-1} are ignored.
inline std::vector<double> solve_tridiagonal(std::span<const double> a, std::span<const double> b,
                                             std::span<const double> c, std::span<const double> d) {
  const std::size_t n = b.size();
  if (a.size() != n || c.size() != n || d.size() != n || n == 0) {
    throw std::invalid_argument("solve_tridiagonal: band sizes differ");
  }
  std::vector<double> cp(n), dp(n), x(n);
  double pivot = b[0];
  for (std::size_t i = 0;; ++i) {
    if (pivot == 0.0 || !std::isfinite(pivot)) {
      throw SolverError("tridiagonal system is singular at row " + std::to_string(i));
    }
    cp[i] = i + 1 < n ? c[i] / pivot : 0.0;
    dp[i] = (d[i] - (i > 0 ? a[i] * dp[i - 1] : 0.0)) / pivot;
    if (i + 1 == n) break;
    pivot = b[i + 1] - a[i + 1] * cp[i];
  }
  x[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
  return x;
}

enum class BoundaryTrace { lower, upper };

struct BvpOptions {
  double tol = 1e-10;
  int max_iterations = 200;
  std::optional<double> K;          // constant shift; default is a per-node sampled bound
  double k_safety = 1.5;
  int ribbon_samples = 33;
  BoundaryTrace boundary = BoundaryTrace::upper;
  double monotone_slack = 1e-12;
};

struct SandwichMargins {
  double lower = 0.0;  // min (u - v1)
  double upper = 0.0;  // min (v2 - u)
  bool pass = false;
};

struct BvpSolution {
  std::vector<double> grid;
  std::vector<double> u_values;  // H(s); u(x) = H/s
  int iterations = 0;
  std::vector<double> iteration_sup_deltas;
  SandwichMargins sandwich_margins;
  double decay_exponent = std::numeric_limits<double>::quiet_NaN();
  double K_used = 0.0;
  std::vector<double> residual;  // discrete residual, zero at the ends
  double residual_sup = 0.0;
  double initial_rise = 0.0;  // max(H^1 - h2): the continuous supersolution is one only up to O(step^2)
  bool monotone = true;
  bool deltas_decreasing = true;

  std::vector<double> u_over_s() const {
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = u_values[i] / grid[i];
    return out;
  }
};

namespace detail {

struct NodeData {
  std::vector<double> r, a1, a2, lo, hi, p, weight;  // weight = beta beta'/(n-2)
};

inline NodeData node_data(const RadialProblem& problem, const BarrierPair& barrier, const LiftedCoefficients& lifted) {
  const auto& s = barrier.h1.grid;
  const auto& map = barrier.map;
  NodeData d;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double r = map.beta(s[i]);
    d.r.push_back(r);
    d.a1.push_back(problem.a1(r));
    d.a2.push_back(problem.a2(r));
    d.lo.push_back(barrier.v1()[i]);
    d.hi.push_back(barrier.v2()[i]);
    d.p.push_back(lifted.p(s[i]));
    d.weight.push_back(map.beta_beta_prime(s[i]) / (map.n() - 2));
  }
  return d;
}

inline double forcing(const RadialProblem& problem, const NodeData& d, std::size_t i, double H, double s) {
  return d.weight[i] * problem.f(d.r[i], H / s, d.a1[i], d.a2[i], d.lo[i], d.hi[i]);
}

}  // namespace detail

/// Residual of the central-difference operator applied to H (interior nodes).
inline std::vector<double> bvp_residual(const RadialProblem& problem, const BarrierPair& barrier,
                                        const LiftedCoefficients& lifted, std::span<const double> H) {
  const auto& s = barrier.h1.grid;
  auto d = detail::node_data(problem, barrier, lifted);
  const double step = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
  std::vector<double> res(s.size(), 0.0);
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    double d2 = (H[i + 1] - 2.0 * H[i] + H[i - 1]) / (step * step);
    double d1 = (H[i + 1] - H[i - 1]) / (2.0 * step);
    res[i] = d2 + d.p[i] * (d1 - H[i] / s[i]) + detail::forcing(problem, d, i, H[i], s[i]);
  }
  return res;
}

inline SandwichMargins check_sandwich(std::span<const double> grid, std::span<const double> H,
                                      const BarrierPair& barrier, double tol = 1e-8) {
  const auto& s = barrier.h1.grid;
  if (grid.size() != s.size() || H.size() != s.size() || !std::equal(grid.begin(), grid.end(), s.begin())) {
    throw GridError("check_sandwich: solution and barriers are on different grids", 0);
  }
  SandwichMargins m;
  m.lower = m.upper = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    double u = H[i] / s[i];
    m.lower = std::min(m.lower, u - barrier.v1()[i]);
    m.upper = std::min(m.upper, barrier.v2()[i] - u);
  }
  m.pass = m.lower >= -tol && m.upper >= -tol;
  return m;
}

inline SandwichMargins check_sandwich(const BvpSolution& sol, const BarrierPair& barrier, double tol = 1e-8) {
  return check_sandwich(sol.grid, sol.u_values, barrier, tol);
}

/// Least-squares slope of ln u against ln r.
inline double decay_fit(std::span<const double> r, std::span<const double> u) {
  if (r.size() != u.size() || r.size() < 2) throw std::invalid_argument("decay_fit: need >= 2 paired samples");
  double mx = 0.0, my = 0.0;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(u[i] > 0.0) || !(r[i] > 0.0)) {
      throw DomainError("decay_fit: nonpositive value at r = " + detail::format_number(r[i]));
    }
    x.push_back(std::log(r[i]));
    y.push_back(std::log(u[i]));
    mx += x.back();
    my += y.back();
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(y.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

/// Fit over the last `window` fraction of the grid, leaving out the final `boundary_layer` fraction.
inline double decay_fit(const BvpSolution& sol, const RadialProblem& problem, double window = 0.3,
                        double boundary_layer = 0.05) {
  if (!(window > 0.0) || !(boundary_layer >= 0.0) || window + boundary_layer > 1.0) {
    throw std::invalid_argument("decay_fit: window fractions out of range");
  }
  const std::size_t n = sol.grid.size();
  auto hi = static_cast<std::size_t>(std::floor((1.0 - boundary_layer) * static_cast<double>(n - 1)));
  auto lo = static_cast<std::size_t>(std::ceil((1.0 - boundary_layer - window) * static_cast<double>(n - 1)));
  auto map = problem.map();
  std::vector<double> r, u;
  for (std::size_t i = lo; i <= hi; ++i) {
    r.push_back(map.beta(sol.grid[i]));
    u.push_back(sol.u_values[i] / sol.grid[i]);
  }
  return decay_fit(r, u);
}

inline constexpr std::size_t kDefaultSolverCells = 40000;

inline BvpSolution solve_radial(const RadialProblem& problem, const BarrierPair& barrier,
                                const LiftedCoefficients& lifted, const BvpOptions& options = {}) {
  const auto& s = barrier.h1.grid;
  const std::size_t n = s.size();
  if (n < 1001) throw ConstraintError("N >= 1000 grid cells");
  if (barrier.h2.grid != s || !is_uniform(s)) throw GridError("solve_radial: barriers need a shared uniform grid", 0);
  if (!(options.tol > 0.0)) throw ConstraintError("tol > 0");
  if (options.K && !(*options.K >= 0.0)) throw ConstraintError("K >= 0");

  auto d = detail::node_data(problem, barrier, lifted);
  const double step = (s.back() - s.front()) / static_cast<double>(n - 1);

  // Shift per node: safety factor times the sampled Lipschitz bound of F in H over the ribbon.
  std::vector<double> K(n, options.K.value_or(0.0));
  if (!options.K) {
    for (std::size_t i = 0; i < n; ++i) {
      double bound = 0.0;
      for (int k = 0; k < options.ribbon_samples; ++k) {
        double t = options.ribbon_samples > 1 ? static_cast<double>(k) / (options.ribbon_samples - 1) : 0.5;
        double u = d.lo[i] + t * (d.hi[i] - d.lo[i]);
        bound = std::max(bound, std::abs(problem.f.du(d.r[i], u, d.a1[i], d.a2[i], d.lo[i], d.hi[i])));
      }
      K[i] = options.k_safety * bound * d.weight[i] / s[i];
    }
  }

  BvpSolution sol;
  sol.grid = s;
  sol.K_used = *std::max_element(K.begin(), K.end());

  const auto& trace = options.boundary == BoundaryTrace::upper ? barrier.h2.h : barrier.h1.h;
  std::vector<double> H = barrier.h2.h;
  H.front() = trace.front();
  H.back() = trace.back();

  const std::size_t m = n - 2;
  std::vector<double> lower(m), diag(m), upper(m), rhs(m);
  const double inv2 = 1.0 / (step * step);
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t i = j + 1;
    lower[j] = inv2 - d.p[i] / (2.0 * step);
    upper[j] = inv2 + d.p[i] / (2.0 * step);
    diag[j] = -2.0 * inv2 - d.p[i] / s[i] - K[i];
  }

  for (int it = 1;; ++it) {
    if (it > options.max_iterations) {
      throw SolverError("monotone iteration did not reach tol in " + std::to_string(options.max_iterations) +
                        " iterations");
    }
    for (std::size_t j = 0; j < m; ++j) {
      std::size_t i = j + 1;
      rhs[j] = -detail::forcing(problem, d, i, H[i], s[i]) - K[i] * H[i];
    }
    rhs.front() -= lower.front() * H.front();
    rhs.back() -= upper.back() * H.back();
    auto inner = solve_tridiagonal(lower, diag, upper, rhs);

    double delta = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      double change = inner[j] - H[j + 1];
      if (it == 1) {
        sol.initial_rise = std::max(sol.initial_rise, change);
      } else if (change > options.monotone_slack * std::max(1.0, std::abs(H[j + 1]))) {
        sol.monotone = false;
      }
      delta = std::max(delta, std::abs(change));
      H[j + 1] = inner[j];
    }
    if (!sol.monotone) {
      throw SolverError("iteration is not monotone at step " + std::to_string(it) + "; increase K");
    }
    if (!sol.iteration_sup_deltas.empty() && !(delta < sol.iteration_sup_deltas.back())) {
      sol.deltas_decreasing = false;
    }
    sol.iteration_sup_deltas.push_back(delta);
    sol.iterations = it;
    if (delta <= options.tol) break;
  }

  sol.u_values = std::move(H);
  sol.residual = bvp_residual(problem, barrier, lifted, sol.u_values);
  for (double v : sol.residual) sol.residual_sup = std::max(sol.residual_sup, std::abs(v));
  sol.sandwich_margins = check_sandwich(sol, barrier);
  sol.decay_exponent = decay_fit(sol, problem);
  return sol;
}

inline nlohmann::json to_json(const BvpSolution& sol) {
  nlohmann::json j;
  j["iterations"] = sol.iterations;
  j["iteration_sup_deltas"] = sol.iteration_sup_deltas;
  j["sandwich_lower_margin"] = sol.sandwich_margins.lower;
  j["sandwich_upper_margin"] = sol.sandwich_margins.upper;
  j["sandwich_pass"] = sol.sandwich_margins.pass;
  j["decay_exponent"] = sol.decay_exponent;
  j["K_used"] = sol.K_used;
  j["residual_sup"] = sol.residual_sup;
  j["monotone"] = sol.monotone;
  j["initial_rise"] = sol.initial_rise;
  j["deltas_decreasing"] = sol.deltas_decreasing;
  j["nodes"] = sol.grid.size();
  j["s0"] = sol.grid.front();
  j["S"] = sol.grid.back();
  return j;
}

}  // namespace oscillax

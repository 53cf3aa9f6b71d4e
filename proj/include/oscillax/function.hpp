#pragma once

#include <oscillax/expr.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace oscillax {

/**
 * Type-erased scalar function of one variable with the metadata numerical
 * routines need: a domain and the points where it is only piecewise smooth.
 * Quadrature seeds its subdivision with these breakpoints.
 */
class Function {
 public:
  Function() : Function([](double) { return 0.0; }) {}

  template <class F>
    requires std::is_invocable_r_v<double, const F&, double> &&
             (!std::is_same_v<std::remove_cvref_t<F>, Function>) &&
             (!std::is_same_v<std::remove_cvref_t<F>, CoefficientExpr>)
  Function(F f, std::vector<double> breakpoints = {}, Domain domain = {})
      : impl_(std::make_shared<const std::function<double(double)>>(std::move(f))),
        breakpoints_(std::make_shared<const std::vector<double>>(std::move(breakpoints))),
        domain_(domain) {}

  Function(CoefficientExpr expr)  // NOLINT(google-explicit-constructor)
      : breakpoints_(std::make_shared<const std::vector<double>>(expr.nodes().begin(), expr.nodes().end())),
        domain_(expr.domain()) {
    auto shared = std::make_shared<const CoefficientExpr>(std::move(expr));
    impl_ = std::make_shared<const std::function<double(double)>>([shared](double s) { return (*shared)(s); });
  }

  static Function constant(double c) { return Function([c](double) { return c; }); }

  double operator()(double s) const { return (*impl_)(s); }

  std::span<const double> breakpoints() const noexcept { return *breakpoints_; }
  const Domain& domain() const noexcept { return domain_; }

  /// Breakpoints strictly inside (lo, hi).
  std::span<const double> breakpoints_in(double lo, double hi) const {
    const auto& b = *breakpoints_;
    auto first = std::upper_bound(b.begin(), b.end(), lo);
    auto last = std::lower_bound(first, b.end(), hi);
    return {first, last};
  }

 private:
  std::shared_ptr<const std::function<double(double)>> impl_;
  std::shared_ptr<const std::vector<double>> breakpoints_;
  Domain domain_{};
};

/// Merges two sorted breakpoint lists, dropping duplicates.
inline std::vector<double> merge_breakpoints(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// n+1 equally spaced points covering [lo, hi]; endpoints are exact.
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t cells) {
  std::vector<double> g(cells + 1);
  double step = (hi - lo) / static_cast<double>(cells);
  for (std::size_t i = 0; i <= cells; ++i) g[i] = lo + step * static_cast<double>(i);
  g.back() = hi;
  return g;
}

/// True when consecutive spacings agree to `rel` relative tolerance.
inline bool is_uniform(std::span<const double> grid, double rel = 1e-9) {
  if (grid.size() < 2) return false;
  double step = (grid.back() - grid.front()) / static_cast<double>(grid.size() - 1);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::abs(grid[i] - grid[i - 1] - step) > rel * std::abs(step)) return false;
  }
  return true;
}

}  // namespace oscillax

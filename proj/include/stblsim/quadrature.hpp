#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "stblsim/types.hpp"

namespace stblsim {

struct QuadratureSpec {
  int node_count = 16;
  int max_panels = 4096;
  /// Upper tails are cut where the remaining probability mass drops below
  /// this level.
  double tail_mass = 1e-12;
  double abs_tol = 1e-13;
  double rel_tol = 1e-9;

  void validate() const;
};

/// Gauss-Legendre rule on [-1, 1] (Golub-Welsch). Rules are cached.
struct GaussRule {
  Eigen::ArrayXd nodes;
  Eigen::ArrayXd weights;
};
const GaussRule& gauss_legendre(int n);

namespace detail {
inline double magnitude(double v) { return std::abs(v); }
template <class Derived>
double magnitude(const Eigen::ArrayBase<Derived>& v) {
  return v.abs().maxCoeff();
}

template <class F>
auto panel(F& f, const GaussRule& rule, double a, double b) {
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  using R = std::decay_t<decltype(f(m))>;
  R acc = rule.weights[0] * f(m + h * rule.nodes[0]);
  for (Eigen::Index i = 1; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(m + h * rule.nodes[i]);
  return R(h * acc);
}
}  // namespace detail

/// Fixed-rule integral of f over [a, b].
template <class F>
auto integrate_fixed(F f, double a, double b, int nodes) {
  return detail::panel(f, gauss_legendre(nodes), a, b);
}

/// Adaptive panel-split Gauss-Legendre. A panel is accepted when the whole
/// and the sum of its two halves agree to the panel's share of the
/// tolerance. f may return double or a fixed-size Eigen array.
template <class F>
auto integrate(F f, double a, double b, const QuadratureSpec& spec) {
  const GaussRule& rule = gauss_legendre(spec.node_count);
  using R = std::decay_t<decltype(detail::panel(f, rule, a, a))>;
  if (!(b > a)) return R(detail::panel(f, rule, a, a) * 0.0);

  struct Item {
    double lo, hi;
    R whole;
  };
  R first = detail::panel(f, rule, a, b);
  const double width = b - a;
  double scale = detail::magnitude(first);
  std::vector<Item> stack;
  stack.push_back({a, b, first});
  R total = first * 0.0;
  int panels = 1;
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (it.lo + it.hi);
    R left = detail::panel(f, rule, it.lo, mid);
    R right = detail::panel(f, rule, mid, it.hi);
    R halves = left + right;
    const double err = detail::magnitude(R(halves - it.whole));
    scale = std::max(scale, detail::magnitude(halves));
    const double allowed = std::max(spec.abs_tol, spec.rel_tol * scale) *
                           (it.hi - it.lo) / width;
    if (err <= allowed || it.hi - it.lo <= 1e-15 * std::max(1.0, std::abs(mid))) {
      total += halves;
      continue;
    }
    if (++panels > spec.max_panels)
      throw ModelError(ErrorKind::IntegrationAccuracy,
                       "adaptive quadrature exceeded its panel budget");
    stack.push_back({mid, it.hi, right});
    stack.push_back({it.lo, mid, left});
  }
  return total;
}

}  // namespace stblsim

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "qtd/error.hpp"

namespace qtd {

/// Fixed-order Gauss-Legendre rule on [-1, 1], expanded from Boost's
/// half-abscissa tables to a full list of nodes.
template <unsigned Order>
struct GaussLegendre {
  std::array<double, Order> nodes{};
  std::array<double, Order> weights{};

  GaussLegendre() {
    using Rule = boost::math::quadrature::gauss<double, Order>;
    const auto& a = Rule::abscissa();
    const auto& w = Rule::weights();
    std::size_t k = 0;
    // Boost stores the non-negative half; index 0 is the centre for odd orders.
    const std::size_t start = (Order % 2 == 1) ? 1 : 0;
    if (Order % 2 == 1) {
      nodes[k] = a[0];
      weights[k] = w[0];
      ++k;
    }
    for (std::size_t i = start; i < a.size(); ++i) {
      nodes[k] = a[i];
      weights[k] = w[i];
      ++k;
      nodes[k] = -a[i];
      weights[k] = w[i];
      ++k;
    }
  }

  static const GaussLegendre& instance() {
    static const GaussLegendre rule;
    return rule;
  }
};

/// Tensor-product Gauss-Legendre integral of f over the box [lower, upper].
/// Cost is Order^d evaluations.
template <unsigned Order = 16, class F>
double integrate_box(F&& f, std::span<const double> lower, std::span<const double> upper) {
  const std::size_t d = lower.size();
  if (upper.size() != d) throw InvalidArgument("integrate_box: dimension mismatch");
  const auto& rule = GaussLegendre<Order>::instance();
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  double scale = 1.0;
  for (std::size_t j = 0; j < d; ++j) scale *= 0.5 * (upper[j] - lower[j]);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double half = 0.5 * (upper[j] - lower[j]);
      const double mid = 0.5 * (upper[j] + lower[j]);
      x[j] = mid + half * rule.nodes[idx[j]];
      w *= rule.weights[idx[j]];
    }
    total += w * f(std::span<const double>(x));
    std::size_t j = 0;
    while (j < d && ++idx[j] == Order) idx[j++] = 0;
    if (j == d) break;
  }
  return scale * total;
}

/// Nodes and weights of a one-dimensional quadrature over time.
struct TimeQuadrature {
  std::vector<double> nodes;
  std::vector<double> weights;

  /// Composite rule: `panels` equal panels on [a, b], 4-point Gauss-Legendre
  /// in each. Nodes are strictly interior to (a, b).
  static TimeQuadrature composite(double a, double b, std::size_t panels) {
    if (!(b > a) || panels == 0) throw InvalidArgument("TimeQuadrature: need a < b and panels >= 1");
    const auto& rule = GaussLegendre<4>::instance();
    TimeQuadrature q;
    const double h = (b - a) / static_cast<double>(panels);
    for (std::size_t p = 0; p < panels; ++p) {
      const double lo = a + h * static_cast<double>(p);
      for (std::size_t k = 0; k < 4; ++k) {
        q.nodes.push_back(lo + 0.5 * h * (rule.nodes[k] + 1.0));
        q.weights.push_back(0.5 * h * rule.weights[k]);
      }
    }
    return q;
  }
};

}  // namespace qtd

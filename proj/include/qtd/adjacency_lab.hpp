#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qtd/error.hpp"

namespace qtd {

/// Graph structures on a finite state space, all with unit edge rates.
struct AdjacencyKind {
  enum class Shape { Tridiagonal, Dense, Hypercube };

  Shape shape;
  std::size_t size;  ///< n for Tridiagonal/Dense, D for Hypercube

  static AdjacencyKind tridiagonal(std::size_t n) { return {Shape::Tridiagonal, n}; }
  static AdjacencyKind dense(std::size_t n) { return {Shape::Dense, n}; }
  static AdjacencyKind hypercube(std::size_t D) { return {Shape::Hypercube, D}; }

  std::size_t num_states() const {
    if (shape == Shape::Hypercube) {
      if (size >= 63) throw SizeLimitExceeded("AdjacencyKind: hypercube dimension too large");
      return std::size_t{1} << size;
    }
    return size;
  }

  std::string name() const {
    switch (shape) {
      case Shape::Tridiagonal: return "tridiagonal";
      case Shape::Dense: return "dense";
      case Shape::Hypercube: return "hypercube";
    }
    return "unknown";
  }
};

inline constexpr std::size_t kMaxAdjacencyStates = 4096;

/// Symmetric generator with unit off-diagonal rate on every edge and
/// diagonal = -degree (columns sum to zero).
inline Eigen::MatrixXd build_rate_matrix(const AdjacencyKind& kind) {
  const std::size_t n = kind.num_states();
  if (n < 2) throw InvalidArgument("build_rate_matrix: need at least 2 states");
  if (n > kMaxAdjacencyStates) throw SizeLimitExceeded("build_rate_matrix: at most 4096 states");
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(N, N);
  switch (kind.shape) {
    case AdjacencyKind::Shape::Tridiagonal:
      for (Eigen::Index i = 0; i + 1 < N; ++i) R(i, i + 1) = R(i + 1, i) = 1.0;
      break;
    case AdjacencyKind::Shape::Dense:
      R.setOnes();
      break;
    case AdjacencyKind::Shape::Hypercube:
      for (Eigen::Index y = 0; y < N; ++y)
        for (std::size_t b = 0; b < kind.size; ++b) R(y ^ (Eigen::Index{1} << b), y) = 1.0;
      break;
  }
  R.diagonal().setZero();
  for (Eigen::Index c = 0; c < N; ++c) R(c, c) = -R.col(c).sum();
  return R;
}

struct GraphReport {
  std::size_t diameter = 0;
  std::size_t max_out_degree = 0;
};

/// BFS diameter and maximum degree of the off-diagonal support of R.
inline GraphReport graph_report(const Eigen::MatrixXd& R) {
  const Eigen::Index n = R.rows();
  std::vector<std::vector<Eigen::Index>> adj(static_cast<std::size_t>(n));
  GraphReport rep;
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index r = 0; r < n; ++r)
      if (r != c && R(r, c) > 0.0) adj[static_cast<std::size_t>(c)].push_back(r);
    rep.max_out_degree = std::max(rep.max_out_degree, adj[static_cast<std::size_t>(c)].size());
  }
  std::vector<long> dist(static_cast<std::size_t>(n));
  for (Eigen::Index src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    std::queue<Eigen::Index> frontier;
    dist[static_cast<std::size_t>(src)] = 0;
    frontier.push(src);
    while (!frontier.empty()) {
      const Eigen::Index u = frontier.front();
      frontier.pop();
      for (Eigen::Index v : adj[static_cast<std::size_t>(u)]) {
        if (dist[static_cast<std::size_t>(v)] >= 0) continue;
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        frontier.push(v);
      }
    }
    for (long d : dist) {
      if (d < 0) throw InvalidArgument("graph_report: graph is disconnected");
      rep.diameter = std::max(rep.diameter, static_cast<std::size_t>(d));
    }
  }
  return rep;
}

inline GraphReport graph_report(const AdjacencyKind& kind) { return graph_report(build_rate_matrix(kind)); }

/// exp(t R): column c is the law at time t of the chain started in state c.
inline Eigen::MatrixXd heat_kernel(const AdjacencyKind& kind, double t) {
  if (!(t >= 0.0)) throw InvalidArgument("heat_kernel: t must be >= 0");
  const Eigen::MatrixXd R = build_rate_matrix(kind);
  if (t == 0.0) return Eigen::MatrixXd::Identity(R.rows(), R.cols());
  return (t * R).exp();
}

/// TV between the law at time t started from state 0 and the uniform law.
inline double tv_from_corner(const AdjacencyKind& kind, double t) {
  const Eigen::MatrixXd P = heat_kernel(kind, t);
  const double u = 1.0 / static_cast<double>(P.rows());
  return 0.5 * (P.col(0).array() - u).abs().sum();
}

/// Smallest t (to relative precision 1e-6) with tv_from_corner <= tol.
/// TV to stationarity is nonincreasing in t, so bisection applies.
inline double mixing_time(const AdjacencyKind& kind, double tol = 0.01) {
  if (!(tol > 0.0 && tol < 1.0)) throw InvalidArgument("mixing_time: tol must lie in (0,1)");
  double hi = 1e-3;
  while (tv_from_corner(kind, hi) > tol) {
    hi *= 2.0;
    if (hi > 1e9) throw NumericalError("mixing_time: chain does not mix");
  }
  double lo = 0.0;
  while (hi - lo > 1e-6 * hi) {
    const double mid = 0.5 * (lo + hi);
    (tv_from_corner(kind, mid) > tol ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace qtd

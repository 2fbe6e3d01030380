#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/hypercube_chain.hpp"
#include "qtd/quantizer.hpp"

namespace qtd {

/// Counts of observed state indices. Merging is associative and
/// commutative, so per-thread laws can be reduced in any order.
class EmpiricalLaw {
 public:
  EmpiricalLaw() = default;

  static EmpiricalLaw from_states(std::span<const BinaryState> states) {
    EmpiricalLaw law;
    for (const auto& s : states) law.add(s.index());
    return law;
  }

  void add(std::uint64_t index, std::uint64_t count = 1) {
    counts_[index] += count;
    total_ += count;
  }
  void merge(const EmpiricalLaw& other) {
    for (const auto& [k, c] : other.counts_) add(k, c);
  }

  std::uint64_t total() const noexcept { return total_; }
  const std::map<std::uint64_t, std::uint64_t>& counts() const noexcept { return counts_; }

  /// Normalized counts as a dense vector over 2^D states.
  std::vector<double> dense(std::size_t num_bits) const {
    if (total_ == 0) throw InvalidArgument("EmpiricalLaw: no samples");
    const std::uint64_t n = ChainSpec(num_bits).num_states();
    std::vector<double> p(n, 0.0);
    for (const auto& [k, c] : counts_) {
      if (k >= n) throw InvalidArgument("EmpiricalLaw: state index outside the distribution");
      p[k] = static_cast<double>(c) / static_cast<double>(total_);
    }
    return p;
  }

  /// Normalized law after adding a pseudo-count of 1/(2 total) to every
  /// state, so that it has full support.
  DiscreteDistribution smoothed(std::size_t num_bits) const {
    if (total_ == 0) throw InvalidArgument("EmpiricalLaw: no samples");
    const std::uint64_t n = ChainSpec(num_bits).num_states();
    const double pseudo = 0.5 / static_cast<double>(total_);
    std::vector<double> w(n, pseudo);
    for (const auto& [k, c] : counts_) {
      if (k >= n) throw InvalidArgument("EmpiricalLaw: state index outside the distribution");
      w[k] += static_cast<double>(c);
    }
    return DiscreteDistribution::normalized(num_bits, std::move(w));
  }

 private:
  std::map<std::uint64_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

inline double tv_exact(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("tv_exact: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return std::min(1.0, 0.5 * s);
}

inline double tv_exact(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  return tv_exact(p.probs(), q.probs());
}

inline double tv_plugin(const EmpiricalLaw& samples, const DiscreteDistribution& q) {
  return tv_exact(samples.dense(q.num_bits()), q.probs());
}

/// KL(p || q) in nats; +infinity if p puts mass where q has none.
inline double kl_exact(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InvalidArgument("kl_exact: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

inline double kl_exact(const DiscreteDistribution& p, const DiscreteDistribution& q) {
  return kl_exact(p.probs(), q.probs());
}

/// TV between the cell histogram of `samples` and the cell masses of the
/// analytic `density`. Samples outside the cube and the density's mass
/// outside the cube are compared as one extra "tail" bin. Per-cell masses
/// use 16-point Gauss-Legendre per dimension; practical for d <= 3.
inline double tv_continuous_histogram(std::span<const Point> samples, const Density& density,
                                      const QuantizerSpec& spec) {
  if (samples.empty()) throw InvalidArgument("tv_continuous_histogram: no samples");
  if (spec.d > 3) throw SizeLimitExceeded("tv_continuous_histogram: d must be <= 3");
  const std::vector<double> mass = cell_masses(spec, density);
  double cube_mass = 0.0;
  for (double m : mass) {
    if (!std::isfinite(m)) throw NumericalError("tv_continuous_histogram: integration failed");
    cube_mass += m;
  }
  std::vector<double> hist(mass.size(), 0.0);
  double tail_hits = 0.0;
  const double inv_n = 1.0 / static_cast<double>(samples.size());
  for (const auto& x : samples) {
    bool inside = true;
    for (double xi : x) inside = inside && xi >= -spec.L && xi <= spec.L;
    if (!inside) {
      tail_hits += inv_n;
      continue;
    }
    hist[vbin_encode(spec, quantize_point(spec, x)).index()] += inv_n;
  }
  double s = std::abs(tail_hits - std::max(0.0, 1.0 - cube_mass));
  for (std::size_t c = 0; c < mass.size(); ++c) s += std::abs(hist[c] - mass[c]);
  return std::min(1.0, 0.5 * s);
}

}  // namespace qtd

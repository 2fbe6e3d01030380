#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/rng.hpp"

namespace qtd {

/// Largest D for which dense probability vectors (2^D entries) are built.
inline constexpr std::size_t kMaxDenseBits = 20;
/// Largest D for which dense 2^D x 2^D generators are built.
inline constexpr std::size_t kMaxMatrixBits = 12;

struct ChainSpec {
  std::size_t D = 1;

  explicit ChainSpec(std::size_t num_bits) : D(num_bits) {
    if (num_bits == 0) throw InvalidArgument("ChainSpec: D must be >= 1");
  }
  std::uint64_t num_states() const {
    if (D > kMaxDenseBits) throw SizeLimitExceeded("ChainSpec: dense state space needs D <= 20");
    return std::uint64_t{1} << D;
  }
};

/// Per-bit factors of the forward kernel after time dt: a bit is flipped
/// with probability (1 - e^{-2 dt}) / 2 and kept otherwise.
struct BitKernel {
  double flip;
  double stay;

  static BitKernel after(double dt) {
    const double em1 = std::expm1(-2.0 * dt);  // e^{-2dt} - 1
    return {-0.5 * em1, 1.0 + 0.5 * em1};
  }
};

/// Explicit probability vector over {0,1}^D, indexed little-endian.
class DiscreteDistribution {
 public:
  static constexpr double kNormTolerance = 1e-12;

  DiscreteDistribution(std::size_t num_bits, std::vector<double> probs) : D_(num_bits), probs_(std::move(probs)) {
    if (num_bits == 0 || num_bits > kMaxDenseBits)
      throw SizeLimitExceeded("DiscreteDistribution: need 1 <= D <= 20");
    if (probs_.size() != (std::size_t{1} << num_bits))
      throw InvalidArgument("DiscreteDistribution: probs must have 2^D entries");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("DiscreteDistribution: negative or non-finite entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kNormTolerance) throw InvalidArgument("DiscreteDistribution: probabilities must sum to 1");
  }

  /// Rescales a nonnegative vector to sum to one first.
  static DiscreteDistribution normalized(std::size_t num_bits, std::vector<double> weights) {
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(sum > 0.0)) throw InvalidArgument("DiscreteDistribution::normalized: zero total mass");
    for (double& w : weights) w /= sum;
    return {num_bits, std::move(weights)};
  }

  static DiscreteDistribution uniform(std::size_t num_bits) {
    const std::size_t n = std::size_t{1} << num_bits;
    return {num_bits, std::vector<double>(n, 1.0 / static_cast<double>(n))};
  }

  static DiscreteDistribution point_mass(const BinaryState& y) {
    std::vector<double> p(std::size_t{1} << y.size(), 0.0);
    p[y.index()] = 1.0;
    return {y.size(), std::move(p)};
  }

  std::size_t num_bits() const noexcept { return D_; }
  std::size_t size() const noexcept { return probs_.size(); }
  std::span<const double> probs() const noexcept { return probs_; }
  double operator[](std::uint64_t index) const { return probs_.at(index); }
  double at(const BinaryState& y) const { return probs_.at(y.index()); }

 private:
  std::size_t D_;
  std::vector<double> probs_;
};

/// Weighted set of initial states q_0 with positive weights summing to one.
class EmpiricalInitial {
 public:
  EmpiricalInitial(std::vector<BinaryState> support, std::vector<double> weights)
      : support_(std::move(support)), weights_(std::move(weights)) {
    if (support_.empty()) throw InvalidArgument("EmpiricalInitial: empty support");
    if (support_.size() != weights_.size()) throw InvalidArgument("EmpiricalInitial: support/weight size mismatch");
    D_ = support_.front().size();
    if (D_ == 0) throw InvalidArgument("EmpiricalInitial: D must be >= 1");
    double sum = 0.0;
    for (std::size_t n = 0; n < support_.size(); ++n) {
      if (support_[n].size() != D_) throw InvalidArgument("EmpiricalInitial: states of differing length");
      if (!(weights_[n] > 0.0) || !std::isfinite(weights_[n]))
        throw InvalidArgument("EmpiricalInitial: weights must be positive");
      sum += weights_[n];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("EmpiricalInitial: weights must sum to 1");
    cumulative_.resize(weights_.size());
    std::partial_sum(weights_.begin(), weights_.end(), cumulative_.begin());
  }

  /// Empirical law of a sample; duplicates are merged, first-seen order kept.
  static EmpiricalInitial from_samples(std::span<const BinaryState> samples) {
    if (samples.empty()) throw InvalidArgument("EmpiricalInitial::from_samples: empty input");
    struct Hasher {
      std::size_t operator()(const BinaryState& s) const noexcept { return static_cast<std::size_t>(s.hash()); }
    };
    std::unordered_map<BinaryState, std::size_t, Hasher> slot;
    std::vector<BinaryState> support;
    std::vector<double> counts;
    for (const auto& s : samples) {
      auto [it, inserted] = slot.try_emplace(s, support.size());
      if (inserted) {
        support.push_back(s);
        counts.push_back(0.0);
      }
      counts[it->second] += 1.0;
    }
    for (double& c : counts) c /= static_cast<double>(samples.size());
    return {std::move(support), std::move(counts)};
  }

  /// Support = states with positive probability.
  static EmpiricalInitial from_distribution(const DiscreteDistribution& dist) {
    std::vector<BinaryState> support;
    std::vector<double> w;
    for (std::uint64_t i = 0; i < dist.size(); ++i) {
      if (dist[i] > 0.0) {
        support.push_back(BinaryState::from_index(dist.num_bits(), i));
        w.push_back(dist[i]);
      }
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    return {std::move(support), std::move(w)};
  }

  /// `support_size` distinct uniformly chosen states with Dirichlet(1) weights.
  static EmpiricalInitial random(std::size_t num_bits, std::size_t support_size, Rng& rng) {
    if (num_bits <= kMaxDenseBits && support_size > (std::size_t{1} << num_bits))
      throw InvalidArgument("EmpiricalInitial::random: support larger than state space");
    std::vector<BinaryState> support;
    std::vector<double> w;
    std::exponential_distribution<double> gamma1(1.0);
    while (support.size() < support_size) {
      BinaryState s = BinaryState::random(num_bits, rng);
      if (std::find(support.begin(), support.end(), s) != support.end()) continue;
      support.push_back(std::move(s));
      w.push_back(gamma1(rng) + 1e-3);
    }
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& x : w) x /= sum;
    return {std::move(support), std::move(w)};
  }

  std::size_t num_bits() const noexcept { return D_; }
  std::span<const BinaryState> support() const noexcept { return support_; }
  std::span<const double> weights() const noexcept { return weights_; }

  const BinaryState& draw(Rng& rng) const {
    const double u = std::uniform_real_distribution<double>(0.0, cumulative_.back())(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end()) --it;
    return support_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  DiscreteDistribution to_distribution() const {
    std::vector<double> p(ChainSpec(D_).num_states(), 0.0);
    for (std::size_t n = 0; n < support_.size(); ++n) p[support_[n].index()] += weights_[n];
    return DiscreteDistribution::normalized(D_, std::move(p));
  }

 private:
  std::size_t D_ = 0;
  std::vector<BinaryState> support_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
};

/// Closed-form forward kernel q_{t|s}(to | from): independent bit flips.
inline double transition_prob(std::size_t D, double s, double t, const BinaryState& from, const BinaryState& to) {
  if (t < s) throw InvalidArgument("transition_prob: requires t >= s");
  if (from.size() != D || to.size() != D) throw InvalidArgument("transition_prob: state length != D");
  const BitKernel k = BitKernel::after(t - s);
  const auto h = static_cast<double>(hamming(from, to));
  return std::pow(k.flip, h) * std::pow(k.stay, static_cast<double>(D) - h);
}

inline BinaryState sample_forward(std::size_t D, const BinaryState& y0, double s, double t, Rng& rng) {
  if (t < s) throw InvalidArgument("sample_forward: requires t >= s");
  if (y0.size() != D) throw InvalidArgument("sample_forward: state length != D");
  BinaryState y = y0;
  const double p = BitKernel::after(t - s).flip;
  if (p <= 0.0) return y;
  std::bernoulli_distribution coin(p);
  for (std::size_t i = 0; i < D; ++i)
    if (coin(rng)) y.flip(i);
  return y;
}

/// Applies the forward kernel for time dt to a dense vector in place, one
/// bit at a time (the kernel is a tensor product of 2x2 blocks).
inline void evolve_dense(std::vector<double>& q, std::size_t D, double dt) {
  const BitKernel k = BitKernel::after(dt);
  const std::size_t n = q.size();
  for (std::size_t i = 0; i < D; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t y = 0; y < n; ++y) {
      if (y & bit) continue;
      const double a = q[y];
      const double b = q[y | bit];
      q[y] = k.stay * a + k.flip * b;
      q[y | bit] = k.flip * a + k.stay * b;
    }
  }
}

/// Forward marginal q_t for the chain started from `initial`.
inline DiscreteDistribution marginal_at(const EmpiricalInitial& initial, double t) {
  if (t < 0.0) throw InvalidArgument("marginal_at: t must be >= 0");
  const std::size_t D = initial.num_bits();
  std::vector<double> q(ChainSpec(D).num_states(), 0.0);
  for (std::size_t n = 0; n < initial.support().size(); ++n) q[initial.support()[n].index()] += initial.weights()[n];
  if (t > 0.0) evolve_dense(q, D, t);
  return DiscreteDistribution::normalized(D, std::move(q));
}

inline DiscreteDistribution marginal_at(const DiscreteDistribution& initial, double t) {
  if (t < 0.0) throw InvalidArgument("marginal_at: t must be >= 0");
  std::vector<double> q(initial.probs().begin(), initial.probs().end());
  if (t > 0.0) evolve_dense(q, initial.num_bits(), t);
  return DiscreteDistribution::normalized(initial.num_bits(), std::move(q));
}

/// Generator of the forward chain. Column convention: entry (y, y') is the
/// rate from y' to y, so columns sum to zero and dq/dt = R q.
inline Eigen::MatrixXd dense_rate_matrix(std::size_t D) {
  if (D == 0 || D > kMaxMatrixBits) throw SizeLimitExceeded("dense_rate_matrix: need 1 <= D <= 12");
  const Eigen::Index n = Eigen::Index{1} << D;
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index y = 0; y < n; ++y) {
    R(y, y) = -static_cast<double>(D);
    for (std::size_t i = 0; i < D; ++i) R(y ^ (Eigen::Index{1} << i), y) = 1.0;
  }
  return R;
}

/// KL(dist || uniform) in nats, with 0 ln 0 = 0.
inline double kl_to_uniform(const DiscreteDistribution& dist) {
  const double log_n = static_cast<double>(dist.num_bits()) * std::log(2.0);
  double kl = 0.0;
  for (double p : dist.probs())
    if (p > 0.0) kl += p * (std::log(p) + log_n);
  return std::max(kl, 0.0);
}

}  // namespace qtd

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/hypercube_chain.hpp"
#include "qtd/quadrature.hpp"
#include "qtd/rng.hpp"

namespace qtd {

/// One score request: the ratio q_t(base xor e_flip) / q_t(base) of the
/// reverse-time marginal at reverse time t.
struct ScoreQuery {
  double t = 0.0;
  BinaryState base;
  std::size_t flip_index = 0;
};

/// Source of density ratios v_{t,y}(y xor e_i) for Hamming-1 neighbours.
///
/// Times are reverse-process times in [0, T); the reverse marginal at t is
/// the forward marginal at T - t. Implementations are immutable and safe to
/// share between threads.
class ScoreOracle {
 public:
  virtual ~ScoreOracle() = default;

  virtual std::size_t num_bits() const noexcept = 0;
  virtual double horizon() const noexcept = 0;

  /// Fills out[i] with the ratio for flipping bit i, for every i < D.
  virtual void ratios(double t, const BinaryState& y, std::span<double> out) const = 0;

  virtual double ratio(const ScoreQuery& q) const {
    check(q);
    std::vector<double> all(num_bits());
    ratios(q.t, q.base, all);
    return all[q.flip_index];
  }

 protected:
  void check(const ScoreQuery& q) const {
    if (q.base.size() != num_bits()) throw InvalidArgument("ScoreQuery: state length != D");
    if (q.flip_index >= num_bits()) throw InvalidArgument("ScoreQuery: flip_index out of range");
    check_time(q.t);
  }
  void check_time(double t) const {
    if (!(t >= 0.0) || !(t < horizon())) throw InvalidArgument("ScoreQuery: t must lie in [0, T)");
  }
};

using OraclePtr = std::shared_ptr<const ScoreOracle>;

/// Exact ratios of the forward marginal started from an empirical initial
/// law, evaluated as ratios of mixture sums over the support. Never forms
/// 2^D vectors; each support point is weighted in log space with the
/// largest weight subtracted before exponentiation.
class ExactOracle final : public ScoreOracle {
 public:
  ExactOracle(EmpiricalInitial initial, double T) : initial_(std::move(initial)), T_(T) {
    if (!(T > 0.0)) throw InvalidArgument("ExactOracle: T must be positive");
    log_weights_.reserve(initial_.weights().size());
    for (double w : initial_.weights()) log_weights_.push_back(std::log(w));
  }

  std::size_t num_bits() const noexcept override { return initial_.num_bits(); }
  double horizon() const noexcept override { return T_; }
  const EmpiricalInitial& initial() const noexcept { return initial_; }

  void ratios(double t, const BinaryState& y, std::span<double> out) const override {
    const std::size_t D = num_bits();
    if (y.size() != D || out.size() != D) throw InvalidArgument("ExactOracle::ratios: size mismatch");
    check_time(t);
    const double log_r = log_flip_odds(T_ - t);
    const auto support = initial_.support();

    thread_local std::vector<double> w;
    w.resize(support.size());
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < support.size(); ++n) {
      w[n] = log_weights_[n] - static_cast<double>(hamming(y, support[n])) * log_r;
      max_lw = std::max(max_lw, w[n]);
    }
    std::fill(out.begin(), out.end(), 0.0);
    double total = 0.0;
    const auto yw = y.words();
    for (std::size_t n = 0; n < support.size(); ++n) {
      const double wn = std::exp(w[n] - max_lw);
      total += wn;
      const auto sw = support[n].words();
      for (std::size_t k = 0; k < yw.size(); ++k) {
        std::uint64_t diff = yw[k] ^ sw[k];
        while (diff) {
          const auto b = static_cast<std::size_t>(std::countr_zero(diff));
          out[k * BinaryState::kWordBits + b] += wn;
          diff &= diff - 1;
        }
      }
    }
    finish(out, total, log_r);
  }

  double ratio(const ScoreQuery& q) const override {
    check(q);
    const double log_r = log_flip_odds(T_ - q.t);
    const auto support = initial_.support();
    double max_lw = -std::numeric_limits<double>::infinity();
    std::vector<double> w(support.size());
    for (std::size_t n = 0; n < support.size(); ++n) {
      w[n] = log_weights_[n] - static_cast<double>(hamming(q.base, support[n])) * log_r;
      max_lw = std::max(max_lw, w[n]);
    }
    double total = 0.0;
    double differ = 0.0;
    for (std::size_t n = 0; n < support.size(); ++n) {
      const double wn = std::exp(w[n] - max_lw);
      total += wn;
      if (q.base.get(q.flip_index) != support[n].get(q.flip_index)) differ += wn;
    }
    double out = differ;
    finish(std::span<double>(&out, 1), total, log_r);
    return out;
  }

 private:
  /// ln(stay / flip) of the per-bit kernel after forward time s.
  static double log_flip_odds(double s) {
    const double flip = -0.5 * std::expm1(-2.0 * s);
    const double stay = 1.0 - flip;
    const double log_r = std::log(stay) - std::log(flip);
    if (!std::isfinite(log_r)) throw NumericalError("ExactOracle: forward time too small, ratio underflows");
    return log_r;
  }

  /// Converts per-bit "differs" masses into ratios: points that differ at
  /// bit i gain a factor r = stay/flip when it is flipped, the others lose it.
  static void finish(std::span<double> mass, double total, double log_r) {
    if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("ExactOracle: mixture weights underflow");
    const double r = std::exp(log_r);
    const double inv_r = std::exp(-log_r);
    for (double& a : mass) {
      const double frac = a / total;
      const double v = frac * r + (1.0 - frac) * inv_r;
      if (!(v > 0.0) || !std::isfinite(v)) throw NumericalError("ExactOracle: ratio underflow or overflow");
      a = v;
    }
  }

  EmpiricalInitial initial_;
  double T_;
  std::vector<double> log_weights_;
};

/// Inner oracle times exp(xi), xi uniform in [-noise_scale, noise_scale] and
/// a pure function of (seed, time bucket, state, flip). Time is bucketed into
/// 64 uniform buckets of [0, T).
class PerturbedOracle final : public ScoreOracle {
 public:
  static constexpr std::size_t kTimeBuckets = 64;

  PerturbedOracle(OraclePtr inner, double noise_scale, std::uint64_t seed)
      : inner_(std::move(inner)), noise_scale_(noise_scale), seed_(seed) {
    if (!inner_) throw InvalidArgument("PerturbedOracle: null inner oracle");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
      throw InvalidArgument("PerturbedOracle: noise_scale must be >= 0");
  }

  std::size_t num_bits() const noexcept override { return inner_->num_bits(); }
  double horizon() const noexcept override { return inner_->horizon(); }
  double noise_scale() const noexcept { return noise_scale_; }

  void ratios(double t, const BinaryState& y, std::span<double> out) const override {
    inner_->ratios(t, y, out);
    if (noise_scale_ == 0.0) return;
    const std::uint64_t key = hash_combine(hash_combine(seed_, bucket(t)), y.hash());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::exp(noise(key, i));
  }

  double ratio(const ScoreQuery& q) const override {
    const double v = inner_->ratio(q);
    if (noise_scale_ == 0.0) return v;
    const std::uint64_t key = hash_combine(hash_combine(seed_, bucket(q.t)), q.base.hash());
    return v * std::exp(noise(key, q.flip_index));
  }

  std::uint64_t bucket(double t) const noexcept {
    const auto b = static_cast<std::uint64_t>(std::floor(t / horizon() * static_cast<double>(kTimeBuckets)));
    return std::min<std::uint64_t>(b, kTimeBuckets - 1);
  }

 private:
  double noise(std::uint64_t key, std::size_t flip) const noexcept {
    return noise_scale_ * (2.0 * unit_interval(hash_combine(key, flip)) - 1.0);
  }

  OraclePtr inner_;
  double noise_scale_;
  std::uint64_t seed_;
};

inline std::shared_ptr<PerturbedOracle> perturb(OraclePtr inner, double noise_scale, std::uint64_t seed) {
  return std::make_shared<PerturbedOracle>(std::move(inner), noise_scale, seed);
}

/// Piecewise-constant ratio table over (time bucket x state x flip) for
/// D <= 20. Bucket b covers reverse times [b T / B, (b+1) T / B).
class TabularOracle final : public ScoreOracle {
 public:
  TabularOracle(std::size_t num_bits, double T, std::size_t buckets, std::vector<double> table)
      : D_(num_bits), T_(T), buckets_(buckets), table_(std::move(table)) {
    if (num_bits == 0 || num_bits > kMaxDenseBits) throw SizeLimitExceeded("TabularOracle: need 1 <= D <= 20");
    if (!(T > 0.0) || buckets == 0) throw InvalidArgument("TabularOracle: need T > 0 and buckets >= 1");
    if (table_.size() != buckets * (std::size_t{1} << num_bits) * num_bits)
      throw InvalidArgument("TabularOracle: table size != buckets * 2^D * D");
    for (double v : table_)
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("TabularOracle: ratios must be positive and finite");
  }

  /// Samples `inner` at the midpoint of each bucket.
  static TabularOracle tabulate(const ScoreOracle& inner, std::size_t buckets) {
    const std::size_t D = inner.num_bits();
    const std::uint64_t n = ChainSpec(D).num_states();
    const double T = inner.horizon();
    std::vector<double> table(buckets * n * D);
    std::vector<double> row(D);
    for (std::size_t b = 0; b < buckets; ++b) {
      const double t = (static_cast<double>(b) + 0.5) * T / static_cast<double>(buckets);
      for (std::uint64_t s = 0; s < n; ++s) {
        inner.ratios(t, BinaryState::from_index(D, s), row);
        std::copy(row.begin(), row.end(), table.begin() + static_cast<std::ptrdiff_t>((b * n + s) * D));
      }
    }
    return {D, T, buckets, std::move(table)};
  }

  std::size_t num_bits() const noexcept override { return D_; }
  double horizon() const noexcept override { return T_; }
  std::size_t buckets() const noexcept { return buckets_; }
  std::span<const double> table() const noexcept { return table_; }

  std::size_t bucket(double t) const noexcept {
    const auto b = static_cast<std::size_t>(std::floor(t / T_ * static_cast<double>(buckets_)));
    return std::min(b, buckets_ - 1);
  }

  double at(std::size_t bucket, std::uint64_t state, std::size_t flip) const {
    return table_.at((bucket * (std::size_t{1} << D_) + state) * D_ + flip);
  }

  void ratios(double t, const BinaryState& y, std::span<double> out) const override {
    if (y.size() != D_ || out.size() != D_) throw InvalidArgument("TabularOracle::ratios: size mismatch");
    check_time(t);
    const std::size_t base = (bucket(t) * (std::size_t{1} << D_) + y.index()) * D_;
    std::copy_n(table_.begin() + static_cast<std::ptrdiff_t>(base), D_, out.begin());
  }

 private:
  std::size_t D_;
  double T_;
  std::size_t buckets_;
  std::vector<double> table_;
};

/// Arbitrary ratio function; used for synthetic targets and test doubles.
/// Unlike the other oracles it does not require positive ratios.
class CallbackOracle final : public ScoreOracle {
 public:
  using Fn = std::function<void(double, const BinaryState&, std::span<double>)>;

  CallbackOracle(std::size_t num_bits, double T, Fn fn) : D_(num_bits), T_(T), fn_(std::move(fn)) {}

  static std::shared_ptr<CallbackOracle> constant(std::size_t num_bits, double T, double value) {
    return std::make_shared<CallbackOracle>(num_bits, T, [value](double, const BinaryState&, std::span<double> out) {
      std::fill(out.begin(), out.end(), value);
    });
  }

  std::size_t num_bits() const noexcept override { return D_; }
  double horizon() const noexcept override { return T_; }
  void ratios(double t, const BinaryState& y, std::span<double> out) const override {
    if (y.size() != D_ || out.size() != D_) throw InvalidArgument("CallbackOracle::ratios: size mismatch");
    check_time(t);
    fn_(t, y, out);
  }

 private:
  std::size_t D_;
  double T_;
  Fn fn_;
};

/// Bregman divergence of phi(c) = c ln c: u ln(u/w) - u + w.
inline double bregman_phi(double u, double w) {
  if (!(w > 0.0)) throw InvalidArgument("bregman_phi: estimate must be positive");
  if (u == 0.0) return w;
  return u * std::log(u / w) - u + w;
}

/// Score-entropy loss of `oracle` against the exact forward marginals of
/// `initial`: the integral over forward time of
///   E_{y ~ q_t} sum_i D_phi(q_t(y xor e_i) / q_t(y) || oracle(T - t, y, i)),
/// using the supplied quadrature (nodes in (0, T]).
inline double score_entropy_loss(const ScoreOracle& oracle, const EmpiricalInitial& initial, double T,
                                 const TimeQuadrature& quadrature) {
  const std::size_t D = initial.num_bits();
  if (D > kMaxMatrixBits) throw SizeLimitExceeded("score_entropy_loss: needs D <= 12");
  if (oracle.num_bits() != D) throw InvalidArgument("score_entropy_loss: oracle/initial dimension mismatch");
  const std::uint64_t n = std::uint64_t{1} << D;
  std::vector<double> est(D);
  double loss = 0.0;
  for (std::size_t k = 0; k < quadrature.nodes.size(); ++k) {
    const double t = quadrature.nodes[k];
    if (!(t > 0.0 && t <= T)) throw InvalidArgument("score_entropy_loss: quadrature nodes must lie in (0, T]");
    const DiscreteDistribution q = marginal_at(initial, t);
    double expectation = 0.0;
    for (std::uint64_t y = 0; y < n; ++y) {
      const double qy = q[y];
      if (qy <= 0.0) continue;
      oracle.ratios(T - t, BinaryState::from_index(D, y), est);
      double inner = 0.0;
      for (std::size_t i = 0; i < D; ++i) {
        if (!(est[i] > 0.0) || !std::isfinite(est[i]))
          throw InvalidArgument("score_entropy_loss: oracle returned a nonpositive ratio");
        inner += bregman_phi(q[y ^ (std::uint64_t{1} << i)] / qy, est[i]);
      }
      expectation += qy * inner;
    }
    loss += quadrature.weights[k] * expectation;
  }
  return loss;
}

}  // namespace qtd

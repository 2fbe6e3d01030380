#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/hypercube_chain.hpp"
#include "qtd/quantizer.hpp"
#include "qtd/rng.hpp"
#include "qtd/score_oracle.hpp"

namespace qtd {

/// How the per-segment rate cap beta is computed from the time to horizon.
///   Standard: 2 D / min(1, T - t)
///   Tight:    D (1 + 1 / (T - t))
/// Both dominate the exact total reverse rate D coth(T - t).
enum class BetaMode { Standard, Tight };

enum class InitKind {
  Uniform,        ///< uniform on {0,1}^D
  ExactTerminal,  ///< exact forward marginal at T (needs the initial law)
};

inline double rate_cap(BetaMode mode, std::size_t D, double T, double t) {
  const double s = T - t;
  if (!(s > 0.0)) throw InvalidArgument("rate_cap: requires t < T");
  const auto dd = static_cast<double>(D);
  return mode == BetaMode::Standard ? 2.0 * dd / std::min(1.0, s) : dd * (1.0 + 1.0 / s);
}

/// Grid 0 = t_0 < ... < t_W = T - delta with the cap of segment w evaluated
/// at its right endpoint t_w, which dominates the cap anywhere inside it.
struct TimePartition {
  std::vector<double> times;
  std::vector<double> betas;  ///< betas[w-1] belongs to segment (t_{w-1}, t_w]
  double T = 0.0;
  double delta = 0.0;
  std::size_t D = 0;

  std::size_t num_segments() const noexcept { return betas.size(); }
  double dt(std::size_t w) const { return times.at(w + 1) - times.at(w); }

  /// Expected number of Poisson events, sum_w beta_w (t_w - t_{w-1}).
  double expected_events() const {
    double s = 0.0;
    for (std::size_t w = 0; w < betas.size(); ++w) s += betas[w] * dt(w);
    return s;
  }

  /// 2 D (T + ln(1/delta)).
  double event_bound() const { return 2.0 * static_cast<double>(D) * (T + std::log(1.0 / delta)); }
};

/// Iterates t_{w+1} = (T + 2 t_w) / 3 from 0 while below T - delta, then
/// closes the grid at T - delta.
inline TimePartition build_partition(std::size_t D, double T, double delta, BetaMode mode = BetaMode::Standard) {
  if (D == 0) throw InvalidArgument("build_partition: D must be >= 1");
  if (!(delta > 0.0) || !(delta < T)) throw InvalidArgument("build_partition: requires 0 < delta < T");
  TimePartition p;
  p.T = T;
  p.delta = delta;
  p.D = D;
  const double end = T - delta;
  p.times.push_back(0.0);
  for (double next = T / 3.0; next < end; next = (T + 2.0 * p.times.back()) / 3.0) p.times.push_back(next);
  p.times.push_back(end);
  for (std::size_t w = 1; w < p.times.size(); ++w) p.betas.push_back(rate_cap(mode, D, T, p.times[w]));
  return p;
}

/// T = ln(d / eps) + ln log2 K and delta = eps / (d log2 K).
struct Schedule {
  double T;
  double delta;
};

inline Schedule default_schedule(std::size_t d, std::size_t bits_per_dim, double eps) {
  if (d == 0 || bits_per_dim == 0) throw InvalidArgument("default_schedule: d and log2 K must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("default_schedule: eps must lie in (0,1)");
  const auto dd = static_cast<double>(d);
  const auto m = static_cast<double>(bits_per_dim);
  Schedule s{std::log(dd / eps) + std::log(m), eps / (dd * m)};
  if (!(s.delta < s.T)) throw InvalidArgument("default_schedule: horizon shorter than early-stop gap");
  return s;
}

struct SamplerConfig {
  QuantizerSpec spec;
  double eps = 0.1;
  double T = 1.0;
  double delta = 0.01;
  std::uint64_t seed = 0;
  InitKind init = InitKind::Uniform;
  BetaMode beta_mode = BetaMode::Standard;
  /// Initial law used to draw exact terminal states; required for ExactTerminal.
  std::shared_ptr<const EmpiricalInitial> initial;
  /// Worker threads; 0 means hardware concurrency. Output does not depend on it.
  std::size_t jobs = 1;

  static SamplerConfig with_default_schedule(const QuantizerSpec& spec, double eps, std::uint64_t seed) {
    SamplerConfig c;
    c.spec = spec;
    c.eps = eps;
    const Schedule s = default_schedule(spec.d, spec.m, eps);
    c.T = s.T;
    c.delta = s.delta;
    c.seed = seed;
    return c;
  }
};

struct RunStats {
  std::uint64_t replicas = 0;
  /// Per-neighbour ratio queries: D per Poisson event (or Euler step).
  std::uint64_t score_evals = 0;
  /// Batched oracle calls: one per Poisson event (or Euler step).
  std::uint64_t score_calls = 0;
  /// Poisson events per segment, summed over replicas.
  std::vector<std::uint64_t> poisson_events;
  std::uint64_t accepted_moves = 0;
  std::uint64_t truncation_activations = 0;
  /// Euler steps whose jump probability exceeded one and was clipped.
  std::uint64_t euler_clips = 0;

  std::uint64_t total_events() const noexcept {
    std::uint64_t n = 0;
    for (auto e : poisson_events) n += e;
    return n;
  }
  double mean_events() const noexcept {
    return replicas ? static_cast<double>(total_events()) / static_cast<double>(replicas) : 0.0;
  }
  double mean_score_evals() const noexcept {
    return replicas ? static_cast<double>(score_evals) / static_cast<double>(replicas) : 0.0;
  }

  void merge(const RunStats& o) {
    replicas += o.replicas;
    score_evals += o.score_evals;
    score_calls += o.score_calls;
    if (poisson_events.size() < o.poisson_events.size()) poisson_events.resize(o.poisson_events.size(), 0);
    for (std::size_t w = 0; w < o.poisson_events.size(); ++w) poisson_events[w] += o.poisson_events[w];
    accepted_moves += o.accepted_moves;
    truncation_activations += o.truncation_activations;
    euler_clips += o.euler_clips;
  }
};

/// Scales nonnegative rates in place so their total never exceeds beta.
/// Returns the resulting total; `truncated` reports whether scaling happened.
inline double truncate_rates(std::span<double> rates, double beta, bool& truncated) {
  if (!(beta > 0.0)) throw InvalidArgument("truncate_rates: beta must be positive");
  double total = 0.0;
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw NumericalError("truncate_rates: oracle returned an invalid ratio");
    total += r;
  }
  truncated = total > beta;
  if (truncated) {
    const double scale = beta / total;
    for (double& r : rates) r *= scale;
    total = beta;
  }
  return total;
}

struct TruncatedRates {
  std::vector<double> rates;
  double total = 0.0;
  bool truncated = false;
};

/// Reverse rates to each neighbour of y at reverse time t (forward rate 1 per
/// neighbour, so the raw rate is the oracle ratio), capped to total <= beta.
inline TruncatedRates truncated_rates(const ScoreOracle& oracle, double t, const BinaryState& y, double beta) {
  TruncatedRates out;
  out.rates.resize(oracle.num_bits());
  oracle.ratios(t, y, out.rates);
  out.total = truncate_rates(out.rates, beta, out.truncated);
  return out;
}

namespace detail {

/// Index i with u in [sum_{j<i} rates_j, sum_{j<=i} rates_j). Requires
/// 0 <= u < sum(rates); rounding at the top end falls back to the last
/// positive rate.
inline std::size_t pick_neighbor(std::span<const double> rates, double u) {
  std::size_t last = 0;
  for (std::size_t i = 0; i < rates.size(); ++i) {
    if (rates[i] <= 0.0) continue;
    if (u < rates[i]) return i;
    u -= rates[i];
    last = i;
  }
  return last;
}

/// Resolves one uniformization event at time tau: move to neighbour i with
/// probability rate_i / beta, stay otherwise.
inline void resolve_event(const ScoreOracle& oracle, double tau, BinaryState& z, double beta, Rng& rng,
                          std::vector<double>& rates, RunStats& stats) {
  rates.resize(oracle.num_bits());
  oracle.ratios(tau, z, rates);
  bool truncated = false;
  const double total = truncate_rates(rates, beta, truncated);
  if (total > beta * (1.0 + 1e-12)) throw std::logic_error("uniformization: total rate exceeds cap");
  stats.score_evals += rates.size();
  stats.score_calls += 1;
  if (truncated) ++stats.truncation_activations;
  const double u = std::uniform_real_distribution<double>(0.0, beta)(rng);
  if (u >= total) return;
  z.flip(pick_neighbor(rates, u));
  ++stats.accepted_moves;
}

template <class Fn>
void parallel_chunks(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::thread> workers;
  std::vector<std::exception_ptr> errors(jobs);
  for (std::size_t j = 0; j < jobs; ++j) {
    const std::size_t lo = n * j / jobs;
    const std::size_t hi = n * (j + 1) / jobs;
    workers.emplace_back([&, lo, hi, j] {
      try {
        fn(lo, hi, j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Simulates the reverse chain on [t_lo, t_hi) by uniformization with rate
/// beta: N ~ Poisson(beta (t_hi - t_lo)) sorted uniform event times, each
/// resolved against the truncated rates at that time. Events are added to
/// stats.poisson_events[segment].
inline BinaryState uniformize_segment(const ScoreOracle& oracle, const BinaryState& y_in, double t_lo, double t_hi,
                                      double beta, Rng& rng, RunStats& stats, std::size_t segment = 0) {
  if (!(t_lo < t_hi)) throw InvalidArgument("uniformize_segment: requires t_lo < t_hi");
  if (!(beta > 0.0)) throw InvalidArgument("uniformize_segment: beta must be positive");
  if (y_in.size() != oracle.num_bits()) throw InvalidArgument("uniformize_segment: state length != D");
  if (stats.poisson_events.size() <= segment) stats.poisson_events.resize(segment + 1, 0);

  thread_local std::vector<double> taus;
  thread_local std::vector<double> rates;
  const auto n = std::poisson_distribution<std::uint64_t>(beta * (t_hi - t_lo))(rng);
  stats.poisson_events[segment] += n;
  taus.resize(n);
  std::uniform_real_distribution<double> when(t_lo, t_hi);
  for (auto& tau : taus) tau = when(rng);
  std::stable_sort(taus.begin(), taus.end());

  BinaryState z = y_in;
  for (double tau : taus) detail::resolve_event(oracle, tau, z, beta, rng, rates, stats);
  return z;
}

inline BinaryState initial_state(const SamplerConfig& config, std::size_t D, Rng& rng) {
  if (config.init == InitKind::Uniform) return BinaryState::random(D, rng);
  if (!config.initial) throw InvalidArgument("ExactTerminal init requires SamplerConfig::initial");
  return sample_forward(D, config.initial->draw(rng), 0.0, config.T, rng);
}

struct SampleResult {
  std::vector<BinaryState> states;  ///< discrete terminal states (before dequantization)
  std::vector<Point> points;        ///< continuous samples, one per state
  RunStats stats;
};

namespace detail {

inline void check_run(const SamplerConfig& config, const ScoreOracle& oracle) {
  config.spec.validate();
  if (config.spec.num_bits() != oracle.num_bits()) throw InvalidArgument("sampler: spec d*m != oracle D");
  if (std::abs(oracle.horizon() - config.T) > 1e-12 * std::max(1.0, config.T))
    throw InvalidArgument("sampler: oracle horizon differs from config T");
}

template <class Replica>
SampleResult run_replicas(const SamplerConfig& config, std::size_t n_samples, std::size_t segments,
                          Replica&& replica) {
  SampleResult result;
  result.states.resize(n_samples);
  result.points.resize(n_samples);
  result.stats.poisson_events.assign(segments, 0);
  std::size_t jobs = config.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.jobs;
  jobs = std::max<std::size_t>(1, std::min(jobs, n_samples));
  std::vector<RunStats> partial(jobs);
  for (auto& s : partial) s.poisson_events.assign(segments, 0);
  if (n_samples == 0) return result;
  parallel_chunks(n_samples, jobs, [&](std::size_t lo, std::size_t hi, std::size_t j) {
    for (std::size_t r = lo; r < hi; ++r) {
      Rng rng = replica_rng(config.seed, r);
      result.states[r] = replica(rng, partial[j]);
      result.points[r] = dequantize_sample(config.spec, vbin_decode(config.spec, result.states[r]), rng);
      ++partial[j].replicas;
    }
  });
  for (const auto& s : partial) result.stats.merge(s);
  return result;
}

}  // namespace detail

/// Full reverse-time sampler: initial draw, one uniformization pass per
/// partition segment, then decode and draw a point uniformly in the cell.
inline SampleResult sample(const SamplerConfig& config, const ScoreOracle& oracle, std::size_t n_samples) {
  detail::check_run(config, oracle);
  const std::size_t D = oracle.num_bits();
  const TimePartition part = build_partition(D, config.T, config.delta, config.beta_mode);
  return detail::run_replicas(config, n_samples, part.num_segments(), [&](Rng& rng, RunStats& stats) {
    BinaryState y = initial_state(config, D, rng);
    for (std::size_t w = 0; w < part.num_segments(); ++w)
      y = uniformize_segment(oracle, y, part.times[w], part.times[w + 1], part.betas[w], rng, stats, w);
    return y;
  });
}

/// Exact law of the reverse process at reverse time t: q_{T-t} forward.
inline DiscreteDistribution exact_reverse_marginal(const EmpiricalInitial& initial, double T, double t) {
  if (!(t >= 0.0) || !(t <= T)) throw InvalidArgument("exact_reverse_marginal: requires 0 <= t <= T");
  return marginal_at(initial, T - t);
}

/// Fixed-step baseline on [0, T - delta]: in each step of length h jump to
/// neighbour i with probability h * rate_i (truncated rates at the step's
/// start), or stay. Steps with total jump probability above one are rescaled
/// to one and counted in stats.euler_clips.
inline SampleResult euler_sample(const SamplerConfig& config, const ScoreOracle& oracle, std::size_t n_steps,
                                 std::size_t n_samples) {
  if (n_steps == 0) throw InvalidArgument("euler_sample: n_steps must be >= 1");
  detail::check_run(config, oracle);
  const std::size_t D = oracle.num_bits();
  const double end = config.T - config.delta;
  const double h = end / static_cast<double>(n_steps);
  return detail::run_replicas(config, n_samples, 0, [&](Rng& rng, RunStats& stats) {
    thread_local std::vector<double> rates;
    rates.resize(D);
    BinaryState y = initial_state(config, D, rng);
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double t = h * static_cast<double>(k);
      oracle.ratios(t, y, rates);
      bool truncated = false;
      const double total = truncate_rates(rates, rate_cap(config.beta_mode, D, config.T, t), truncated);
      stats.score_evals += D;
      stats.score_calls += 1;
      if (truncated) ++stats.truncation_activations;
      double jump = h * total;
      double scale = h;
      if (jump > 1.0) {
        ++stats.euler_clips;
        scale = 1.0 / total;
        jump = 1.0;
      }
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      if (u >= jump) continue;
      y.flip(detail::pick_neighbor(rates, u / scale));
      ++stats.accepted_moves;
    }
    return y;
  });
}

}  // namespace qtd

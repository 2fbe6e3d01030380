#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qtd/adjacency_lab.hpp"
#include "qtd/hypercube_chain.hpp"
#include "qtd/io.hpp"
#include "qtd/metrics.hpp"
#include "qtd/quantizer.hpp"
#include "qtd/reverse_sampler.hpp"
#include "qtd/score_oracle.hpp"
#include "qtd/targets.hpp"

namespace qtd::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

/// Shared knobs: replica counts are multiplied by replica_scale.
struct Budget {
  std::uint64_t seed = 20240917;
  double replica_scale = 1.0;
  std::size_t jobs = 1;

  std::size_t scaled(std::size_t n) const {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * replica_scale)));
  }
};

inline std::string format(const CheckResult& r) {
  std::ostringstream os;
  os << (r.passed ? "PASS " : "FAIL ") << r.name << " measured=" << io::format_double(r.measured)
     << " threshold=" << io::format_double(r.threshold);
  if (!r.detail.empty()) os << " (" << r.detail << ')';
  return os.str();
}

namespace detail {

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline EmpiricalInitial random_initial(std::size_t D, Rng& rng, std::size_t max_support = 16) {
  const std::size_t cap = std::min<std::size_t>(max_support, std::size_t{1} << D);
  return EmpiricalInitial::random(D, uniform_int(rng, 1, cap), rng);
}

/// The 6-bit instance shared by several checks: d = 2, K = 8 on [-2, 2]^2
/// and a random 8-point initial law.
struct SixBitInstance {
  QuantizerSpec spec;
  std::shared_ptr<const EmpiricalInitial> initial;
};

inline SixBitInstance six_bit_instance(std::uint64_t seed) {
  Rng rng = replica_rng(seed, 0x5b17);
  return {spec_from_bounds(2, 2.0, 8), std::make_shared<const EmpiricalInitial>(EmpiricalInitial::random(6, 8, rng))};
}

inline SamplerConfig exact_terminal_config(const SixBitInstance& inst, std::uint64_t seed, std::size_t jobs) {
  SamplerConfig c = SamplerConfig::with_default_schedule(inst.spec, 0.1, seed);
  c.init = InitKind::ExactTerminal;
  c.initial = inst.initial;
  c.jobs = jobs;
  return c;
}

struct RandomPartition {
  std::size_t D;
  double T;
  double delta;
};

/// D in [1, 16], T in [0.5, 8], delta log-uniform in [1e-4, min(0.5, T/2)].
inline std::vector<RandomPartition> random_partitions(std::uint64_t seed, std::size_t count) {
  Rng rng = replica_rng(seed, 0xF1F3);
  std::vector<RandomPartition> out;
  for (std::size_t k = 0; k < count; ++k) {
    RandomPartition p;
    p.D = uniform_int(rng, 1, 16);
    p.T = uniform_real(rng, 0.5, 8.0);
    p.delta = std::exp(uniform_real(rng, std::log(1e-4), std::log(std::min(0.5, p.T / 2.0))));
    out.push_back(p);
  }
  return out;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// Closed-form kernel against exp(dt R) for D <= 8.
inline CheckResult kernel_equivalence() {
  double worst = 0.0;
  for (std::size_t D = 1; D <= 8; ++D) {
    const Eigen::MatrixXd R = dense_rate_matrix(D);
    const auto n = static_cast<std::uint64_t>(R.rows());
    for (double dt : {0.01, 0.1, 1.0, 5.0}) {
      const Eigen::MatrixXd P = (dt * R).exp();
      for (std::uint64_t from = 0; from < n; ++from) {
        const BinaryState a = BinaryState::from_index(D, from);
        for (std::uint64_t to = 0; to < n; ++to) {
          const double closed = transition_prob(D, 0.0, dt, a, BinaryState::from_index(D, to));
          worst = std::max(worst, std::abs(closed - P(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from))));
        }
      }
    }
  }
  return {"kernel-expm-equivalence", worst <= 1e-9, worst, 1e-9, "max abs error, D=1..8"};
}

/// KL(q_t || uniform) <= e^{-t} D for random empirical initials.
inline CheckResult kl_decay(const Budget& b) {
  Rng rng = replica_rng(b.seed, 0x2);
  double worst = 0.0;
  bool ok = true;
  for (int k = 0; k < 100; ++k) {
    const std::size_t D = detail::uniform_int(rng, 1, 10);
    const EmpiricalInitial init = detail::random_initial(D, rng, 32);
    for (double t : {0.5, 1.0, 2.0, 4.0}) {
      const double kl = kl_to_uniform(marginal_at(init, t));
      const double bound = std::exp(-t) * static_cast<double>(D);
      ok = ok && kl <= bound;
      worst = std::max(worst, kl / bound);
    }
  }
  return {"forward-kl-decay", ok, worst, 1.0, "max KL / (e^-t D) over 100 initials x 4 times"};
}

/// Exact total reverse rate <= D (1 + 1/(T-t)) <= beta_t, and the sampler
/// never truncates under the exact oracle.
inline CheckResult reverse_rate_bound(const Budget& b) {
  Rng rng = replica_rng(b.seed, 0x3);
  double worst = 0.0;
  bool ok = true;
  std::uint64_t truncations = 0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t D = detail::uniform_int(rng, 1, 8);
    const EmpiricalInitial init = detail::random_initial(D, rng);
    const double T = detail::uniform_real(rng, 0.5, 5.0);
    const double t = detail::uniform_real(rng, 0.0, T);
    const double s = T - t;
    const DiscreteDistribution q = marginal_at(init, s);
    const double cap = static_cast<double>(D) * (1.0 + 1.0 / s);
    const double beta = rate_cap(BetaMode::Standard, D, T, t);
    ok = ok && cap <= beta;
    for (std::uint64_t y = 0; y < q.size(); ++y) {
      double total = 0.0;
      for (std::size_t i = 0; i < D; ++i) total += q[y ^ (std::uint64_t{1} << i)] / q[y];
      ok = ok && total <= cap * (1.0 + 1e-12);
      worst = std::max(worst, total / cap);
    }

    SamplerConfig cfg;
    cfg.spec = spec_from_bounds(1, 1.0, std::uint64_t{1} << D);
    cfg.T = T;
    cfg.delta = std::min(0.01, T / 10.0);
    cfg.seed = b.seed + static_cast<std::uint64_t>(k);
    cfg.jobs = b.jobs;
    const ExactOracle oracle(init, T);
    truncations += sample(cfg, oracle, b.scaled(200)).stats.truncation_activations;
  }
  ok = ok && truncations == 0;
  std::ostringstream os;
  os << "max total rate / D(1+1/(T-t)); truncation_activations=" << truncations;
  return {"reverse-rate-bound", ok, worst, 1.0, os.str()};
}

inline CheckResult partition_invariants(const Budget& b) {
  bool ok = true;
  for (const auto& p : detail::random_partitions(b.seed, 50)) {
    const TimePartition part = build_partition(p.D, p.T, p.delta);
    ok = ok && part.times.front() == 0.0 && part.times.back() == p.T - p.delta;
    for (std::size_t w = 1; w < part.times.size(); ++w) ok = ok && part.times[w] > part.times[w - 1];
    for (double t : part.times) ok = ok && t < p.T;
  }
  return {"partition-invariants", ok, ok ? 1.0 : 0.0, 1.0, "strict increase, t_W = T - delta, t_w < T"};
}

/// sum_w beta_w dt_w <= 2 D (T + ln(1/delta)) over random (T, delta, D).
inline CheckResult event_sum_bound(const Budget& b) {
  double worst = 0.0;
  std::size_t violations = 0;
  detail::RandomPartition worst_case{};
  for (const auto& p : detail::random_partitions(b.seed, 50)) {
    const TimePartition part = build_partition(p.D, p.T, p.delta);
    const double ratio = part.expected_events() / part.event_bound();
    if (ratio > 1.0) ++violations;
    if (ratio > worst) {
      worst = ratio;
      worst_case = p;
    }
  }
  std::ostringstream os;
  os << "max sum(beta dt) / 2D(T+ln(1/delta)); " << violations << "/50 above 1; worst at D=" << worst_case.D
     << " T=" << io::format_double(worst_case.T) << " delta=" << io::format_double(worst_case.delta);
  return {"event-sum-bound", violations == 0, worst, 1.0, os.str()};
}

/// Empirical mean Poisson event count within 3 sigma of sum(beta dt).
inline CheckResult event_counts(const Budget& b) {
  struct Case {
    std::size_t d, K;
    double T, delta;
  };
  const Case cases[] = {{2, 8, 4.0943445622221, 0.1 / 6.0}, {1, 16, 2.0, 0.05}, {2, 32, 3.0, 0.001}};
  Rng rng = replica_rng(b.seed, 0x4C);
  const std::size_t n = b.scaled(10000);
  double worst = 0.0;
  for (const auto& c : cases) {
    SamplerConfig cfg;
    cfg.spec = spec_from_bounds(c.d, 1.0, c.K);
    cfg.T = c.T;
    cfg.delta = c.delta;
    cfg.seed = rng();
    cfg.jobs = b.jobs;
    const std::size_t D = cfg.spec.num_bits();
    const ExactOracle oracle(EmpiricalInitial::random(D, 8, rng), c.T);
    const double lambda = build_partition(D, c.T, c.delta).expected_events();
    const RunStats st = sample(cfg, oracle, n).stats;
    const double z = std::abs(st.mean_events() - lambda) / std::sqrt(lambda / static_cast<double>(n));
    worst = std::max(worst, z);
  }
  return {"event-count-mean", worst <= 3.0, worst, 3.0, "max |mean - sum(beta dt)| / sigma over 3 instances"};
}

/// Plug-in TV of the sampler against q_delta with ExactTerminal init.
inline CheckResult unbiased(const Budget& b) {
  const auto inst = detail::six_bit_instance(b.seed);
  const SamplerConfig cfg = detail::exact_terminal_config(inst, b.seed, b.jobs);
  const ExactOracle oracle(*inst.initial, cfg.T);
  const std::size_t n = b.scaled(200000);
  const SampleResult res = sample(cfg, oracle, n);
  const double tv = tv_plugin(EmpiricalLaw::from_states(res.states), marginal_at(*inst.initial, cfg.delta));
  std::ostringstream os;
  os << "plug-in TV, D=6, " << n << " replicas, truncations=" << res.stats.truncation_activations;
  return {"unbiased-generation", tv <= 0.03, tv, 0.03, os.str()};
}

/// Noise scale at which the perturbed oracle's score-entropy loss equals
/// `target`, found by bisection (the loss is increasing in the scale).
inline double calibrate_noise(const OraclePtr& exact, const EmpiricalInitial& initial, double T, double target,
                              std::uint64_t seed, double& achieved) {
  const TimeQuadrature quad = TimeQuadrature::composite(0.0, T, 4 * PerturbedOracle::kTimeBuckets);
  auto loss = [&](double s) { return score_entropy_loss(*perturb(exact, s, seed), initial, T, quad); };
  double lo = 0.0;
  double hi = 0.5;
  while (loss(hi) < target) {
    hi *= 2.0;
    if (hi > 64.0) throw NumericalError("calibrate_noise: target loss unreachable");
  }
  for (int it = 0; it < 60 && hi - lo > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    (loss(mid) < target ? lo : hi) = mid;
  }
  achieved = loss(hi);
  return hi;
}

/// KL(q_delta || smoothed sampler law) <= init KL + (T - delta) eps^2 + 0.02
/// for a perturbed oracle whose measured loss is eps^2.
inline std::vector<CheckResult> robustness(const Budget& b) {
  const auto inst = detail::six_bit_instance(b.seed);
  const SamplerConfig cfg = detail::exact_terminal_config(inst, b.seed, b.jobs);
  const auto exact = std::make_shared<const ExactOracle>(*inst.initial, cfg.T);
  const DiscreteDistribution target = marginal_at(*inst.initial, cfg.delta);
  const std::size_t n = b.scaled(1000000);
  std::vector<CheckResult> out;
  for (double eps2 : {0.01, 0.04}) {
    double measured_loss = 0.0;
    const double scale = calibrate_noise(exact, *inst.initial, cfg.T, eps2, b.seed ^ 0xA4, measured_loss);
    const auto oracle = perturb(exact, scale, b.seed ^ 0xA4);
    const SampleResult res = sample(cfg, *oracle, n);
    const double kl = kl_exact(target, EmpiricalLaw::from_states(res.states).smoothed(6));
    const double bound = (cfg.T - cfg.delta) * eps2 + 0.02;
    std::ostringstream os;
    os << "smoothed KL, init KL=0, noise_scale=" << io::format_double(scale)
       << ", L_SE=" << io::format_double(measured_loss) << ", " << n << " replicas";
    out.push_back({"kl-robustness-eps2=" + io::format_double(eps2), kl <= bound, kl, bound, os.str()});
  }
  return out;
}

/// TV(q_0, q_delta) <= 1 - e^{-delta D}, computed densely.
inline CheckResult early_stop(const Budget& b) {
  Rng rng = replica_rng(b.seed, 0x7);
  double worst = 0.0;
  bool ok = true;
  for (std::size_t D = 1; D <= 10; ++D) {
    std::vector<EmpiricalInitial> inits;
    inits.emplace_back(std::vector<BinaryState>{BinaryState(D)}, std::vector<double>{1.0});
    for (int k = 0; k < 5; ++k) inits.push_back(detail::random_initial(D, rng));
    for (const auto& init : inits) {
      const DiscreteDistribution q0 = init.to_distribution();
      for (double delta : {0.001, 0.01, 0.1}) {
        const double tv = tv_exact(q0, marginal_at(init, delta));
        const double bound = -std::expm1(-delta * static_cast<double>(D));
        ok = ok && tv <= bound;
        worst = std::max(worst, tv / bound);
      }
    }
  }
  return {"early-stop-tv", ok, worst, 1.0, "max TV / (1 - e^{-delta D}), D=1..10"};
}

/// Two-component 1D mixture, K = 64 on [-4, 4], exact oracle of the cell
/// histogram, uniform init: histogram TV against the analytic density.
inline CheckResult end_to_end(const Budget& b) {
  const GaussianMixture gmm({0.5, 0.5}, {{-1.5}, {1.5}}, {0.5, 0.5});
  const QuantizerSpec spec = spec_from_bounds(1, 4.0, 64);
  const Density density = gmm.density();
  const auto initial = EmpiricalInitial::from_distribution(
      DiscreteDistribution::normalized(spec.num_bits(), cell_masses(spec, density)));
  SamplerConfig cfg = SamplerConfig::with_default_schedule(spec, 0.1, b.seed);
  cfg.jobs = b.jobs;
  const ExactOracle oracle(initial, cfg.T);
  const std::size_t n = b.scaled(200000);
  const SampleResult res = sample(cfg, oracle, n);
  const double tv = tv_continuous_histogram(res.points, density, spec);
  const double threshold = 5 * 0.1 + 0.03;
  std::ostringstream os;
  os << "histogram TV, K=64, L=4, " << n << " samples";
  return {"end-to-end-mixture", tv <= threshold, tv, threshold, os.str()};
}

/// Growth of the per-replica oracle cost in D at eps = 0.1. One oracle call
/// returns all D neighbour ratios and counts as one score evaluation here;
/// the per-neighbour count is reported alongside.
inline std::vector<CheckResult> complexity(const Budget& b) {
  constexpr double eps = 0.1;
  constexpr double c = 4.0;
  Rng rng = replica_rng(b.seed, 0x9);
  std::vector<double> lx, ly, ly_neighbour;
  double worst = 0.0;
  std::ostringstream os;
  for (std::size_t D : {4, 8, 12, 16}) {
    SamplerConfig cfg = SamplerConfig::with_default_schedule(spec_from_bounds(1, 1.0, std::uint64_t{1} << D), eps, rng());
    cfg.jobs = b.jobs;
    const ExactOracle oracle(EmpiricalInitial::random(D, 16, rng), cfg.T);
    const RunStats st = sample(cfg, oracle, b.scaled(10000)).stats;
    const double calls = static_cast<double>(st.score_calls) / static_cast<double>(st.replicas);
    const double x = static_cast<double>(D) * std::pow(std::log(static_cast<double>(D) / eps), 2);
    lx.push_back(std::log(x));
    ly.push_back(std::log(calls));
    ly_neighbour.push_back(std::log(st.mean_score_evals()));
    worst = std::max(worst, calls / x);
    os << "D=" << D << ":" << io::format_double(calls) << " ";
  }
  auto slope = [&](const std::vector<double>& y) {
    const double mx = detail::mean(lx), my = detail::mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (y[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
  };
  const double k = slope(ly);
  os << "calls/replica; per-neighbour slope=" << io::format_double(slope(ly_neighbour));
  return {
      {"complexity-exponent", k >= 0.8 && k <= 1.2, k, 1.2, "log-log slope in [0.8, 1.2]; " + os.str()},
      {"complexity-constant", worst <= c, worst, c, "max calls / (D ln^2(D/eps))"},
  };
}

/// Score evaluations the Euler baseline needs to match the plug-in TV of
/// uniformization on the 6-bit instance, relative to uniformization.
inline CheckResult baseline(const Budget& b) {
  const auto inst = detail::six_bit_instance(b.seed);
  const std::size_t n = b.scaled(20000);
  constexpr int kSeeds = 3;
  std::vector<double> unif_tv;
  double unif_evals = 0.0;
  std::vector<SamplerConfig> cfgs;
  for (int s = 0; s < kSeeds; ++s) cfgs.push_back(detail::exact_terminal_config(inst, b.seed + 101 * s, b.jobs));
  const DiscreteDistribution target = marginal_at(*inst.initial, cfgs[0].delta);
  const ExactOracle oracle(*inst.initial, cfgs[0].T);
  for (const auto& cfg : cfgs) {
    const SampleResult r = sample(cfg, oracle, n);
    unif_tv.push_back(tv_plugin(EmpiricalLaw::from_states(r.states), target));
    unif_evals += r.stats.mean_score_evals() / kSeeds;
  }
  const double goal = detail::mean(unif_tv);
  constexpr std::size_t kMaxSteps = 16384;
  std::size_t steps = 8;
  double euler_tv = 1.0;
  for (; steps <= kMaxSteps; steps *= 2) {
    std::vector<double> tv;
    for (const auto& cfg : cfgs) {
      const SampleResult r = euler_sample(cfg, oracle, steps, n);
      tv.push_back(tv_plugin(EmpiricalLaw::from_states(r.states), target));
    }
    euler_tv = detail::mean(tv);
    if (euler_tv <= goal) break;
  }
  const bool reached = steps <= kMaxSteps;
  const double euler_evals = static_cast<double>(std::min(steps, kMaxSteps) * 6);
  const double ratio = euler_evals / unif_evals;
  std::ostringstream os;
  os << "uniformization TV=" << io::format_double(goal) << " at " << io::format_double(unif_evals)
     << " evals/replica; Euler " << (reached ? "" : "did not reach it by ") << steps << " steps, TV="
     << io::format_double(euler_tv);
  return {"euler-vs-uniformization-cost", ratio >= 4.0, ratio, 4.0, os.str()};
}

/// Diameter/degree table and mixing-time ordering of the three structures.
inline CheckResult adjacency() {
  bool ok = true;
  auto expect = [&](const AdjacencyKind& k, std::size_t diam, std::size_t deg) {
    const GraphReport r = graph_report(k);
    ok = ok && r.diameter == diam && r.max_out_degree == deg;
  };
  expect(AdjacencyKind::tridiagonal(8), 7, 2);
  expect(AdjacencyKind::dense(8), 1, 7);
  expect(AdjacencyKind::hypercube(3), 3, 3);
  std::ostringstream os;
  for (std::size_t D : {3, 4, 5}) {
    const std::size_t n = std::size_t{1} << D;
    const double td = mixing_time(AdjacencyKind::dense(n));
    const double th = mixing_time(AdjacencyKind::hypercube(D));
    const double tt = mixing_time(AdjacencyKind::tridiagonal(n));
    ok = ok && td <= th && th <= tt;
    os << "n=" << n << ": " << io::format_double(td) << "/" << io::format_double(th) << "/" << io::format_double(tt)
       << " ";
  }
  os << "(dense/hypercube/tridiagonal mixing times)";
  return {"adjacency-structure", ok, ok ? 1.0 : 0.0, 1.0, os.str()};
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"kernel",     "kl-decay",   "beta-bound", "partition", "events",
                                                 "unbiased",   "robustness", "early-stop", "adjacency"};
  return names;
}

inline std::vector<CheckResult> run_suite(const std::string& name, const Budget& b) {
  if (name == "kernel") return {kernel_equivalence()};
  if (name == "kl-decay") return {kl_decay(b)};
  if (name == "beta-bound") return {reverse_rate_bound(b)};
  if (name == "partition") return {partition_invariants(b), event_sum_bound(b)};
  if (name == "events") {
    std::vector<CheckResult> r{event_counts(b)};
    for (auto& c : complexity(b)) r.push_back(std::move(c));
    r.push_back(baseline(b));
    return r;
  }
  if (name == "unbiased") return {unbiased(b), end_to_end(b)};
  if (name == "robustness") return robustness(b);
  if (name == "early-stop") return {early_stop(b)};
  if (name == "adjacency") return {adjacency()};
  std::string valid;
  for (const auto& n : suite_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw InvalidArgument("unknown suite '" + name + "'; valid suites: " + valid);
}

inline constexpr int kNumCriteria = 11;

inline std::vector<CheckResult> run_criterion(int id, const Budget& b) {
  switch (id) {
    case 1: return {kernel_equivalence()};
    case 2: return {kl_decay(b)};
    case 3: return {reverse_rate_bound(b)};
    case 4: return {partition_invariants(b), event_sum_bound(b), event_counts(b)};
    case 5: return {unbiased(b)};
    case 6: return robustness(b);
    case 7: return {early_stop(b)};
    case 8: return {end_to_end(b)};
    case 9: return complexity(b);
    case 10: return {baseline(b)};
    case 11: return {adjacency()};
    default: throw InvalidArgument("criterion id must lie in 1..11");
  }
}

}  // namespace qtd::verify

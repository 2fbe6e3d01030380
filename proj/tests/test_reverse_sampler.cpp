#include <gtest/gtest.h>

#include <cmath>

#include "qtd/metrics.hpp"
#include "qtd/reverse_sampler.hpp"

using namespace qtd;

namespace {

BinaryState idx(std::size_t D, std::uint64_t i) { return BinaryState::from_index(D, i); }

/// Classical RK4 on the reverse master equation dp/dt = R_t p, with reverse
/// rates read from `oracle`. Independent of the uniformization machinery.
std::vector<double> integrate_reverse(const ScoreOracle& oracle, std::vector<double> p, double t0, double t1,
                                      std::size_t steps) {
  const std::size_t D = oracle.num_bits();
  const std::size_t n = p.size();
  auto deriv = [&](double t, const std::vector<double>& x) {
    std::vector<double> dx(n, 0.0), r(D);
    for (std::uint64_t y = 0; y < n; ++y) {
      oracle.ratios(t, idx(D, y), r);
      for (std::size_t i = 0; i < D; ++i) {
        dx[y] -= r[i] * x[y];
        dx[y ^ (std::uint64_t{1} << i)] += r[i] * x[y];
      }
    }
    return dx;
  };
  const double h = (t1 - t0) / static_cast<double>(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = t0 + h * static_cast<double>(k);
    auto axpy = [&](const std::vector<double>& a, double c) {
      std::vector<double> out(p);
      for (std::size_t j = 0; j < n; ++j) out[j] += c * a[j];
      return out;
    };
    const auto k1 = deriv(t, p);
    const auto k2 = deriv(t + h / 2, axpy(k1, h / 2));
    const auto k3 = deriv(t + h / 2, axpy(k2, h / 2));
    const auto k4 = deriv(t + h, axpy(k3, h));
    for (std::size_t j = 0; j < n; ++j) p[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return p;
}

SamplerConfig config_for(std::size_t D, double T, double delta, std::uint64_t seed) {
  SamplerConfig c;
  c.spec = spec_from_bounds(1, 1.0, std::uint64_t{1} << D);
  c.T = T;
  c.delta = delta;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Partition, RecurrenceFromZero) {
  const TimePartition p = build_partition(2, 3.0, 0.05);
  ASSERT_EQ(p.times.size(), 12u);
  EXPECT_EQ(p.times[0], 0.0);
  EXPECT_DOUBLE_EQ(p.times[1], 1.0);
  EXPECT_DOUBLE_EQ(p.times[2], 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(p.times[3], 19.0 / 9.0);
  EXPECT_EQ(p.times.back(), 3.0 - 0.05);
  for (std::size_t w = 1; w < p.times.size(); ++w) EXPECT_GT(p.times[w], p.times[w - 1]);
  ASSERT_EQ(p.betas.size(), 11u);
  for (std::size_t w = 0; w < p.betas.size(); ++w)
    EXPECT_DOUBLE_EQ(p.betas[w], 4.0 / std::min(1.0, 3.0 - p.times[w + 1]));
}

// Frozen from an independent high-precision evaluation of the same sum.
TEST(Partition, EventSumExample) {
  const TimePartition p = build_partition(2, 3.0, 0.05);
  EXPECT_NEAR(p.expected_events(), 22.828633846466494, 1e-12);
  EXPECT_NEAR(p.event_bound(), 23.982929094215964, 1e-12);
  EXPECT_LE(p.expected_events(), p.event_bound());
}

TEST(Partition, Validation) {
  EXPECT_THROW(build_partition(2, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(build_partition(2, 1.0, 0.0), InvalidArgument);
  EXPECT_THROW(build_partition(0, 1.0, 0.1), InvalidArgument);
  const TimePartition tight = build_partition(3, 2.0, 0.1, BetaMode::Tight);
  EXPECT_DOUBLE_EQ(tight.betas.back(), 3.0 * (1.0 + 1.0 / 0.1));
}

TEST(Schedule, DefaultValues) {
  const Schedule s = default_schedule(2, 3, 0.1);
  EXPECT_NEAR(s.T, std::log(60.0), 1e-14);
  EXPECT_NEAR(s.delta, 1.0 / 60.0, 1e-16);
  EXPECT_THROW(default_schedule(1, 1, 1.0), InvalidArgument);
}

TEST(TruncateRates, BelowCapUnchanged) {
  std::vector<double> r = {3.0, 5.0};
  bool truncated = true;
  EXPECT_EQ(truncate_rates(r, 10.0, truncated), 8.0);
  EXPECT_FALSE(truncated);
  EXPECT_EQ(r, (std::vector<double>{3.0, 5.0}));
}

TEST(TruncateRates, AboveCapScaled) {
  std::vector<double> r = {12.0, 8.0};
  bool truncated = false;
  EXPECT_EQ(truncate_rates(r, 10.0, truncated), 10.0);
  EXPECT_TRUE(truncated);
  EXPECT_DOUBLE_EQ(r[0], 6.0);
  EXPECT_DOUBLE_EQ(r[1], 4.0);
  std::vector<double> bad = {1.0, std::nan("")};
  EXPECT_THROW(truncate_rates(bad, 10.0, truncated), NumericalError);
}

TEST(TruncatedRates, ExactOracleNeverTruncates) {
  Rng rng(1);
  for (std::size_t D = 1; D <= 8; ++D) {
    const EmpiricalInitial init = EmpiricalInitial::random(D, std::min<std::size_t>(5, 1u << D), rng);
    const ExactOracle o(init, 2.0);
    for (double t : {0.0, 1.0, 1.9, 1.999}) {
      const double beta = rate_cap(BetaMode::Standard, D, 2.0, t);
      for (std::uint64_t y = 0; y < (1u << D); ++y) {
        const TruncatedRates r = truncated_rates(o, t, idx(D, y), beta);
        EXPECT_FALSE(r.truncated);
        EXPECT_LE(r.total, D * (1.0 + 1.0 / (2.0 - t)) * (1 + 1e-12));
      }
    }
  }
}

TEST(UniformizeSegment, NoEventsKeepsState) {
  const auto one = CallbackOracle::constant(4, 1.0, 1.0);
  Rng rng(2);
  RunStats st;
  const BinaryState y = idx(4, 9);
  EXPECT_EQ(uniformize_segment(*one, y, 0.0, 1e-15, 1.0, rng, st), y);
  EXPECT_EQ(st.total_events(), 0u);
  EXPECT_EQ(st.score_evals, 0u);
  EXPECT_THROW(uniformize_segment(*one, y, 0.5, 0.5, 1.0, rng, st), InvalidArgument);
}

TEST(UniformizeSegment, UnitOracleFlipFrequency) {
  const std::size_t D = 4;
  const double beta = 10.0;
  const auto one = CallbackOracle::constant(D, 1.0, 1.0);
  Rng rng(3);
  RunStats st;
  BinaryState y(D);
  while (st.total_events() < 100000) y = uniformize_segment(*one, y, 0.0, 0.9, beta, rng, st);
  const double n = static_cast<double>(st.total_events());
  const double p = D / beta;
  EXPECT_NEAR(st.accepted_moves / n, p, 4.0 * std::sqrt(p * (1 - p) / n));
  EXPECT_EQ(st.score_evals, st.total_events() * D);
  EXPECT_EQ(st.score_calls, st.total_events());
}

TEST(UniformizeSegment, MatchesMasterEquation) {
  const std::size_t D = 4;
  Rng rng(4);
  const EmpiricalInitial init = EmpiricalInitial::random(D, 4, rng);
  const double T = 1.5;
  const ExactOracle o(init, T);
  const BinaryState y0 = idx(D, 0b1010);
  const double t_lo = 0.6, t_hi = 1.2;
  const double beta = rate_cap(BetaMode::Standard, D, T, t_hi);
  EmpiricalLaw law;
  RunStats st;
  for (std::uint64_t r = 0; r < 100000; ++r) {
    Rng rr = replica_rng(77, r);
    law.add(uniformize_segment(o, y0, t_lo, t_hi, beta, rr, st).index());
  }
  std::vector<double> p0(16, 0.0);
  p0[y0.index()] = 1.0;
  const auto p = integrate_reverse(o, p0, t_lo, t_hi, 400);
  EXPECT_LE(tv_plugin(law, DiscreteDistribution::normalized(D, p)), 0.02);
  EXPECT_EQ(st.truncation_activations, 0u);
}

TEST(Sample, ZeroSamples) {
  const auto one = CallbackOracle::constant(3, 2.0, 1.0);
  const SampleResult r = sample(config_for(3, 2.0, 0.1, 1), *one, 0);
  EXPECT_TRUE(r.states.empty());
  EXPECT_EQ(r.stats.replicas, 0u);
  EXPECT_EQ(r.stats.total_events(), 0u);
  EXPECT_EQ(r.stats.score_evals, 0u);
}

TEST(Sample, MeanEventsWithinPoissonBound) {
  const std::size_t n = 5000;
  Rng rng(5);
  const SamplerConfig c = config_for(5, 3.0, 0.01, 6);
  const ExactOracle o(EmpiricalInitial::random(5, 6, rng), 3.0);
  const SampleResult r = sample(c, o, n);
  const double lambda = build_partition(5, 3.0, 0.01).expected_events();
  EXPECT_LE(r.stats.mean_events(), lambda + 3.0 * std::sqrt(lambda / n));
  EXPECT_GE(r.stats.mean_events(), lambda - 3.0 * std::sqrt(lambda / n));
  EXPECT_GE(r.stats.score_evals, r.stats.accepted_moves);
  EXPECT_EQ(r.stats.truncation_activations, 0u);
  EXPECT_EQ(r.points.size(), n);
}

TEST(Sample, SixBitDefaultScheduleIsClose) {
  Rng rng(7);
  const auto init = EmpiricalInitial::random(6, 8, rng);
  const SamplerConfig c = SamplerConfig::with_default_schedule(spec_from_bounds(2, 2.0, 8), 0.1, 8);
  const ExactOracle o(init, c.T);
  const SampleResult r = sample(c, o, 200000);
  EXPECT_LE(tv_plugin(EmpiricalLaw::from_states(r.states), marginal_at(init, c.delta)), 0.05);
}

TEST(Sample, DeterministicAcrossJobCounts) {
  Rng rng(9);
  const ExactOracle o(EmpiricalInitial::random(6, 5, rng), 2.0);
  SamplerConfig c = config_for(6, 2.0, 0.02, 10);
  const SampleResult a = sample(c, o, 3000);
  c.jobs = 3;
  const SampleResult b = sample(c, o, 3000);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.stats.poisson_events, b.stats.poisson_events);
  EXPECT_EQ(a.stats.score_evals, b.stats.score_evals);
  EXPECT_EQ(a.stats.accepted_moves, b.stats.accepted_moves);
}

TEST(Sample, RejectsMismatchedOracle) {
  const auto one = CallbackOracle::constant(3, 2.0, 1.0);
  EXPECT_THROW(sample(config_for(4, 2.0, 0.1, 1), *one, 1), InvalidArgument);
  EXPECT_THROW(sample(config_for(3, 2.5, 0.1, 1), *one, 1), InvalidArgument);
  SamplerConfig c = config_for(3, 2.0, 0.1, 1);
  c.init = InitKind::ExactTerminal;
  EXPECT_THROW(sample(c, *one, 1), InvalidArgument);
}

TEST(ExactReverseMarginal, EndpointsAndMasterEquation) {
  Rng rng(11);
  const std::size_t D = 5;
  const EmpiricalInitial init = EmpiricalInitial::random(D, 4, rng);
  EXPECT_LE(tv_exact(exact_reverse_marginal(init, 2.0, 2.0), init.to_distribution()), 1e-15);
  EXPECT_LE(tv_exact(exact_reverse_marginal(init, 20.0, 0.0), DiscreteDistribution::uniform(D)), 1e-12);
  EXPECT_THROW(exact_reverse_marginal(init, 2.0, 2.5), InvalidArgument);

  const double T = 2.0;
  const ExactOracle o(init, T);
  const DiscreteDistribution start = exact_reverse_marginal(init, T, 0.0);
  std::vector<double> p(start.probs().begin(), start.probs().end());
  p = integrate_reverse(o, p, 0.0, 1.5, 3000);
  const DiscreteDistribution target = exact_reverse_marginal(init, T, 1.5);
  for (std::uint64_t y = 0; y < target.size(); ++y) EXPECT_NEAR(p[y], target[y], 1e-6);
}

TEST(Euler, ZeroRatesKeepInitialState) {
  const auto zero = CallbackOracle::constant(4, 2.0, 0.0);
  const SamplerConfig c = config_for(4, 2.0, 0.1, 12);
  const SampleResult r = euler_sample(c, *zero, 1, 50);
  for (std::size_t k = 0; k < 50; ++k) {
    Rng rng = replica_rng(12, k);
    EXPECT_EQ(r.states[k], initial_state(c, 4, rng));
  }
  EXPECT_EQ(r.stats.score_evals, 50u * 4u);
  EXPECT_EQ(r.stats.accepted_moves, 0u);
  EXPECT_THROW(euler_sample(c, *zero, 0, 1), InvalidArgument);
}

TEST(Euler, ErrorShrinksWithMoreSteps) {
  Rng rng(13);
  auto init = std::make_shared<const EmpiricalInitial>(EmpiricalInitial::random(4, 3, rng));
  SamplerConfig c = config_for(4, 2.5, 0.05, 0);
  c.init = InitKind::ExactTerminal;
  c.initial = init;
  const ExactOracle o(*init, c.T);
  const DiscreteDistribution target = marginal_at(*init, c.delta);
  double prev = 1.0;
  for (std::size_t steps : {2, 8, 64}) {
    double tv = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      c.seed = 100 + seed;
      tv += tv_plugin(EmpiricalLaw::from_states(euler_sample(c, o, steps, 20000).states), target) / 3;
    }
    EXPECT_LT(tv, prev) << steps << " steps";
    prev = tv;
  }
}

TEST(Euler, SmallStepsAgreeWithUniformization) {
  Rng rng(14);
  auto init = std::make_shared<const EmpiricalInitial>(EmpiricalInitial::random(4, 3, rng));
  SamplerConfig c = config_for(4, 2.0, 0.05, 15);
  const ExactOracle o(*init, c.T);
  const SampleResult u = sample(c, o, 100000);
  c.seed = 16;
  const SampleResult e = euler_sample(c, o, 256, 100000);
  const DiscreteDistribution pu = EmpiricalLaw::from_states(u.states).smoothed(4);
  EXPECT_LE(tv_plugin(EmpiricalLaw::from_states(e.states), pu), 0.03);
  EXPECT_EQ(e.stats.score_evals, 100000u * 256u * 4u);
}

TEST(Euler, ClipsOversizedSteps) {
  const auto big = CallbackOracle::constant(3, 2.0, 5.0);
  const SampleResult r = euler_sample(config_for(3, 2.0, 0.1, 1), *big, 1, 20);
  EXPECT_EQ(r.stats.euler_clips, 20u);
  EXPECT_EQ(r.stats.accepted_moves, 20u);
}

TEST(RunStats, MergeAddsCounters) {
  RunStats a, b;
  a.replicas = 2;
  a.poisson_events = {1, 2};
  a.score_evals = 10;
  b.replicas = 3;
  b.poisson_events = {4, 5, 6};
  b.score_evals = 5;
  b.truncation_activations = 1;
  a.merge(b);
  EXPECT_EQ(a.replicas, 5u);
  EXPECT_EQ(a.poisson_events, (std::vector<std::uint64_t>{5, 7, 6}));
  EXPECT_EQ(a.total_events(), 18u);
  EXPECT_EQ(a.score_evals, 15u);
  EXPECT_EQ(a.truncation_activations, 1u);
  EXPECT_DOUBLE_EQ(a.mean_events(), 3.6);
}

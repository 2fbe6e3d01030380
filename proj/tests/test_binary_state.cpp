#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "qtd/binary_state.hpp"
#include "qtd/quadrature.hpp"
#include "qtd/rng.hpp"

using namespace qtd;

TEST(BinaryState, IndexRoundTrip) {
  for (std::uint64_t i = 0; i < 64; ++i) EXPECT_EQ(BinaryState::from_index(6, i).index(), i);
  EXPECT_THROW(BinaryState::from_index(3, 8), InvalidArgument);
  EXPECT_THROW(BinaryState::from_index(64, 0), InvalidArgument);
}

TEST(BinaryState, LittleEndianBits) {
  const std::uint8_t bits[] = {1, 1, 0, 1};
  const BinaryState s = BinaryState::from_bits(bits);
  EXPECT_EQ(s.index(), 0b1011u);
  EXPECT_EQ(s.to_string(), "1101");
  EXPECT_EQ(s.popcount(), 3u);
  const std::uint8_t bad[] = {0, 2};
  EXPECT_THROW(BinaryState::from_bits(bad), InvalidArgument);
}

TEST(BinaryState, FlipAndHammingAcrossWords) {
  BinaryState a(130);
  BinaryState b = a;
  b.flip(0);
  b.flip(64);
  b.flip(129);
  EXPECT_EQ(hamming(a, b), 3u);
  EXPECT_TRUE(b.get(129));
  EXPECT_EQ(a.flipped(64).flipped(64), a);
  EXPECT_THROW((void)a.index(), SizeLimitExceeded);
  EXPECT_THROW(hamming(a, BinaryState(3)), InvalidArgument);
}

TEST(BinaryState, RandomMasksUnusedBits) {
  Rng rng(5);
  for (int k = 0; k < 100; ++k) {
    const BinaryState s = BinaryState::random(70, rng);
    EXPECT_EQ(s.words()[1] >> 6, 0u);
  }
}

TEST(BinaryState, HashSeparatesStates) {
  std::set<std::uint64_t> hashes;
  for (std::uint64_t i = 0; i < 256; ++i) hashes.insert(BinaryState::from_index(8, i).hash());
  EXPECT_EQ(hashes.size(), 256u);
  EXPECT_NE(BinaryState(3).hash(), BinaryState(4).hash());
}

TEST(Rng, ReplicaStreamsAreReproducible) {
  Rng a = replica_rng(7, 3);
  Rng b = replica_rng(7, 3);
  Rng c = replica_rng(7, 4);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_GE(unit_interval(~0ULL), 0.0);
  EXPECT_LT(unit_interval(~0ULL), 1.0);
}

TEST(Quadrature, GaussLegendreWeightsAndExactness) {
  const auto& g7 = GaussLegendre<7>::instance();
  const auto& g16 = GaussLegendre<16>::instance();
  double w7 = 0.0, w16 = 0.0;
  for (double w : g7.weights) w7 += w;
  for (double w : g16.weights) w16 += w;
  EXPECT_NEAR(w7, 2.0, 1e-14);
  EXPECT_NEAR(w16, 2.0, 1e-14);
  // An n-point rule integrates degree 2n-1 exactly: int_{-1}^{1} x^12 = 2/13.
  double s = 0.0;
  for (std::size_t k = 0; k < 7; ++k) s += g7.weights[k] * std::pow(g7.nodes[k], 12);
  EXPECT_NEAR(s, 2.0 / 13.0, 1e-14);
}

TEST(Quadrature, BoxAndCompositeRules) {
  const double lo[] = {0.0, -1.0};
  const double hi[] = {1.0, 2.0};
  const double v = integrate_box([](std::span<const double> x) { return x[0] * x[0] * x[1]; },
                                 std::span<const double>(lo), std::span<const double>(hi));
  EXPECT_NEAR(v, (1.0 / 3.0) * 1.5, 1e-13);

  const TimeQuadrature q = TimeQuadrature::composite(0.0, 2.0, 5);
  ASSERT_EQ(q.nodes.size(), 20u);
  double e = 0.0;
  for (std::size_t k = 0; k < q.nodes.size(); ++k) {
    EXPECT_GT(q.nodes[k], 0.0);
    EXPECT_LT(q.nodes[k], 2.0);
    e += q.weights[k] * std::exp(q.nodes[k]);
  }
  EXPECT_NEAR(e, std::exp(2.0) - 1.0, 1e-10);
  EXPECT_THROW(TimeQuadrature::composite(1.0, 1.0, 3), InvalidArgument);
}

TEST(Rng, NeighbouringSeedsDoNotShareStreams) {
  std::set<std::uint64_t> first;
  for (std::uint64_t seed = 0; seed < 16; ++seed)
    for (std::uint64_t r = 0; r < 16; ++r) first.insert(replica_rng(seed, r)());
  EXPECT_EQ(first.size(), 256u);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qtd/metrics.hpp"
#include "qtd/quantizer.hpp"
#include "qtd/targets.hpp"

using namespace qtd;

namespace {

double std_normal_pdf(std::span<const double> x) {
  return std::exp(-0.5 * x[0] * x[0]) / std::sqrt(2.0 * std::numbers::pi);
}

QuantizerSpec grid_l2_k4(std::size_t d = 1) { return spec_from_bounds(d, 2.0, 4); }

}  // namespace

// Reference values from an independent 30-digit evaluation of the formulas.
TEST(DeriveSpec, UnitConstantsAtEpsTenth) {
  const QuantizerSpec s = derive_spec(1, 1.0, 1.0, 1.0, 0.1);
  EXPECT_NEAR(s.L, 2.4477468306808165, 1e-14);
  EXPECT_EQ(s.K, 512u);
  EXPECT_EQ(s.m, 9u);
  EXPECT_NEAR(s.l, 0.009561511057346940, 1e-15);
  EXPECT_LE(s.l, 0.011241647041395677);
  EXPECT_EQ(s.num_bits(), 9u);
}

TEST(DeriveSpec, CubeGrowsAsEpsShrinks) {
  double prev = 0.0;
  for (double eps : {0.5, 0.2, 0.1, 0.05, 0.01}) {
    const double L = derive_spec(1, 1.0, 3.0, 1.0, eps).L;
    EXPECT_GT(L, prev);
    prev = L;
  }
}

TEST(DeriveSpec, EpsNearOneAndInvalidInputs) {
  const QuantizerSpec s = derive_spec(1, 1.0, 1.0, 1.0, 0.999);
  EXPECT_NEAR(s.L, std::sqrt(2.0 * std::log(2.0 / 0.999)), 1e-14);
  EXPECT_GT(s.L, 0.0);
  EXPECT_THROW(derive_spec(1, 1.0, 1.0, 1.0, 1.0), InvalidArgument);
  EXPECT_THROW(derive_spec(1, 0.0, 1.0, 1.0, 0.1), InvalidArgument);
  EXPECT_THROW(derive_spec(1, 1.0, -1.0, 1.0, 0.1), InvalidArgument);
  EXPECT_THROW(derive_spec(0, 1.0, 1.0, 1.0, 0.1), InvalidArgument);
}

TEST(SpecFromBounds, RequiresPowerOfTwo) {
  const QuantizerSpec s = spec_from_bounds(2, 4.0, 64);
  EXPECT_EQ(s.m, 6u);
  EXPECT_DOUBLE_EQ(s.l, 0.125);
  EXPECT_THROW(spec_from_bounds(1, 1.0, 48), InvalidArgument);
  EXPECT_THROW(spec_from_bounds(1, 1.0, 1), InvalidArgument);
  EXPECT_THROW(spec_from_bounds(1, -1.0, 4), InvalidArgument);
}

TEST(QuantizePoint, FloorAndClamp) {
  const QuantizerSpec s = grid_l2_k4();
  const double a[] = {0.3}, b[] = {-2.0}, c[] = {2.0}, far[] = {-50.0}, nan[] = {std::nan("")};
  EXPECT_EQ(quantize_point(s, a).coords[0], 2u);
  EXPECT_EQ(quantize_point(s, b).coords[0], 0u);
  EXPECT_EQ(quantize_point(s, c).coords[0], 3u);
  EXPECT_EQ(quantize_point(s, far).coords[0], 0u);
  EXPECT_THROW(quantize_point(s, nan), InvalidArgument);
  const double two[] = {0.0, 0.0};
  EXPECT_THROW(quantize_point(s, two), InvalidArgument);
}

TEST(Vbin, EncodeExampleAndZero) {
  const QuantizerSpec s = grid_l2_k4(2);
  const BinaryState y = vbin_encode(s, GridIndex{{3, 1}});
  EXPECT_EQ(y.to_string(), "1110");
  EXPECT_EQ(vbin_decode(s, y), (GridIndex{{3, 1}}));
  EXPECT_EQ(vbin_encode(s, GridIndex{{0, 0}}).popcount(), 0u);
  EXPECT_EQ(vbin_decode(s, BinaryState(4)), (GridIndex{{0, 0}}));
  EXPECT_THROW(vbin_encode(s, GridIndex{{4, 0}}), InvalidArgument);
}

TEST(Vbin, ExhaustiveBijection) {
  const QuantizerSpec s = spec_from_bounds(2, 1.0, 256);  // d*m = 16
  for (std::uint64_t idx = 0; idx < (1u << 16); ++idx) {
    const GridIndex g{{idx & 255u, idx >> 8}};
    const BinaryState y = vbin_encode(s, g);
    ASSERT_EQ(y.index(), idx);
    ASSERT_EQ(vbin_decode(s, y), g);
  }
}

TEST(Vbin, PowerOfTwoStepsAreSingleBitFlips) {
  const QuantizerSpec s = spec_from_bounds(3, 1.0, 16);
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const BinaryState y = BinaryState::random(s.num_bits(), rng);
    GridIndex g = vbin_decode(s, y);
    const std::size_t coord = k % 3;
    const std::size_t bit = (k / 3) % 4;
    g.coords[coord] ^= std::uint64_t{1} << bit;
    EXPECT_EQ(hamming(y, vbin_encode(s, g)), 1u);
    EXPECT_EQ(vbin_encode(s, vbin_decode(s, y)), y);
  }
}

TEST(Dequantize, StaysInCell) {
  const QuantizerSpec s = grid_l2_k4();
  Rng rng(1);
  for (int k = 0; k < 10000; ++k) {
    const Point x = dequantize_sample(s, GridIndex{{0}}, rng);
    ASSERT_GT(x[0], -2.0);
    ASSERT_LE(x[0], -1.0);
  }
}

TEST(Dequantize, MeanNearMidpoint) {
  const QuantizerSpec s = spec_from_bounds(2, 3.0, 8);
  const GridIndex g{{2, 5}};
  const Cell c = cell_of(s, g);
  Rng rng(2);
  constexpr int n = 100000;
  double m0 = 0.0, m1 = 0.0;
  for (int k = 0; k < n; ++k) {
    const Point x = dequantize_sample(s, g, rng);
    m0 += x[0] / n;
    m1 += x[1] / n;
  }
  const double tol = 3.0 * s.l / std::sqrt(12.0 * n);
  EXPECT_NEAR(m0, 0.5 * (c.lower[0] + c.upper[0]), tol);
  EXPECT_NEAR(m1, 0.5 * (c.lower[1] + c.upper[1]), tol);
}

TEST(Dequantize, InteriorPointsQuantizeBack) {
  const QuantizerSpec s = spec_from_bounds(2, 1.5, 32);
  Rng rng(3);
  for (int k = 0; k < 2000; ++k) {
    const GridIndex g = vbin_decode(s, BinaryState::random(s.num_bits(), rng));
    const Cell c = cell_of(s, g);
    const double mid[] = {0.5 * (c.lower[0] + c.upper[0]), 0.5 * (c.lower[1] + c.upper[1])};
    EXPECT_EQ(quantize_point(s, mid), g);
  }
}

TEST(QuantizeDataset, PreservesOrderAndMultiplicity) {
  const QuantizerSpec s = grid_l2_k4();
  const std::vector<Point> one = {{0.3}};
  const auto out1 = quantize_dataset(s, one);
  ASSERT_EQ(out1.size(), 1u);
  EXPECT_EQ(out1[0], vbin_encode(s, quantize_point(s, one[0])));
  const std::vector<Point> dup = {{0.3}, {-1.5}, {0.3}};
  const auto out = quantize_dataset(s, dup);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0], out[2]);
  EXPECT_NE(out[0], out[1]);
  EXPECT_THROW(quantize_dataset(s, std::vector<Point>{}), InvalidArgument);
}

TEST(CellMasses, GaussianMassesSumBelowOne) {
  const QuantizerSpec s = spec_from_bounds(1, 4.0, 64);
  const auto m = cell_masses(s, std_normal_pdf);
  double total = 0.0;
  for (double x : m) total += x;
  EXPECT_NEAR(total, std::erf(4.0 / std::sqrt(2.0)), 1e-12);
}

// TV between a standard normal and its histogram approximation on the derived
// grid, by per-cell quadrature of |p - cell average| plus the tail mass.
TEST(Histogram, DerivedSpecIsThreeEpsClose) {
  const double eps = 0.1;
  const QuantizerSpec s = derive_spec(1, 1.0, 1.0, 1.0, eps);
  const auto& gl = GaussLegendre<16>::instance();
  double tv = std::erfc(s.L / std::sqrt(2.0));
  for (std::uint64_t c = 0; c < s.K; ++c) {
    const double lo = -s.L + static_cast<double>(c) * s.l;
    double mass = 0.0;
    double vals[16];
    for (std::size_t k = 0; k < 16; ++k) {
      const double x = lo + 0.5 * s.l * (gl.nodes[k] + 1.0);
      vals[k] = std_normal_pdf(std::span<const double>(&x, 1));
      mass += 0.5 * s.l * gl.weights[k] * vals[k];
    }
    for (std::size_t k = 0; k < 16; ++k) tv += 0.5 * s.l * gl.weights[k] * std::abs(vals[k] - mass / s.l);
  }
  tv *= 0.5;
  EXPECT_LE(tv, 3 * eps);
}

TEST(QuantizeDataset, DequantizedResampleMatchesDensity) {
  const QuantizerSpec s = derive_spec(1, 1.0, 1.0, 1.0, 0.1);
  const GaussianMixture normal({1.0}, {{0.0}}, {1.0});
  Rng rng(4);
  const auto pts = normal.sample(100000, rng);
  const auto states = quantize_dataset(s, pts);
  std::vector<Point> resampled;
  for (const auto& y : states) resampled.push_back(dequantize_sample(s, vbin_decode(s, y), rng));
  EXPECT_LE(tv_continuous_histogram(resampled, normal.density(), s), 3 * 0.1 + 0.05);
}

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "qtd/binary_state.hpp"
#include "qtd/error.hpp"
#include "qtd/quadrature.hpp"
#include "qtd/rng.hpp"

namespace qtd {

using Point = std::vector<double>;
using Density = std::function<double(std::span<const double>)>;

/// Geometry of the histogram quantizer: the cube [-L, L]^d split into K^d
/// cells of width l, with m = log2(K) bits per coordinate.
///
/// The smoothness constants (sigma, H, m0, eps) are only known when the QuantizerSpec
/// was derived from them; specs built from explicit bounds leave them empty.
struct QuantizerSpec {
  std::size_t d = 0;
  std::optional<double> sigma;
  std::optional<double> H;
  std::optional<double> m0;
  std::optional<double> eps;
  double L = 0.0;
  double l = 0.0;
  std::uint64_t K = 0;
  std::size_t m = 0;

  /// Number of bits D = d * m of the encoded state.
  std::size_t num_bits() const noexcept { return d * m; }

  void validate() const {
    if (d == 0) throw InvalidArgument("QuantizerSpec: d must be >= 1");
    if (!(L > 0.0) || !(l > 0.0)) throw InvalidArgument("QuantizerSpec: L and l must be positive");
    if (m == 0 || m > 62 || K != (std::uint64_t{1} << m))
      throw InvalidArgument("QuantizerSpec: K must equal 2^m with 1 <= m <= 62");
    if (static_cast<double>(K) * l < 2.0 * L * (1.0 - 1e-12))
      throw InvalidArgument("QuantizerSpec: cells do not cover the cube (K*l < 2L)");
    if (eps && !(*eps > 0.0 && *eps < 1.0)) throw InvalidArgument("QuantizerSpec: eps must lie in (0,1)");
  }
};

struct GridIndex {
  std::vector<std::uint64_t> coords;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

struct Cell {
  Point lower;
  Point upper;
};

namespace detail {

inline std::size_t ceil_log2(double x) {
  std::size_t m = 0;
  while (m < 63 && std::ldexp(1.0, static_cast<int>(m)) < x) ++m;
  return m;
}

}  // namespace detail

/// Cube half-width and raw cell width that make the histogram approximation
/// of a sigma-sub-Gaussian, H-smooth target TV-close (3 eps) to the target.
/// K is rounded up to a power of two and l recomputed as 2L/K so the cells
/// tile the cube exactly; a smaller l only tightens the approximation.
inline QuantizerSpec derive_spec(std::size_t d, double sigma, double H, double m0, double eps) {
  if (d == 0) throw InvalidArgument("derive_spec: d must be >= 1");
  if (!(sigma > 0.0) || !(H > 0.0) || !(m0 > 0.0) || !(eps > 0.0))
    throw InvalidArgument("derive_spec: sigma, H, m0, eps must be positive");
  if (!(eps < 1.0)) throw InvalidArgument("derive_spec: eps must be < 1");

  const double dd = static_cast<double>(d);
  const double log_term = std::log(2.0 * dd / eps);
  const double L = sigma * std::sqrt(2.0 * log_term);
  const double raw_l =
      eps / (2.0 * H * (sigma * std::sqrt(2.0 * dd * log_term) + dd + std::sqrt(dd * m0)));
  const double raw_K = 2.0 * L / raw_l;
  const std::size_t m = std::max<std::size_t>(1, detail::ceil_log2(raw_K));
  if (m > 62) throw InvalidArgument("derive_spec: required K exceeds 2^62");

  QuantizerSpec spec;
  spec.d = d;
  spec.sigma = sigma;
  spec.H = H;
  spec.m0 = m0;
  spec.eps = eps;
  spec.L = L;
  spec.m = m;
  spec.K = std::uint64_t{1} << m;
  spec.l = 2.0 * L / static_cast<double>(spec.K);
  spec.validate();
  return spec;
}

/// Spec from an explicit cube half-width and bin count, for data without
/// certified smoothness constants.
inline QuantizerSpec spec_from_bounds(std::size_t d, double L, std::uint64_t K) {
  if (K < 2 || !std::has_single_bit(K)) throw InvalidArgument("spec_from_bounds: K must be a power of two >= 2");
  QuantizerSpec spec;
  spec.d = d;
  spec.L = L;
  spec.K = K;
  spec.m = static_cast<std::size_t>(std::countr_zero(K));
  spec.l = 2.0 * L / static_cast<double>(K);
  spec.validate();
  return spec;
}

/// Cell index of x. Coordinates outside [-L, L) are clamped to the boundary
/// cells, so x_i = L lands in cell K-1.
inline GridIndex quantize_point(const QuantizerSpec& spec, std::span<const double> x) {
  if (x.size() != spec.d) throw InvalidArgument("quantize_point: point dimension != d");
  GridIndex g;
  g.coords.resize(spec.d);
  const double top = static_cast<double>(spec.K - 1);
  for (std::size_t i = 0; i < spec.d; ++i) {
    if (std::isnan(x[i])) throw InvalidArgument("quantize_point: NaN coordinate");
    const double cell = std::floor((x[i] + spec.L) / spec.l);
    g.coords[i] = static_cast<std::uint64_t>(std::clamp(cell, 0.0, top));
  }
  return g;
}

inline void check_grid_index(const QuantizerSpec& spec, const GridIndex& g) {
  if (g.coords.size() != spec.d) throw InvalidArgument("GridIndex: length != d");
  for (auto c : g.coords)
    if (c >= spec.K) throw InvalidArgument("GridIndex: coordinate >= K");
}

/// Bit i of the state is bit (i mod m) of coordinate floor(i / m).
inline BinaryState vbin_encode(const QuantizerSpec& spec, const GridIndex& g) {
  check_grid_index(spec, g);
  BinaryState y(spec.num_bits());
  for (std::size_t j = 0; j < spec.d; ++j)
    for (std::size_t b = 0; b < spec.m; ++b)
      if ((g.coords[j] >> b) & 1U) y.set(j * spec.m + b, true);
  return y;
}

inline GridIndex vbin_decode(const QuantizerSpec& spec, const BinaryState& y) {
  if (y.size() != spec.num_bits()) throw InvalidArgument("vbin_decode: state length != d*m");
  GridIndex g;
  g.coords.assign(spec.d, 0);
  for (std::size_t j = 0; j < spec.d; ++j)
    for (std::size_t b = 0; b < spec.m; ++b)
      if (y.get(j * spec.m + b)) g.coords[j] |= std::uint64_t{1} << b;
  return g;
}

inline Cell cell_of(const QuantizerSpec& spec, const GridIndex& g) {
  check_grid_index(spec, g);
  Cell c;
  c.lower.resize(spec.d);
  c.upper.resize(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) {
    c.lower[j] = -spec.L + static_cast<double>(g.coords[j]) * spec.l;
    c.upper[j] = -spec.L + static_cast<double>(g.coords[j] + 1) * spec.l;
  }
  return c;
}

/// Uniform draw from the half-open cell (lower, upper] of g.
inline Point dequantize_sample(const QuantizerSpec& spec, const GridIndex& g, Rng& rng) {
  const Cell c = cell_of(spec, g);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point x(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) x[j] = c.upper[j] - u(rng) * spec.l;
  return x;
}

inline std::vector<BinaryState> quantize_dataset(const QuantizerSpec& spec, std::span<const Point> points) {
  if (points.empty()) throw InvalidArgument("quantize_dataset: empty input");
  std::vector<BinaryState> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(vbin_encode(spec, quantize_point(spec, p)));
  return out;
}

/// Probability mass of `density` in each cell, indexed by the integer index
/// of the vBin-encoded cell (sum_j ybar_j K^j). Unnormalized: the mass
/// outside the cube is 1 - sum. Requires K^d <= 2^24.
inline std::vector<double> cell_masses(const QuantizerSpec& spec, const Density& density) {
  const std::size_t D = spec.num_bits();
  if (D > 24) throw SizeLimitExceeded("cell_masses: K^d must be <= 2^24");
  const std::uint64_t n = std::uint64_t{1} << D;
  std::vector<double> masses(n);
  for (std::uint64_t idx = 0; idx < n; ++idx) {
    const GridIndex g = vbin_decode(spec, BinaryState::from_index(D, idx));
    const Cell c = cell_of(spec, g);
    masses[idx] = integrate_box(density, c.lower, c.upper);
  }
  return masses;
}

}  // namespace qtd

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qtd/error.hpp"
#include "qtd/rng.hpp"

namespace qtd {

/// A vertex of the hypercube {0,1}^D, stored as packed 64-bit words.
///
/// Bit i lives in word i / 64 at position i % 64. For D <= 63 the state has a
/// canonical integer index sum_i bit_i * 2^i (little-endian), which is the
/// index used by every dense object in the library.
class BinaryState {
 public:
  static constexpr std::size_t kWordBits = 64;
  static constexpr std::size_t kMaxIndexedBits = 63;

  BinaryState() = default;
  explicit BinaryState(std::size_t num_bits)
      : size_(num_bits), words_((num_bits + kWordBits - 1) / kWordBits, 0) {}

  static BinaryState from_index(std::size_t num_bits, std::uint64_t index) {
    if (num_bits > kMaxIndexedBits) throw InvalidArgument("from_index: D must be <= 63");
    if (num_bits < kMaxIndexedBits && (index >> num_bits) != 0)
      throw InvalidArgument("from_index: index out of range for D");
    BinaryState s(num_bits);
    if (num_bits > 0) s.words_[0] = index;
    return s;
  }

  static BinaryState from_bits(std::span<const std::uint8_t> bits) {
    BinaryState s(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i] > 1) throw InvalidArgument("from_bits: bits must be 0 or 1");
      if (bits[i]) s.set(i, true);
    }
    return s;
  }

  /// Uniform draw from {0,1}^D.
  static BinaryState random(std::size_t num_bits, Rng& rng) {
    BinaryState s(num_bits);
    for (auto& w : s.words_) w = rng();
    s.mask_tail();
    return s;
  }

  std::size_t size() const noexcept { return size_; }
  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool get(std::size_t i) const noexcept { return (words_[i / kWordBits] >> (i % kWordBits)) & 1U; }
  void set(std::size_t i, bool v) noexcept {
    const std::uint64_t m = std::uint64_t{1} << (i % kWordBits);
    if (v)
      words_[i / kWordBits] |= m;
    else
      words_[i / kWordBits] &= ~m;
  }
  void flip(std::size_t i) noexcept { words_[i / kWordBits] ^= std::uint64_t{1} << (i % kWordBits); }

  BinaryState flipped(std::size_t i) const {
    BinaryState s = *this;
    s.flip(i);
    return s;
  }

  std::uint64_t index() const {
    if (size_ > kMaxIndexedBits) throw SizeLimitExceeded("BinaryState::index: D must be <= 63");
    return size_ == 0 ? 0 : words_[0];
  }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  std::vector<std::uint8_t> bits() const {
    std::vector<std::uint8_t> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = get(i) ? 1 : 0;
    return out;
  }

  /// Bits in index order, bit 0 first.
  std::string to_string() const {
    std::string s(size_, '0');
    for (std::size_t i = 0; i < size_; ++i)
      if (get(i)) s[i] = '1';
    return s;
  }

  std::uint64_t hash() const noexcept {
    std::uint64_t h = splitmix64(size_);
    for (auto w : words_) h = hash_combine(h, w);
    return h;
  }

  friend bool operator==(const BinaryState&, const BinaryState&) = default;

 private:
  void mask_tail() noexcept {
    const std::size_t rem = size_ % kWordBits;
    if (rem != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << rem) - 1;
  }

  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

inline std::size_t hamming(const BinaryState& a, const BinaryState& b) {
  if (a.size() != b.size()) throw InvalidArgument("hamming: dimension mismatch");
  std::size_t n = 0;
  const auto wa = a.words();
  const auto wb = b.words();
  for (std::size_t k = 0; k < wa.size(); ++k) n += static_cast<std::size_t>(std::popcount(wa[k] ^ wb[k]));
  return n;
}

}  // namespace qtd

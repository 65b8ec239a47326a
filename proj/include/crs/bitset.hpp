#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace crs {

/// Fixed-size bitset over dataset rows. Bits past size() are always zero.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(std::size_t n_bits);

  std::size_t size() const { return n_bits_; }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i, bool value = true);
  void reset();
  void fill();

  std::size_t count() const;
  bool any() const;
  bool none() const { return !any(); }

  Bitset& operator|=(const Bitset& other);
  Bitset& operator&=(const Bitset& other);
  Bitset& operator^=(const Bitset& other);
  Bitset& subtract(const Bitset& other);
  Bitset complement() const;

  /// |a & b|
  static std::size_t count_and(const Bitset& a, const Bitset& b);
  /// |(a | b) & mask|
  static std::size_t count_or_and(const Bitset& a, const Bitset& b, const Bitset& mask);
  /// |a & b & c|
  static std::size_t count_and3(const Bitset& a, const Bitset& b, const Bitset& c);

  /// Ascending indices of the set bits.
  std::vector<std::size_t> indices() const;
  std::span<const std::uint64_t> words() const { return words_; }

  bool operator==(const Bitset& other) const = default;

  friend Bitset operator|(Bitset a, const Bitset& b) { return a |= b; }
  friend Bitset operator&(Bitset a, const Bitset& b) { return a &= b; }
  friend Bitset operator^(Bitset a, const Bitset& b) { return a ^= b; }

 private:
  void trim();

  std::size_t n_bits_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Bitset of length n with the given indices set.
Bitset bitset_from_indices(std::size_t n, std::span<const std::size_t> indices);

}  // namespace crs

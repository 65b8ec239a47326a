#include "crs/bitset.hpp"

#include <bit>
#include <cassert>
#include <stdexcept>

namespace crs {

Bitset::Bitset(std::size_t n_bits) : n_bits_(n_bits), words_((n_bits + 63) / 64, 0) {}

void Bitset::set(std::size_t i, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (i & 63);
  if (value) {
    words_[i >> 6] |= mask;
  } else {
    words_[i >> 6] &= ~mask;
  }
}

void Bitset::reset() {
  for (auto& w : words_) w = 0;
}

void Bitset::fill() {
  for (auto& w : words_) w = ~std::uint64_t{0};
  trim();
}

void Bitset::trim() {
  const std::size_t tail = n_bits_ & 63;
  if (tail != 0 && !words_.empty()) words_.back() &= (std::uint64_t{1} << tail) - 1;
}

std::size_t Bitset::count() const {
  std::size_t total = 0;
  for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
  return total;
}

bool Bitset::any() const {
  for (auto w : words_) {
    if (w != 0) return true;
  }
  return false;
}

Bitset& Bitset::operator|=(const Bitset& other) {
  assert(n_bits_ == other.n_bits_);
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] |= other.words_[k];
  return *this;
}

Bitset& Bitset::operator&=(const Bitset& other) {
  assert(n_bits_ == other.n_bits_);
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= other.words_[k];
  return *this;
}

Bitset& Bitset::operator^=(const Bitset& other) {
  assert(n_bits_ == other.n_bits_);
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] ^= other.words_[k];
  return *this;
}

Bitset& Bitset::subtract(const Bitset& other) {
  assert(n_bits_ == other.n_bits_);
  for (std::size_t k = 0; k < words_.size(); ++k) words_[k] &= ~other.words_[k];
  return *this;
}

Bitset Bitset::complement() const {
  Bitset out = *this;
  for (auto& w : out.words_) w = ~w;
  out.trim();
  return out;
}

std::size_t Bitset::count_and(const Bitset& a, const Bitset& b) {
  assert(a.n_bits_ == b.n_bits_);
  std::size_t total = 0;
  for (std::size_t k = 0; k < a.words_.size(); ++k) {
    total += static_cast<std::size_t>(std::popcount(a.words_[k] & b.words_[k]));
  }
  return total;
}

std::size_t Bitset::count_or_and(const Bitset& a, const Bitset& b, const Bitset& mask) {
  assert(a.n_bits_ == b.n_bits_ && a.n_bits_ == mask.n_bits_);
  std::size_t total = 0;
  for (std::size_t k = 0; k < a.words_.size(); ++k) {
    total += static_cast<std::size_t>(std::popcount((a.words_[k] | b.words_[k]) & mask.words_[k]));
  }
  return total;
}

std::size_t Bitset::count_and3(const Bitset& a, const Bitset& b, const Bitset& c) {
  assert(a.n_bits_ == b.n_bits_ && a.n_bits_ == c.n_bits_);
  std::size_t total = 0;
  for (std::size_t k = 0; k < a.words_.size(); ++k) {
    total += static_cast<std::size_t>(std::popcount(a.words_[k] & b.words_[k] & c.words_[k]));
  }
  return total;
}

std::vector<std::size_t> Bitset::indices() const {
  std::vector<std::size_t> out;
  out.reserve(count());
  for (std::size_t k = 0; k < words_.size(); ++k) {
    std::uint64_t w = words_[k];
    while (w != 0) {
      out.push_back(k * 64 + static_cast<std::size_t>(std::countr_zero(w)));
      w &= w - 1;
    }
  }
  return out;
}

Bitset bitset_from_indices(std::size_t n, std::span<const std::size_t> indices) {
  Bitset out(n);
  for (auto i : indices) {
    if (i >= n) throw std::out_of_range("bit index out of range");
    out.set(i);
  }
  return out;
}

}  // namespace crs

#pragma once

#include "plangen/common.hpp"

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace plangen {

/// Set of true atoms, stored as a fixed-width bit vector over the atom
/// universe of one grounded task. Also used for partial states (goals).
class State {
public:
  State() = default;
  explicit State(std::size_t num_atoms)
      : num_atoms_(num_atoms), words_((num_atoms + 63) / 64, 0) {}

  std::size_t num_atoms() const { return num_atoms_; }

  bool test(AtomId a) const {
    return (words_[a >> 6] >> (a & 63)) & 1u;
  }
  void set(AtomId a) { words_[a >> 6] |= std::uint64_t{1} << (a & 63); }
  void reset(AtomId a) { words_[a >> 6] &= ~(std::uint64_t{1} << (a & 63)); }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto w : words_) {
      n += static_cast<std::size_t>(std::popcount(w));
    }
    return n;
  }

  bool empty() const {
    for (auto w : words_) {
      if (w) {
        return false;
      }
    }
    return true;
  }

  /// True iff every atom of `sub` is also in this state.
  bool contains(const State &sub) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (sub.words_[i] & ~words_[i]) {
        return false;
      }
    }
    return true;
  }

  bool intersects(const State &other) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (other.words_[i] & words_[i]) {
        return true;
      }
    }
    return false;
  }

  /// Indices of set atoms in ascending order.
  std::vector<AtomId> atoms() const {
    std::vector<AtomId> out;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      std::uint64_t w = words_[i];
      while (w) {
        int b = std::countr_zero(w);
        out.push_back(static_cast<AtomId>(i * 64 + b));
        w &= w - 1;
      }
    }
    return out;
  }

  std::span<const std::uint64_t> words() const { return words_; }

  std::size_t hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ num_atoms_;
    for (auto w : words_) {
      h = splitmix64(h ^ w);
    }
    return static_cast<std::size_t>(h);
  }

  friend bool operator==(const State &a, const State &b) {
    return a.num_atoms_ == b.num_atoms_ && a.words_ == b.words_;
  }

private:
  std::size_t num_atoms_ = 0;
  std::vector<std::uint64_t> words_;
};

struct StateHash {
  std::size_t operator()(const State &s) const { return s.hash(); }
};

} // namespace plangen

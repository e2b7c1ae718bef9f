#pragma once

#include "ipu/common.hpp"

#include <bit>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace ipu {

/// Up to 128 bits; bit i is output node i.
struct Code {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  bool operator==(const Code& o) const { return lo == o.lo && hi == o.hi; }

  bool get(int i) const {
    return ((i < 64 ? lo >> i : hi >> (i - 64)) & 1u) != 0;
  }
  void set(int i) {
    if (i < 64)
      lo |= (1ULL << i);
    else
      hi |= (1ULL << (i - 64));
  }
  int hamming(const Code& o) const {
    return std::popcount(lo ^ o.lo) + std::popcount(hi ^ o.hi);
  }
  int popcount() const { return std::popcount(lo) + std::popcount(hi); }
};

struct CodeHash {
  std::size_t operator()(const Code& c) const {
    return static_cast<std::size_t>(mix_(c.lo) ^ (mix_(c.hi) * 0x9e3779b97f4a7c15ULL));
  }

 private:
  static std::uint64_t mix_(std::uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    return z;
  }
};

/// Rounds a row of sigmoid outputs at 0.5; exactly 0.5 rounds to 1.
template <typename T>
Code round_to_code(const T* y, int bits) {
  Code c;
  for (int i = 0; i < bits; ++i)
    if (y[i] >= T(0.5)) c.set(i);
  return c;
}

/// Little-endian packing: byte k holds bits 8k..8k+7, node 0 in bit 0 of byte 0.
void pack_code(const Code& c, int bits, std::uint8_t* out);
Code unpack_code(const std::uint8_t* bytes, int bits);

/// Multiset of binary codes with counts; distinct codes keep first-seen order.
class BinaryCodeSet {
 public:
  explicit BinaryCodeSet(int bits);

  int bits() const { return bits_; }
  std::uint64_t total() const { return total_; }
  std::size_t distinct() const { return order_.size(); }
  const std::vector<Code>& codes() const { return order_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

  void add(const Code& c, std::uint64_t count = 1);
  /// Index in insertion order, or distinct() when absent.
  std::size_t find(const Code& c) const;

  void save(const std::string& path) const;
  static BinaryCodeSet load(const std::string& path);

 private:
  int bits_;
  std::uint64_t total_ = 0;
  std::vector<Code> order_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<Code, std::uint32_t, CodeHash> index_;
};

struct KnnHit {
  std::uint32_t index;  // insertion index into the code set
  int distance;
};

/// k nearest distinct codes by Hamming distance; ties resolve to the smaller
/// insertion index. Throws when k exceeds the number of distinct codes.
std::vector<KnnHit> knn_hamming(const BinaryCodeSet& set, const Code& query, std::size_t k);

struct OccupancyCurve {
  std::uint32_t anchor_index = 0;
  std::vector<std::uint64_t> count_at;    // samples at Hamming distance exactly d
  std::vector<std::uint64_t> cumulative;  // samples within distance d
  std::vector<double> rate;               // count_at[d] / C(bits, d)
};

/// Curves around `anchors` distinct random occupied codes, d = 0..bits.
std::vector<OccupancyCurve> occupancy_stats(const BinaryCodeSet& set, std::size_t anchors,
                                            std::uint64_t seed);

double binomial_coefficient(int n, int k);

}  // namespace ipu

#include "ipu/codes.hpp"

#include "ipu/rng.hpp"

#include <algorithm>
#include <fstream>

namespace ipu {

void pack_code(const Code& c, int bits, std::uint8_t* out) {
  int nbytes = (bits + 7) / 8;
  for (int b = 0; b < nbytes; ++b) out[b] = 0;
  for (int i = 0; i < bits; ++i)
    if (c.get(i)) out[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
}

Code unpack_code(const std::uint8_t* bytes, int bits) {
  Code c;
  for (int i = 0; i < bits; ++i)
    if (bytes[i / 8] & (1u << (i % 8))) c.set(i);
  return c;
}

BinaryCodeSet::BinaryCodeSet(int bits) : bits_(bits) {
  require(bits >= 1 && bits <= 128, "code width must be in [1, 128]");
}

void BinaryCodeSet::add(const Code& c, std::uint64_t count) {
  require(count >= 1, "code count must be positive");
  auto [it, inserted] = index_.try_emplace(c, static_cast<std::uint32_t>(order_.size()));
  if (inserted) {
    order_.push_back(c);
    counts_.push_back(count);
  } else {
    counts_[it->second] += count;
  }
  total_ += count;
}

std::size_t BinaryCodeSet::find(const Code& c) const {
  auto it = index_.find(c);
  return it == index_.end() ? order_.size() : it->second;
}

namespace {

constexpr std::uint32_t kCodesMagic = 0x43555049;  // "IPUC"

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("code file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::ifstream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("code file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void BinaryCodeSet::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  put_u32(os, kCodesMagic);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(bits_));
  put_u64(os, static_cast<std::uint64_t>(order_.size()));
  int nbytes = (bits_ + 7) / 8;
  std::uint8_t buf[16];
  for (std::size_t i = 0; i < order_.size(); ++i) {
    pack_code(order_[i], bits_, buf);
    os.write(reinterpret_cast<const char*>(buf), nbytes);
    put_u64(os, counts_[i]);
  }
  if (!os) throw IoError("failed writing code set: " + path);
}

BinaryCodeSet BinaryCodeSet::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  if (get_u32(is) != kCodesMagic) throw IoError("not a code set file (bad magic)");
  if (get_u32(is) != 1) throw IoError("unsupported code set version");
  std::uint32_t bits = get_u32(is);
  if (bits < 1 || bits > 128) throw IoError("implausible code width");
  std::uint64_t entries = get_u64(is);
  BinaryCodeSet set(static_cast<int>(bits));
  int nbytes = (static_cast<int>(bits) + 7) / 8;
  std::uint8_t buf[16];
  for (std::uint64_t i = 0; i < entries; ++i) {
    if (!is.read(reinterpret_cast<char*>(buf), nbytes)) throw IoError("code file truncated");
    std::uint64_t count = get_u64(is);
    set.add(unpack_code(buf, static_cast<int>(bits)), count);
  }
  return set;
}

std::vector<KnnHit> knn_hamming(const BinaryCodeSet& set, const Code& query, std::size_t k) {
  require(k >= 1, "k must be positive");
  require(k <= set.distinct(), "k exceeds number of distinct codes");
  const auto& codes = set.codes();
  std::vector<KnnHit> hits(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i)
    hits[i] = {static_cast<std::uint32_t>(i), query.hamming(codes[i])};
  auto cmp = [](const KnnHit& a, const KnnHit& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), cmp);
  hits.resize(k);
  return hits;
}

double binomial_coefficient(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  k = std::min(k, n - k);
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v = v * static_cast<double>(n - k + i) / static_cast<double>(i);
  return v;
}

std::vector<OccupancyCurve> occupancy_stats(const BinaryCodeSet& set, std::size_t anchors,
                                            std::uint64_t seed) {
  require(anchors >= 1 && anchors <= set.distinct(), "anchor count must be in [1, distinct codes]");
  // Partial Fisher-Yates picks `anchors` distinct code indices.
  std::vector<std::uint32_t> idx(set.distinct());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  Rng rng(seed, static_cast<std::uint64_t>(Stream::kData));
  for (std::size_t i = 0; i < anchors; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }

  const auto& codes = set.codes();
  const auto& counts = set.counts();
  int d_max = set.bits();
  std::vector<OccupancyCurve> out(anchors);
  for (std::size_t a = 0; a < anchors; ++a) {
    OccupancyCurve& curve = out[a];
    curve.anchor_index = idx[a];
    curve.count_at.assign(static_cast<std::size_t>(d_max) + 1, 0);
    const Code& anchor = codes[idx[a]];
    for (std::size_t i = 0; i < codes.size(); ++i)
      curve.count_at[static_cast<std::size_t>(anchor.hamming(codes[i]))] += counts[i];
    curve.cumulative.resize(curve.count_at.size());
    curve.rate.resize(curve.count_at.size());
    std::uint64_t acc = 0;
    for (std::size_t d = 0; d < curve.count_at.size(); ++d) {
      acc += curve.count_at[d];
      curve.cumulative[d] = acc;
      curve.rate[d] = static_cast<double>(curve.count_at[d]) / binomial_coefficient(d_max, static_cast<int>(d));
    }
  }
  return out;
}

}  // namespace ipu

#include "ipu/discrete.hpp"

#include "ipu/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipu {

namespace {

constexpr double kZeroMass = 1e-300;  // below this a probability counts as exact zero
constexpr double kLog2 = 0.6931471805599453;

double xlogx(double x) { return x > kZeroMass ? x * std::log(x) : 0.0; }

}  // namespace

void check_distribution(const std::vector<double>& p, double tol) {
  require(!p.empty(), "distribution must have at least one state");
  double sum = 0.0;
  for (double v : p) {
    require(v >= 0.0 && std::isfinite(v), "distribution entries must be finite and non-negative");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= tol, "distribution must sum to 1");
}

double entropy(const std::vector<double>& p, LogBase base) {
  check_distribution(p);
  double h = 0.0;
  for (double v : p) h -= xlogx(v);
  return base == LogBase::kBits ? h / kLog2 : h;
}

double cross_entropy(const std::vector<double>& p, const std::vector<double>& q) {
  check_distribution(p);
  check_distribution(q);
  require(p.size() == q.size(), "cross_entropy: size mismatch");
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= kZeroMass) continue;
    if (q[i] <= kZeroMass) return std::numeric_limits<double>::infinity();
    h -= p[i] * std::log(q[i]);
  }
  return h;
}

double kl_direct(const std::vector<double>& p, const std::vector<double>& q) {
  check_distribution(p);
  check_distribution(q);
  require(p.size() == q.size(), "kl_direct: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= kZeroMass) continue;
    if (q[i] <= kZeroMass) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

Partition::Partition(std::vector<std::uint32_t> assignment, std::size_t group_count)
    : assignment_(std::move(assignment)), sizes_(group_count, 0) {
  require(!assignment_.empty(), "partition needs at least one state");
  require(group_count >= 1, "partition needs at least one group");
  for (std::uint32_t g : assignment_) {
    require(g < group_count, "group index out of range");
    sizes_[g] += 1;
  }
  for (std::size_t n : sizes_) require(n >= 1, "every group must be nonempty");
}

Partition Partition::contiguous(const std::vector<std::size_t>& sizes) {
  std::vector<std::uint32_t> assign;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    require(sizes[g] >= 1, "every group must be nonempty");
    assign.insert(assign.end(), sizes[g], static_cast<std::uint32_t>(g));
  }
  return Partition(std::move(assign), sizes.size());
}

Partition Partition::identity(std::size_t m) {
  std::vector<std::uint32_t> assign(m);
  for (std::size_t i = 0; i < m; ++i) assign[i] = static_cast<std::uint32_t>(i);
  return Partition(std::move(assign), m);
}

Partition Partition::single_group(std::size_t m) {
  return Partition(std::vector<std::uint32_t>(m, 0), 1);
}

Partition Partition::two_block(std::size_t m, std::size_t first_size) {
  require(first_size >= 1 && first_size < m, "two_block: first group size out of range");
  return contiguous({first_size, m - first_size});
}

bool Partition::is_contiguous() const {
  for (std::size_t i = 1; i < assignment_.size(); ++i) {
    if (assignment_[i] < assignment_[i - 1]) return false;
    if (assignment_[i] > assignment_[i - 1] + 1) return false;
  }
  return assignment_.front() == 0;
}

std::vector<std::size_t> Partition::boundaries() const {
  require(is_contiguous(), "boundaries defined only for contiguous partitions");
  std::vector<std::size_t> b;
  std::size_t acc = 0;
  for (std::size_t g = 0; g + 1 < sizes_.size(); ++g) {
    acc += sizes_[g];
    b.push_back(acc);
  }
  return b;
}

std::vector<double> push_forward(const std::vector<double>& p, const Partition& f) {
  check_distribution(p);
  require(p.size() == f.domain_size(), "push_forward: distribution/partition size mismatch");
  std::vector<double> q(f.group_count(), 0.0);
  const auto& assign = f.assignment();
  for (std::size_t i = 0; i < p.size(); ++i) q[assign[i]] += p[i];
  return q;
}

std::vector<double> modeled_distribution(const std::vector<double>& q_probs, const Partition& f) {
  check_distribution(q_probs);
  require(q_probs.size() == f.group_count(), "modeled_distribution: output size mismatch");
  const auto& sizes = f.group_sizes();
  const auto& assign = f.assignment();
  std::vector<double> q(f.domain_size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    std::uint32_t g = assign[i];
    q[i] = q_probs[g] / static_cast<double>(sizes[g]);
  }
  return q;
}

double hq_grouped(const std::vector<double>& q_probs, const Partition& f) {
  check_distribution(q_probs);
  require(q_probs.size() == f.group_count(), "hq_grouped: output size mismatch");
  const auto& sizes = f.group_sizes();
  double h = 0.0;
  for (std::size_t g = 0; g < q_probs.size(); ++g) {
    double q = q_probs[g];
    if (q > kZeroMass) h -= q * std::log(q / static_cast<double>(sizes[g]));
  }
  return h;
}

double kl_p_q(const std::vector<double>& p, const Partition& f) {
  return hq_grouped(push_forward(p, f), f) - entropy(p);
}

MutualInfoResult transmission_rate(const std::vector<double>& p, const Partition& f) {
  std::vector<double> q = push_forward(p, f);
  const auto& assign = f.assignment();
  // Joint table has one nonzero cell per input state: P(x, f(x)) = p(x).
  double direct = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double joint = p[i];
    if (joint <= kZeroMass) continue;
    direct += joint * std::log(joint / (p[i] * q[assign[i]]));
  }
  double hq = 0.0;
  for (double v : q) hq -= xlogx(v);
  return {direct, hq};
}

BoundaryShiftResult boundary_shift_delta_hq(const std::vector<double>& p, const Partition& f,
                                            std::size_t donor_group, std::size_t receiver_group) {
  require(f.is_contiguous(), "boundary shift requires a contiguous partition");
  require(donor_group < f.group_count() && receiver_group < f.group_count(),
          "boundary shift: group index out of range");
  require(donor_group + 1 == receiver_group || receiver_group + 1 == donor_group,
          "boundary shift: groups must be adjacent");
  const auto& sizes = f.group_sizes();
  require(sizes[donor_group] >= 2, "boundary shift: donor must keep at least one state");

  std::size_t donor_start = 0;
  for (std::size_t g = 0; g < donor_group; ++g) donor_start += sizes[g];
  std::size_t moved = donor_group < receiver_group ? donor_start + sizes[donor_group] - 1 : donor_start;

  std::vector<double> q_before = push_forward(p, f);
  double q1 = q_before[donor_group] / static_cast<double>(sizes[donor_group]);
  double q2 = q_before[receiver_group] / static_cast<double>(sizes[receiver_group]);
  require(q1 > kZeroMass && q2 > kZeroMass, "boundary shift: zero-mass group");

  std::vector<std::size_t> after_sizes(sizes);
  after_sizes[donor_group] -= 1;
  after_sizes[receiver_group] += 1;
  Partition after = Partition::contiguous(after_sizes);

  double before = hq_grouped(q_before, f);
  double exact = hq_grouped(push_forward(p, after), after) - before;
  double delta = p[moved];
  double first_order = q2 - q1 + delta * std::log(q1 / q2);
  return {exact, first_order};
}

namespace {

struct SegmentCost {
  const std::vector<double>& prefix;
  PartitionObjective objective;

  // Cost of states [i, j) as one group. Totals are minimized for kMinHq and
  // maximized for kMaxHQ.
  double operator()(std::size_t i, std::size_t j) const {
    double mass = std::max(prefix[j] - prefix[i], 0.0);
    if (mass <= kZeroMass) return 0.0;
    if (objective == PartitionObjective::kMaxHQ) return -mass * std::log(mass);
    return -mass * std::log(mass / static_cast<double>(j - i));
  }

  bool better(double a, double b) const {
    return objective == PartitionObjective::kMaxHQ ? a > b : a < b;
  }
};

std::vector<double> prefix_sums(const std::vector<double>& p) {
  std::vector<double> pre(p.size() + 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) pre[i + 1] = pre[i] + p[i];
  return pre;
}

Partition from_boundaries(const std::vector<std::size_t>& bounds, std::size_t m) {
  std::vector<std::size_t> sizes;
  std::size_t prev = 0;
  for (std::size_t b : bounds) {
    sizes.push_back(b - prev);
    prev = b;
  }
  sizes.push_back(m - prev);
  return Partition::contiguous(sizes);
}

}  // namespace

Partition best_contiguous_partition(const std::vector<double>& p, std::size_t n,
                                    PartitionObjective objective) {
  check_distribution(p);
  std::size_t m = p.size();
  require(n >= 1 && n <= m, "group count must be in [1, M]");
  if (n == 1) return Partition::single_group(m);
  if (n == m) return Partition::identity(m);

  std::vector<double> pre = prefix_sums(p);
  SegmentCost seg{pre, objective};

  if (n == 2) {
    std::size_t best_b = 1;
    double best = seg(0, 1) + seg(1, m);
    for (std::size_t b = 2; b < m; ++b) {
      double v = seg(0, b) + seg(b, m);
      if (seg.better(v, best)) {
        best = v;
        best_b = b;
      }
    }
    return Partition::two_block(m, best_b);
  }

  // Suffix tables: cost[k][i] = best total for splitting [i, m) into k groups,
  // choice[k][i] = smallest next boundary achieving it. Preferring the smallest
  // boundary at every level makes the reconstructed vector lexicographically
  // smallest among optima.
  std::vector<std::vector<double>> cost(n + 1, std::vector<double>(m + 1, 0.0));
  std::vector<std::vector<std::size_t>> choice(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 0; i + 1 <= m; ++i) cost[1][i] = seg(i, m);
  for (std::size_t k = 2; k <= n; ++k) {
    for (std::size_t i = 0; i + k <= m; ++i) {
      double best = seg(i, i + 1) + cost[k - 1][i + 1];
      std::size_t best_j = i + 1;
      for (std::size_t j = i + 2; j + (k - 1) <= m; ++j) {
        double v = seg(i, j) + cost[k - 1][j];
        if (seg.better(v, best)) {
          best = v;
          best_j = j;
        }
      }
      cost[k][i] = best;
      choice[k][i] = best_j;
    }
  }

  std::vector<std::size_t> bounds;
  std::size_t i = 0;
  for (std::size_t k = n; k >= 2; --k) {
    std::size_t j = choice[k][i];
    bounds.push_back(j);
    i = j;
  }
  return from_boundaries(bounds, m);
}

Partition best_contiguous_partition_exhaustive(const std::vector<double>& p, std::size_t n,
                                               PartitionObjective objective) {
  check_distribution(p);
  std::size_t m = p.size();
  require(n >= 1 && n <= m, "group count must be in [1, M]");
  if (n == 1) return Partition::single_group(m);

  std::vector<double> pre = prefix_sums(p);
  SegmentCost seg{pre, objective};

  // Walk all boundary vectors (b_1 < ... < b_{n-1}) in lexicographic order.
  std::vector<std::size_t> bounds(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) bounds[k] = k + 1;
  std::vector<std::size_t> best_bounds = bounds;
  double best = std::numeric_limits<double>::quiet_NaN();
  for (;;) {
    double total = 0.0;
    std::size_t prev = 0;
    for (std::size_t b : bounds) {
      total += seg(prev, b);
      prev = b;
    }
    total += seg(prev, m);
    if (std::isnan(best) || seg.better(total, best)) {
      best = total;
      best_bounds = bounds;
    }
    // Next combination.
    std::size_t k = n - 1;
    while (k > 0) {
      --k;
      if (bounds[k] < m - (n - 1 - k)) {
        bounds[k] += 1;
        for (std::size_t j = k + 1; j + 1 < n; ++j) bounds[j] = bounds[j - 1] + 1;
        break;
      }
      if (k == 0) return from_boundaries(best_bounds, m);
    }
  }
}

std::vector<double> toy_distribution(std::size_t m) {
  require(m >= 2, "toy distribution needs at least two states");
  std::vector<double> p(m);
  double md = static_cast<double>(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = (2.0 / md) * (1.0 - static_cast<double>(i) / md);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

double toy_hq_minus_log_m(double r) {
  double a = 2.0 - r;
  double b = 1.0 - r;
  double out = -r * a * std::log(a);
  if (b > 0.0) out -= b * b * std::log(b);
  return out;
}

ToyExampleResult toy_example(std::size_t m, std::size_t curve_points) {
  require(m >= 1000, "toy example expects M >= 1000");
  ToyExampleResult res;
  res.a_transmission = static_cast<std::size_t>(std::llround((1.0 - 1.0 / std::sqrt(2.0)) * static_cast<double>(m)));

  double best = std::numeric_limits<double>::infinity();
  std::size_t best_a = 1;
  for (std::size_t a = 1; a < m; ++a) {
    double v = toy_hq_minus_log_m(static_cast<double>(a) / static_cast<double>(m));
    if (v < best) {
      best = v;
      best_a = a;
    }
  }
  res.a_modeling = best_a;

  res.hq_curve.reserve(curve_points);
  for (std::size_t i = 1; i <= curve_points; ++i) {
    double r = static_cast<double>(i) / static_cast<double>(curve_points + 1);
    res.hq_curve.emplace_back(r, toy_hq_minus_log_m(r));
  }
  return res;
}

}  // namespace ipu

#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace ipu {

/// Throws ValidationError unless p is a probability vector: entries >= 0,
/// sum within `tol` of 1, at least one entry.
void check_distribution(const std::vector<double>& p, double tol = 1e-9);

enum class LogBase { kNats, kBits };

/// Shannon entropy -sum p log p with 0 log 0 := 0. Validates p.
double entropy(const std::vector<double>& p, LogBase base = LogBase::kNats);

/// Cross entropy -sum p log q in nats. Entries of q may be zero only where p is.
double cross_entropy(const std::vector<double>& p, const std::vector<double>& q);

/// KL divergence sum p log(p/q) in nats, by direct summation.
double kl_direct(const std::vector<double>& p, const std::vector<double>& q);

/// Many-to-one map from M input states onto N groups. Stores the per-state
/// group assignment plus cached group sizes; every group must be nonempty.
class Partition {
 public:
  Partition(std::vector<std::uint32_t> assignment, std::size_t group_count);

  /// Groups of the given sizes laid out left to right over [0, M).
  static Partition contiguous(const std::vector<std::size_t>& sizes);
  static Partition identity(std::size_t m);
  static Partition single_group(std::size_t m);
  /// Two contiguous blocks, the first holding `first_size` states.
  static Partition two_block(std::size_t m, std::size_t first_size);

  std::size_t domain_size() const { return assignment_.size(); }
  std::size_t group_count() const { return sizes_.size(); }
  const std::vector<std::uint32_t>& assignment() const { return assignment_; }
  const std::vector<std::size_t>& group_sizes() const { return sizes_; }

  /// True when every group occupies one consecutive index range in left-to-right
  /// group order, i.e. the assignment vector is non-decreasing.
  bool is_contiguous() const;

  /// Boundary positions for a contiguous partition: cumulative sizes of all
  /// groups but the last.
  std::vector<std::size_t> boundaries() const;

 private:
  std::vector<std::uint32_t> assignment_;
  std::vector<std::size_t> sizes_;
};

/// Output distribution Q(y_j) = sum of p over group j.
std::vector<double> push_forward(const std::vector<double>& p, const Partition& f);

/// Modeled input distribution: q(x) = Q(y_j) / n_j for x in group j.
std::vector<double> modeled_distribution(const std::vector<double>& q_probs, const Partition& f);

/// Entropy of the modeled distribution in grouped form:
/// -sum_j Q_j log(Q_j / n_j). Equals entropy(modeled_distribution(Q, f)).
double hq_grouped(const std::vector<double>& q_probs, const Partition& f);

/// D_KL(p || q) for the modeled q, computed as H_q - H_p.
double kl_p_q(const std::vector<double>& p, const Partition& f);

struct MutualInfoResult {
  double direct;          // I(x;y) summed over the joint table
  double output_entropy;  // H of push_forward(p, f)
};

/// Information transmitted through the deterministic map. Both computation
/// paths are returned; they agree to machine precision.
MutualInfoResult transmission_rate(const std::vector<double>& p, const Partition& f);

struct BoundaryShiftResult {
  double exact;        // H_q(after) - H_q(before)
  double first_order;  // q_to - q_from + delta * log(q_from / q_to)
};

/// Effect on H_q of moving the boundary state of `donor_group` into the
/// adjacent `receiver_group`. Requires a contiguous partition, adjacent
/// groups, and donor size >= 2. delta is the moved state's probability.
BoundaryShiftResult boundary_shift_delta_hq(const std::vector<double>& p, const Partition& f,
                                            std::size_t donor_group, std::size_t receiver_group);

enum class PartitionObjective { kMaxHQ, kMinHq };

/// Globally optimal contiguous partition into n groups, by boundary scan for
/// n=2 and dynamic programming otherwise. Ties resolve to the
/// lexicographically smallest boundary vector.
Partition best_contiguous_partition(const std::vector<double>& p, std::size_t n,
                                    PartitionObjective objective);

/// Brute-force enumeration of all contiguous partitions; oracle for the DP.
/// Intended for small M (the number of boundary vectors is C(M-1, n-1)).
Partition best_contiguous_partition_exhaustive(const std::vector<double>& p, std::size_t n,
                                               PartitionObjective objective);

struct ToyExampleResult {
  std::size_t a_transmission;  // first-group size equalizing the two output masses
  std::size_t a_modeling;      // first-group size minimizing H_q
  std::vector<std::pair<double, double>> hq_curve;  // (r, H_q - log M)
};

/// Linear-decay distribution with peak 2/M, renormalized to sum exactly 1.
std::vector<double> toy_distribution(std::size_t m);

/// Closed-form H_q - log M of the two-group linear-decay model at split
/// fraction r: -r(2-r)log(2-r) - (1-r)^2 log(1-r).
double toy_hq_minus_log_m(double r);

/// Two-group analysis of the linear-decay model: the split size that
/// maximizes output entropy vs the one that minimizes H_q, plus the
/// H_q - log M curve sampled at `curve_points` interior fractions.
ToyExampleResult toy_example(std::size_t m, std::size_t curve_points = 200);

}  // namespace ipu

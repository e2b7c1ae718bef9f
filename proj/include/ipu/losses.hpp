#pragma once

#include "ipu/common.hpp"

#include <vector>

namespace ipu {

struct OodConfig {
  double k = 2.0 / 3.0;
};

enum class RepelMode { kSampleWise, kNodeWise };

struct RepelConfig {
  double alpha = 0.05;
  double epsilon = 1e-38;
  RepelMode mode = RepelMode::kSampleWise;
};

template <typename T>
struct LossResult {
  double loss = 0.0;
  RowMatrix<T> grad;
};

template <typename T>
struct MultiLossResult {
  double loss = 0.0;
  std::vector<RowMatrix<T>> grads;
};

/// Even-coding loss for one softmax output dimension:
/// sum_j m_j log m_j + k * mean_s(-sum_j y_sj log y_sj), m_j = mean_s y_sj.
/// First term drives the batch-mean output toward uniform, second drives each
/// sample toward one-hot. Rows must sum to 1 (tolerance 1e-3 so finite
/// differencing stays legal).
template <typename T>
LossResult<T> e_ood(const RowMatrix<T>& y, const OodConfig& cfg);

/// Multi-dimension even-coding loss over D softmax dimensions:
/// mean over dimension pairs of sum_{jj'} J log J with J the empirical joint
/// mean, plus (k/D) * mean_s of summed per-dimension entropies. Requires
/// D >= 2; one dimension has no pair term and must use e_ood.
template <typename T>
MultiLossResult<T> e_miod(const std::vector<RowMatrix<T>>& dims, const OodConfig& cfg);

/// Pairwise repulsion between sample outputs:
/// mean over C(S,2) pairs of -log(L1(y_s, y_s') + eps) + alpha * mean_s |y_s|_1.
/// L1 subgradient at coordinate ties is 0.
template <typename T>
LossResult<T> repel_sample_wise(const RowMatrix<T>& y, const RepelConfig& cfg);

/// Same potential between node activation patterns (columns) instead of
/// samples; the sparsity term is unchanged.
template <typename T>
LossResult<T> repel_node_wise(const RowMatrix<T>& y, const RepelConfig& cfg);

template <typename T>
LossResult<T> repel(const RowMatrix<T>& y, const RepelConfig& cfg) {
  return cfg.mode == RepelMode::kSampleWise ? repel_sample_wise(y, cfg) : repel_node_wise(y, cfg);
}

/// Squared error averaged over every entry; used by the decoder.
template <typename T>
LossResult<T> mse_loss(const RowMatrix<T>& y, const RowMatrix<T>& target);

}  // namespace ipu

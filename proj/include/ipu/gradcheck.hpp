#pragma once

#include "ipu/mlp.hpp"

#include <functional>
#include <utility>

namespace ipu {

/// Loss over a batch of model outputs: returns the value and d(loss)/d(outputs).
using OutputLossFn = std::function<std::pair<double, MatrixD>(const MatrixD&)>;

/// Central-difference check of backpropagated parameter gradients, entirely in
/// 64-bit. Compares analytic gradients against (L(p+h) - L(p-h)) / 2h on a
/// deterministic random subsample of `sample_params` parameters and returns
/// the worst relative error, |a - fd| / max(|a|, |fd|, floor).
double gradient_check(const Mlp<double>& model, const OutputLossFn& loss, const MatrixD& batch,
                      double h, std::size_t sample_params = 200, std::uint64_t seed = 1,
                      double floor = 1e-6);

/// Central differences of a scalar function over every entry of x.
MatrixD fd_gradient(const std::function<double(const MatrixD&)>& f, const MatrixD& x, double h);

double max_rel_error(const MatrixD& analytic, const MatrixD& reference, double floor = 1e-6);

struct LossGradCheck {
  double ood = 0.0;
  double miod = 0.0;
  double sample_wise = 0.0;
  double node_wise = 0.0;

  double worst() const;
};

/// Worst relative finite-difference error of each loss's analytic gradient
/// over `trials` random small batches per loss, all in 64-bit. Repulsion
/// batches are redrawn if any coordinate pair sits within 10h of a tie, where
/// the L1 kink would invalidate the comparison.
LossGradCheck check_loss_gradients(std::size_t trials, std::uint64_t seed, double h = 1e-6);

}  // namespace ipu

#pragma once

#include "ipu/mlp.hpp"

#include <cstdint>

namespace ipu {

struct OptimizerConfig {
  enum class Kind { kAdam, kAdamW };
  Kind kind = Kind::kAdam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled; used by kAdamW only
};

/// Adam / AdamW with bias correction. AdamW applies decoupled weight decay
/// (param *= 1 - lr*wd) before the moment update, so weight_decay=0 reproduces
/// Adam exactly.
template <typename T>
class AdamOptimizer {
 public:
  AdamOptimizer(const Mlp<T>& model, OptimizerConfig cfg);

  void set_lr(double lr) { cfg_.lr = lr; }
  const OptimizerConfig& config() const { return cfg_; }
  std::int64_t steps() const { return t_; }

  /// Throws NumericError naming the offending tensor if a gradient is not
  /// finite.
  void step(Mlp<T>& model, const Gradients<T>& g);

 private:
  OptimizerConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<RowMatrix<T>> mw_, vw_;
  std::vector<ColVector<T>> mb_, vb_;
};

extern template class AdamOptimizer<float>;
extern template class AdamOptimizer<double>;

}  // namespace ipu

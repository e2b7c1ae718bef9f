#include "ipu/optimizer.hpp"

#include <cmath>
#include <string>

namespace ipu {

template <typename T>
AdamOptimizer<T>::AdamOptimizer(const Mlp<T>& model, OptimizerConfig cfg) : cfg_(cfg) {
  require(cfg_.lr > 0.0, "learning rate must be positive");
  require(cfg_.beta1 >= 0.0 && cfg_.beta1 < 1.0 && cfg_.beta2 >= 0.0 && cfg_.beta2 < 1.0,
          "betas must lie in [0, 1)");
  for (const Layer<T>& layer : model.layers()) {
    mw_.push_back(RowMatrix<T>::Zero(layer.w.rows(), layer.w.cols()));
    vw_.push_back(RowMatrix<T>::Zero(layer.w.rows(), layer.w.cols()));
    mb_.push_back(ColVector<T>::Zero(layer.b.size()));
    vb_.push_back(ColVector<T>::Zero(layer.b.size()));
  }
}

namespace {

template <typename M>
void adam_update(M& param, const M& grad, M& m, M& v, double b1d, double b2d, double epsd,
                 double step_sized, double bc2d) {
  using T = typename M::Scalar;
  T b1 = T(b1d), b2 = T(b2d), eps = T(epsd), step = T(step_sized), bc2 = T(bc2d);
  m = b1 * m + (T(1) - b1) * grad;
  v = (b2 * v.array() + (T(1) - b2) * grad.array().square()).matrix();
  param.array() -= step * m.array() / ((v.array() / bc2).sqrt() + eps);
}

}  // namespace

template <typename T>
void AdamOptimizer<T>::step(Mlp<T>& model, const Gradients<T>& g) {
  require(g.dw.size() == mw_.size() && g.db.size() == mb_.size(), "gradient/model layer mismatch");
  for (std::size_t l = 0; l < mw_.size(); ++l) {
    if (!g.dw[l].allFinite())
      throw NumericError("non-finite gradient at layer" + std::to_string(l) + ".weights");
    if (!g.db[l].allFinite())
      throw NumericError("non-finite gradient at layer" + std::to_string(l) + ".biases");
  }
  t_ += 1;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  double step_size = cfg_.lr / bc1;
  T decay = T(1.0 - cfg_.lr * cfg_.weight_decay);
  for (std::size_t l = 0; l < mw_.size(); ++l) {
    Layer<T>& layer = model.layers()[l];
    if (cfg_.kind == OptimizerConfig::Kind::kAdamW && cfg_.weight_decay != 0.0) {
      layer.w *= decay;
      layer.b *= decay;
    }
    adam_update(layer.w, g.dw[l], mw_[l], vw_[l], cfg_.beta1, cfg_.beta2, cfg_.eps, step_size, bc2);
    adam_update(layer.b, g.db[l], mb_[l], vb_[l], cfg_.beta1, cfg_.beta2, cfg_.eps, step_size, bc2);
  }
}

template class AdamOptimizer<float>;
template class AdamOptimizer<double>;

}  // namespace ipu

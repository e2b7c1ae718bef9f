#include "ipu/gradcheck.hpp"

#include "ipu/losses.hpp"
#include "ipu/rng.hpp"

#include <cmath>

namespace ipu {

namespace {

struct ParamRef {
  std::size_t layer;
  bool is_bias;
  Eigen::Index offset;
};

ParamRef locate(const Mlp<double>& model, std::size_t flat) {
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto& layer = model.layers()[l];
    auto wn = static_cast<std::size_t>(layer.w.size());
    auto bn = static_cast<std::size_t>(layer.b.size());
    if (flat < wn) return {l, false, static_cast<Eigen::Index>(flat)};
    flat -= wn;
    if (flat < bn) return {l, true, static_cast<Eigen::Index>(flat)};
    flat -= bn;
  }
  throw ValidationError("parameter index out of range");
}

double eval_loss(const Mlp<double>& model, const OutputLossFn& loss, const MatrixD& batch) {
  return loss(model.forward(batch)).first;
}

}  // namespace

double gradient_check(const Mlp<double>& model, const OutputLossFn& loss, const MatrixD& batch,
                      double h, std::size_t sample_params, std::uint64_t seed, double floor) {
  require(h > 0.0, "finite-difference step must be positive");
  Mlp<double> work = model;

  Mlp<double>::Cache cache;
  const MatrixD& y = work.forward_cached(batch, cache);
  auto [value, out_grad] = loss(y);
  (void)value;
  Gradients<double> g = work.backward(cache, out_grad);

  std::size_t total = work.parameter_count();
  std::size_t n = std::min(sample_params, total);
  std::vector<std::size_t> pool(total);
  for (std::size_t i = 0; i < total; ++i) pool[i] = i;
  Rng rng(seed, static_cast<std::uint64_t>(Stream::kData));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(pool[i], pool[j]);
  }

  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ParamRef ref = locate(work, pool[i]);
    auto& layer = work.layers()[ref.layer];
    double* slot = ref.is_bias ? layer.b.data() + ref.offset : layer.w.data() + ref.offset;
    double saved = *slot;
    *slot = saved + h;
    double up = eval_loss(work, loss, batch);
    *slot = saved - h;
    double down = eval_loss(work, loss, batch);
    *slot = saved;
    double fd = (up - down) / (2.0 * h);
    const double* gm = ref.is_bias ? g.db[ref.layer].data() : g.dw[ref.layer].data();
    double analytic = gm[ref.offset];
    double err = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

MatrixD fd_gradient(const std::function<double(const MatrixD&)>& f, const MatrixD& x, double h) {
  require(h > 0.0, "finite-difference step must be positive");
  MatrixD work = x;
  MatrixD out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double saved = work.data()[i];
    work.data()[i] = saved + h;
    double up = f(work);
    work.data()[i] = saved - h;
    double down = f(work);
    work.data()[i] = saved;
    out.data()[i] = (up - down) / (2.0 * h);
  }
  return out;
}

double max_rel_error(const MatrixD& analytic, const MatrixD& reference, double floor) {
  require(analytic.rows() == reference.rows() && analytic.cols() == reference.cols(),
          "max_rel_error: shape mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    double a = analytic.data()[i];
    double b = reference.data()[i];
    double err = std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
    worst = std::max(worst, err);
  }
  return worst;
}

double LossGradCheck::worst() const {
  return std::max(std::max(ood, miod), std::max(sample_wise, node_wise));
}

namespace {

MatrixD random_softmax(Rng& rng, Eigen::Index s, Eigen::Index n) {
  MatrixD y(s, n);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = rng.normal();
  for (Eigen::Index r = 0; r < s; ++r) {
    double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

// Uniform(0.05, 0.95) batch with every pairwise coordinate difference (between
// rows or between columns, as requested) at least `gap`, so finite differences
// never straddle the L1 kink.
MatrixD random_separated(Rng& rng, Eigen::Index s, Eigen::Index d, bool columns, double gap) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    MatrixD y(s, d);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = 0.05 + 0.9 * rng.next_double();
    MatrixD v = columns ? MatrixD(y.transpose()) : y;
    double min_diff = 1.0;
    for (Eigen::Index a = 0; a < v.rows(); ++a)
      for (Eigen::Index b = a + 1; b < v.rows(); ++b)
        min_diff = std::min(min_diff, (v.row(a) - v.row(b)).cwiseAbs().minCoeff());
    if (min_diff > gap) return y;
  }
  throw NumericError("could not draw a tie-free repulsion batch");
}

}  // namespace

LossGradCheck check_loss_gradients(std::size_t trials, std::uint64_t seed, double h) {
  require(trials >= 1, "check_loss_gradients: need at least one trial");
  LossGradCheck out;
  OodConfig ood_cfg;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = make_rng(seed, Stream::kData, t);
    auto s = static_cast<Eigen::Index>(3 + rng.below(6));
    auto n = static_cast<Eigen::Index>(2 + rng.below(5));

    {
      MatrixD y = random_softmax(rng, s, n);
      LossResult<double> r = e_ood(y, ood_cfg);
      MatrixD fd = fd_gradient([&](const MatrixD& v) { return e_ood(v, ood_cfg).loss; }, y, h);
      out.ood = std::max(out.ood, max_rel_error(r.grad, fd));
    }
    {
      auto dims = static_cast<std::size_t>(2 + rng.below(2));
      std::vector<MatrixD> ys;
      for (std::size_t d = 0; d < dims; ++d)
        ys.push_back(random_softmax(rng, s, static_cast<Eigen::Index>(2 + rng.below(4))));
      MultiLossResult<double> r = e_miod(ys, ood_cfg);
      for (std::size_t d = 0; d < dims; ++d) {
        MatrixD fd = fd_gradient(
            [&](const MatrixD& v) {
              std::vector<MatrixD> probe = ys;
              probe[d] = v;
              return e_miod(probe, ood_cfg).loss;
            },
            ys[d], h);
        out.miod = std::max(out.miod, max_rel_error(r.grads[d], fd));
      }
    }
    {
      RepelConfig cfg;
      cfg.mode = RepelMode::kSampleWise;
      MatrixD y = random_separated(rng, s, n, false, 10.0 * h);
      LossResult<double> r = repel_sample_wise(y, cfg);
      MatrixD fd =
          fd_gradient([&](const MatrixD& v) { return repel_sample_wise(v, cfg).loss; }, y, h);
      out.sample_wise = std::max(out.sample_wise, max_rel_error(r.grad, fd));
    }
    {
      RepelConfig cfg;
      cfg.mode = RepelMode::kNodeWise;
      cfg.alpha = 0.0625;
      MatrixD y = random_separated(rng, s, n, true, 10.0 * h);
      LossResult<double> r = repel_node_wise(y, cfg);
      MatrixD fd = fd_gradient([&](const MatrixD& v) { return repel_node_wise(v, cfg).loss; }, y, h);
      out.node_wise = std::max(out.node_wise, max_rel_error(r.grad, fd));
    }
  }
  return out;
}

}  // namespace ipu

#include "ipu/losses.hpp"

#include <cmath>
#include <string>

namespace ipu {

namespace {

constexpr double kZeroMass = 1e-300;
constexpr double kRowSumTol = 1e-3;

double xlogx(double x) { return x > kZeroMass ? x * std::log(x) : 0.0; }

// log x + 1, the derivative of x log x; 0 where the mass convention zeroes the term
double dxlogx(double x) { return x > kZeroMass ? std::log(x) + 1.0 : 0.0; }

template <typename T>
void check_softmax_rows(const RowMatrix<T>& y, const char* who) {
  for (Eigen::Index s = 0; s < y.rows(); ++s) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      double v = static_cast<double>(y(s, j));
      require(v >= -1e-9 && std::isfinite(v), std::string(who) + ": negative or non-finite output");
      sum += v;
    }
    require(std::abs(sum - 1.0) <= kRowSumTol, std::string(who) + ": output row does not sum to 1");
  }
}

template <typename T>
void check_unit_range(const RowMatrix<T>& y, const char* who) {
  for (Eigen::Index s = 0; s < y.rows(); ++s)
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      double v = static_cast<double>(y(s, j));
      require(v >= -kRowSumTol && v <= 1.0 + kRowSumTol && std::isfinite(v),
              std::string(who) + ": output outside [0,1]");
    }
}

}  // namespace

template <typename T>
LossResult<T> e_ood(const RowMatrix<T>& y, const OodConfig& cfg) {
  require(y.rows() >= 2, "e_ood: need at least two samples");
  require(y.cols() >= 1, "e_ood: empty output");
  check_softmax_rows(y, "e_ood");

  const Eigen::Index S = y.rows(), N = y.cols();
  MatrixD yd = y.template cast<double>();
  VectorD m = yd.colwise().mean().transpose();

  double mean_term = 0.0;
  for (Eigen::Index j = 0; j < N; ++j) mean_term += xlogx(m(j));
  double ent_term = 0.0;
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index j = 0; j < N; ++j) ent_term -= xlogx(yd(s, j));
  ent_term /= static_cast<double>(S);

  MatrixD grad(S, N);
  double inv_s = 1.0 / static_cast<double>(S);
  for (Eigen::Index s = 0; s < S; ++s)
    for (Eigen::Index j = 0; j < N; ++j)
      grad(s, j) = inv_s * dxlogx(m(j)) - cfg.k * inv_s * dxlogx(yd(s, j));

  return {mean_term + cfg.k * ent_term, grad.cast<T>()};
}

template <typename T>
MultiLossResult<T> e_miod(const std::vector<RowMatrix<T>>& dims, const OodConfig& cfg) {
  const std::size_t D = dims.size();
  require(D >= 2, "e_miod: needs at least two output dimensions (use e_ood for one)");
  const Eigen::Index S = dims[0].rows();
  require(S >= 2, "e_miod: need at least two samples");
  std::vector<MatrixD> yd(D);
  for (std::size_t d = 0; d < D; ++d) {
    require(dims[d].rows() == S, "e_miod: dimensions disagree on sample count");
    check_softmax_rows(dims[d], "e_miod");
    yd[d] = dims[d].template cast<double>();
  }

  double pairs = static_cast<double>(D) * static_cast<double>(D - 1) / 2.0;
  double inv_s = 1.0 / static_cast<double>(S);

  double joint_term = 0.0;
  std::vector<MatrixD> grads(D);
  for (std::size_t d = 0; d < D; ++d) grads[d] = MatrixD::Zero(S, yd[d].cols());

  for (std::size_t a = 0; a < D; ++a) {
    for (std::size_t b = a + 1; b < D; ++b) {
      MatrixD joint = (yd[a].transpose() * yd[b]) * inv_s;  // N_a x N_b
      MatrixD dj(joint.rows(), joint.cols());
      for (Eigen::Index i = 0; i < joint.rows(); ++i)
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
          joint_term += xlogx(joint(i, j));
          dj(i, j) = dxlogx(joint(i, j));
        }
      grads[a] += (yd[b] * dj.transpose()) * (inv_s / pairs);
      grads[b] += (yd[a] * dj) * (inv_s / pairs);
    }
  }
  joint_term /= pairs;

  double ent_term = 0.0;
  double ent_scale = cfg.k / static_cast<double>(D);
  for (std::size_t d = 0; d < D; ++d)
    for (Eigen::Index s = 0; s < S; ++s)
      for (Eigen::Index j = 0; j < yd[d].cols(); ++j) {
        ent_term -= xlogx(yd[d](s, j));
        grads[d](s, j) -= ent_scale * inv_s * dxlogx(yd[d](s, j));
      }
  ent_term *= ent_scale * inv_s;

  MultiLossResult<T> out;
  out.loss = joint_term + ent_term;
  out.grads.reserve(D);
  for (std::size_t d = 0; d < D; ++d) out.grads.push_back(grads[d].cast<T>());
  return out;
}

namespace {

template <typename T>
LossResult<T> repel_rows(const RowMatrix<T>& y, double alpha_per_sample, double inv_pairs,
                         double epsilon, const char* who) {
  const Eigen::Index S = y.rows(), D = y.cols();
  LossResult<T> out;
  out.grad = RowMatrix<T>::Zero(S, D);
  double pair_loss = 0.0;
  const T eps = static_cast<T>(epsilon);
  const T c_scale = static_cast<T>(inv_pairs);
  for (Eigen::Index s = 0; s < S; ++s) {
    const T* row_s = y.data() + s * D;
    T* g_s = out.grad.data() + s * D;
    for (Eigen::Index s2 = s + 1; s2 < S; ++s2) {
      const T* row_t = y.data() + s2 * D;
      T* g_t = out.grad.data() + s2 * D;
      T dist = T(0);
      for (Eigen::Index d = 0; d < D; ++d) dist += std::abs(row_s[d] - row_t[d]);
      T denom = dist + eps;
      if (!(denom > T(0))) throw NumericError(std::string(who) + ": zero pairwise distance with zero floor");
      pair_loss -= std::log(static_cast<double>(denom));
      T c = c_scale / denom;
      for (Eigen::Index d = 0; d < D; ++d) {
        T diff = row_s[d] - row_t[d];
        T sg = (diff > T(0)) ? T(1) : ((diff < T(0)) ? T(-1) : T(0));
        g_s[d] -= c * sg;
        g_t[d] += c * sg;
      }
    }
  }
  out.loss = pair_loss * inv_pairs;
  if (alpha_per_sample != 0.0) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) total += static_cast<double>(y.data()[i]);
    out.loss += alpha_per_sample * total;
    out.grad.array() += static_cast<T>(alpha_per_sample);
  }
  return out;
}

}  // namespace

template <typename T>
LossResult<T> repel_sample_wise(const RowMatrix<T>& y, const RepelConfig& cfg) {
  require(y.rows() >= 2, "repel_sample_wise: need at least two samples");
  require(cfg.alpha >= 0.0 && cfg.epsilon >= 0.0, "repel: alpha and epsilon must be non-negative");
  check_unit_range(y, "repel_sample_wise");
  double S = static_cast<double>(y.rows());
  double inv_pairs = 2.0 / (S * (S - 1.0));
  return repel_rows(y, cfg.alpha / S, inv_pairs, cfg.epsilon, "repel_sample_wise");
}

template <typename T>
LossResult<T> repel_node_wise(const RowMatrix<T>& y, const RepelConfig& cfg) {
  require(y.cols() >= 2, "repel_node_wise: need at least two nodes");
  require(cfg.alpha >= 0.0 && cfg.epsilon >= 0.0, "repel: alpha and epsilon must be non-negative");
  check_unit_range(y, "repel_node_wise");
  double S = static_cast<double>(y.rows());
  double D = static_cast<double>(y.cols());
  double inv_pairs = 2.0 / (D * (D - 1.0));
  // Run the pair loop over node patterns, i.e. rows of the transpose.
  RowMatrix<T> yt = y.transpose();
  LossResult<T> res = repel_rows(yt, 0.0, inv_pairs, cfg.epsilon, "repel_node_wise");
  LossResult<T> out;
  out.grad = res.grad.transpose();
  out.loss = res.loss;
  if (cfg.alpha != 0.0) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) total += static_cast<double>(y.data()[i]);
    out.loss += cfg.alpha / S * total;
    out.grad.array() += static_cast<T>(cfg.alpha / S);
  }
  return out;
}

template <typename T>
LossResult<T> mse_loss(const RowMatrix<T>& y, const RowMatrix<T>& target) {
  require(y.rows() == target.rows() && y.cols() == target.cols(), "mse_loss: shape mismatch");
  require(y.size() > 0, "mse_loss: empty batch");
  double inv = 1.0 / static_cast<double>(y.size());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double d = static_cast<double>(y.data()[i]) - static_cast<double>(target.data()[i]);
    loss += d * d;
  }
  LossResult<T> out;
  out.loss = loss * inv;
  out.grad = (y - target) * static_cast<T>(2.0 * inv);
  return out;
}

template LossResult<float> e_ood(const RowMatrix<float>&, const OodConfig&);
template LossResult<double> e_ood(const RowMatrix<double>&, const OodConfig&);
template MultiLossResult<float> e_miod(const std::vector<RowMatrix<float>>&, const OodConfig&);
template MultiLossResult<double> e_miod(const std::vector<RowMatrix<double>>&, const OodConfig&);
template LossResult<float> repel_sample_wise(const RowMatrix<float>&, const RepelConfig&);
template LossResult<double> repel_sample_wise(const RowMatrix<double>&, const RepelConfig&);
template LossResult<float> repel_node_wise(const RowMatrix<float>&, const RepelConfig&);
template LossResult<double> repel_node_wise(const RowMatrix<double>&, const RepelConfig&);
template LossResult<float> mse_loss(const RowMatrix<float>&, const RowMatrix<float>&);
template LossResult<double> mse_loss(const RowMatrix<double>&, const RowMatrix<double>&);

}  // namespace ipu

#include "ipu/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace ipu {

MatrixF forward_joint(const std::vector<Mlp<float>>& models, const MatrixF& x) {
  require(!models.empty(), "forward_joint: no models");
  if (models.size() == 1) return models[0].forward(x);
  Eigen::Index total = 0;
  for (const auto& m : models) {
    require(m.input_dim() == static_cast<std::size_t>(x.cols()), "forward_joint: input width mismatch");
    total += static_cast<Eigen::Index>(m.output_dim());
  }
  MatrixF out(x.rows(), total);
  Eigen::Index col = 0;
  for (const auto& m : models) {
    auto w = static_cast<Eigen::Index>(m.output_dim());
    out.middleCols(col, w) = m.forward(x);
    col += w;
  }
  return out;
}

OutputStats output_stats(const MatrixF& outputs) {
  require(outputs.rows() >= 1 && outputs.cols() >= 1, "output_stats: empty batch");
  const Eigen::Index S = outputs.rows(), D = outputs.cols();
  OutputStats st;
  st.histogram.assign(64, 0);
  st.activation_prob.assign(static_cast<std::size_t>(D), 0.0);
  st.active_count_histogram.assign(static_cast<std::size_t>(D) + 1, 0);
  std::uint64_t near = 0;
  std::uint64_t active_total = 0;
  for (Eigen::Index s = 0; s < S; ++s) {
    int active = 0;
    for (Eigen::Index d = 0; d < D; ++d) {
      float v = outputs(s, d);
      require(std::isfinite(v), "output_stats: non-finite output");
      int bin = std::clamp(static_cast<int>(v * 64.0f), 0, 63);
      st.histogram[static_cast<std::size_t>(bin)] += 1;
      if (v <= 0.05f || v >= 0.95f) near += 1;
      if (v >= 0.5f) {
        st.activation_prob[static_cast<std::size_t>(d)] += 1.0;
        active += 1;
      }
    }
    st.active_count_histogram[static_cast<std::size_t>(active)] += 1;
    active_total += static_cast<std::uint64_t>(active);
  }
  double inv_s = 1.0 / static_cast<double>(S);
  for (double& p : st.activation_prob) p *= inv_s;
  st.mean_active = static_cast<double>(active_total) * inv_s;
  st.near_binary_fraction = static_cast<double>(near) / static_cast<double>(S * D);
  return st;
}

LabelGrid label_grid(const std::vector<Mlp<float>>& models, int resolution) {
  require(!models.empty(), "label_grid: no models");
  require(resolution >= 2, "label_grid: resolution must be >= 2");
  for (const auto& m : models) {
    require(m.input_dim() == 2, "label_grid: models must take two inputs");
    require(m.output_dim() <= 256, "label_grid: more than 256 states per dimension");
  }
  const int R = resolution;
  MatrixF grid(static_cast<Eigen::Index>(R) * R, 2);
  for (int row = 0; row < R; ++row)
    for (int col = 0; col < R; ++col) {
      grid(static_cast<Eigen::Index>(row) * R + col, 0) = static_cast<float>(col) / static_cast<float>(R - 1);
      grid(static_cast<Eigen::Index>(row) * R + col, 1) = static_cast<float>(row) / static_cast<float>(R - 1);
    }
  LabelGrid out;
  out.resolution = R;
  out.dims = static_cast<int>(models.size());
  out.labels.resize(models.size() * static_cast<std::size_t>(R) * R);
  for (std::size_t d = 0; d < models.size(); ++d) {
    MatrixF y = models[d].forward(grid);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      int best = 0;
      for (Eigen::Index j = 1; j < y.cols(); ++j)
        if (y(i, j) > y(i, best)) best = static_cast<int>(j);
      out.labels[d * static_cast<std::size_t>(R) * R + static_cast<std::size_t>(i)] =
          static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

std::size_t distinct_labels(const LabelGrid& grid, int dim) {
  require(dim >= 0 && dim < grid.dims, "distinct_labels: dim out of range");
  std::vector<bool> seen(256, false);
  std::size_t cells = static_cast<std::size_t>(grid.resolution) * grid.resolution;
  std::size_t n = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    std::uint8_t l = grid.labels[dim * cells + i];
    if (!seen[l]) {
      seen[l] = true;
      ++n;
    }
  }
  return n;
}

JointIndependence joint_independence_labels(const std::vector<int>& a, const std::vector<int>& b,
                                            int na, int nb) {
  require(a.size() == b.size() && !a.empty(), "joint_independence: label sequences must match");
  require(na >= 1 && nb >= 1, "joint_independence: state counts must be positive");
  MatrixD joint = MatrixD::Zero(na, nb);
  for (std::size_t s = 0; s < a.size(); ++s) {
    require(a[s] >= 0 && a[s] < na && b[s] >= 0 && b[s] < nb, "joint_independence: label out of range");
    joint(a[s], b[s]) += 1.0;
  }
  joint /= static_cast<double>(a.size());
  VectorD ma = joint.rowwise().sum();
  VectorD mb = joint.colwise().sum().transpose();
  JointIndependence out;
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) out.tv_distance += std::abs(joint(i, j) - ma(i) * mb(j));
  out.tv_distance *= 0.5;
  for (int i = 0; i < na; ++i)
    out.marginal_dev = std::max(out.marginal_dev, std::abs(ma(i) - 1.0 / na) * na);
  for (int j = 0; j < nb; ++j)
    out.marginal_dev = std::max(out.marginal_dev, std::abs(mb(j) - 1.0 / nb) * nb);
  return out;
}

namespace {

std::vector<int> argmax_labels(const MatrixF& y) {
  std::vector<int> labels(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < y.cols(); ++j)
      if (y(i, j) > y(i, best)) best = static_cast<int>(j);
    labels[static_cast<std::size_t>(i)] = best;
  }
  return labels;
}

}  // namespace

JointIndependence joint_independence(const MatrixF& ya, const MatrixF& yb) {
  require(ya.rows() == yb.rows(), "joint_independence: sample counts differ");
  return joint_independence_labels(argmax_labels(ya), argmax_labels(yb),
                                   static_cast<int>(ya.cols()), static_cast<int>(yb.cols()));
}

std::vector<Code> encode_rows(const MatrixF& y) {
  require(y.cols() >= 1 && y.cols() <= 128, "encode_rows: code width must be in [1, 128]");
  std::vector<Code> out(static_cast<std::size_t>(y.rows()));
  for (Eigen::Index s = 0; s < y.rows(); ++s)
    out[static_cast<std::size_t>(s)] = round_to_code(y.data() + s * y.cols(), static_cast<int>(y.cols()));
  return out;
}

BinaryCodeSet build_code_set(const MatrixF& y) {
  BinaryCodeSet set(static_cast<int>(y.cols()));
  for (const Code& c : encode_rows(y)) set.add(c);
  return set;
}

FeatureMapSet feature_maps(const std::vector<Mlp<float>>& models, const Image& img, int patch_size,
                           int channels, int threads) {
  require(!models.empty(), "feature_maps: no models");
  require(img.width >= patch_size && img.height >= patch_size, "feature_maps: image smaller than patch");
  Image local = (channels == 1 && img.channels == 3) ? to_gray(img) : img;
  require(local.channels == channels, "feature_maps: channel mismatch");

  std::size_t dim = static_cast<std::size_t>(patch_size) * patch_size * channels;
  std::size_t out_dim = 0;
  for (const auto& m : models) {
    require(m.input_dim() == dim, "feature_maps: model input does not match patch size");
    out_dim += m.output_dim();
  }
  FeatureMapSet set;
  set.out_w = local.width - patch_size + 1;
  set.out_h = local.height - patch_size + 1;
  set.maps.assign(out_dim, MatrixF::Zero(set.out_h, set.out_w));

  parallel_for(static_cast<std::size_t>(set.out_h), threads, [&](std::size_t y0, std::size_t y1) {
    MatrixF rowbatch(set.out_w, static_cast<Eigen::Index>(dim));
    for (std::size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < set.out_w; ++x) {
        float* dst = rowbatch.data() + static_cast<std::size_t>(x) * dim;
        for (int py = 0; py < patch_size; ++py)
          for (int px = 0; px < patch_size; ++px)
            for (int c = 0; c < channels; ++c)
              *dst++ = static_cast<float>(local.at(x + px, static_cast<int>(y) + py, c)) / 255.0f;
      }
      MatrixF out = forward_joint(models, rowbatch);
      for (std::size_t n = 0; n < out_dim; ++n)
        for (int x = 0; x < set.out_w; ++x)
          set.maps[n](static_cast<Eigen::Index>(y), x) = out(x, static_cast<Eigen::Index>(n));
    }
  });
  return set;
}

ProbeResponse probe_response(const std::vector<Mlp<float>>& models, const Image& probe,
                             int patch_size, int channels) {
  FeatureMapSet maps = feature_maps(models, probe, patch_size, channels);
  ProbeResponse out;
  out.columns = maps.out_w;
  double min_active_cols = 0.01 * maps.out_w;
  double min_segment_len = 0.02 * maps.out_w;
  std::size_t single = 0, multi = 0, any = 0;
  for (const MatrixF& map : maps.maps) {
    NodeProbeResponse node;
    // Probes are constant down each column, so the first map row suffices.
    std::vector<bool> active(static_cast<std::size_t>(maps.out_w));
    int n_active = 0;
    for (int x = 0; x < maps.out_w; ++x) {
      active[static_cast<std::size_t>(x)] = map(0, x) >= 0.5f;
      n_active += active[static_cast<std::size_t>(x)] ? 1 : 0;
    }
    node.activated = static_cast<double>(n_active) >= min_active_cols && n_active > 0;
    // Close single-column gaps before extracting runs.
    std::vector<bool> closed = active;
    for (int x = 1; x + 1 < maps.out_w; ++x)
      if (!active[static_cast<std::size_t>(x)] && active[static_cast<std::size_t>(x - 1)] &&
          active[static_cast<std::size_t>(x + 1)])
        closed[static_cast<std::size_t>(x)] = true;
    int x = 0;
    while (x < maps.out_w) {
      if (!closed[static_cast<std::size_t>(x)]) {
        ++x;
        continue;
      }
      int start = x;
      while (x < maps.out_w && closed[static_cast<std::size_t>(x)]) ++x;
      int len = x - start;
      if (static_cast<double>(len) >= min_segment_len) node.segments.push_back({start, x - 1});
    }
    if (node.activated) ++any;
    if (node.segments.size() == 1) ++single;
    if (node.segments.size() >= 2) ++multi;
    out.nodes.push_back(std::move(node));
  }
  double inv = out.nodes.empty() ? 0.0 : 1.0 / static_cast<double>(out.nodes.size());
  out.activated_fraction = static_cast<double>(any) * inv;
  out.single_segment_fraction = static_cast<double>(single) * inv;
  out.multi_segment_fraction = static_cast<double>(multi) * inv;
  return out;
}

Image decode_image(const std::vector<Mlp<float>>& encoders, const Mlp<float>& decoder,
                   const Image& img, int patch_size, int channels) {
  require(img.width % patch_size == 0 && img.height % patch_size == 0,
          "decode_image: image dimensions must be divisible by the patch size");
  Image local = (channels == 1 && img.channels == 3) ? to_gray(img) : img;
  require(local.channels == channels, "decode_image: channel mismatch");
  int tiles_x = local.width / patch_size;
  int tiles_y = local.height / patch_size;
  std::size_t dim = static_cast<std::size_t>(patch_size) * patch_size * channels;

  MatrixF patches(static_cast<Eigen::Index>(tiles_x) * tiles_y, static_cast<Eigen::Index>(dim));
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      float* dst = patches.data() + (static_cast<std::size_t>(ty) * tiles_x + tx) * dim;
      for (int py = 0; py < patch_size; ++py)
        for (int px = 0; px < patch_size; ++px)
          for (int c = 0; c < channels; ++c)
            *dst++ = static_cast<float>(local.at(tx * patch_size + px, ty * patch_size + py, c)) / 255.0f;
    }

  MatrixF enc = forward_joint(encoders, patches);
  require(static_cast<std::size_t>(enc.cols()) == decoder.input_dim(),
          "decode_image: decoder input does not match encoder output");
  MatrixF bits(enc.rows(), enc.cols());
  for (Eigen::Index i = 0; i < enc.size(); ++i)
    bits.data()[i] = enc.data()[i] >= 0.5f ? 1.0f : 0.0f;
  MatrixF rec = decoder.forward(bits);
  require(static_cast<std::size_t>(rec.cols()) == dim, "decode_image: decoder output does not match patch size");

  Image out = make_image(local.width, local.height, channels);
  for (int ty = 0; ty < tiles_y; ++ty)
    for (int tx = 0; tx < tiles_x; ++tx) {
      const float* src = rec.data() + (static_cast<std::size_t>(ty) * tiles_x + tx) * dim;
      for (int py = 0; py < patch_size; ++py)
        for (int px = 0; px < patch_size; ++px)
          for (int c = 0; c < channels; ++c) {
            float v = *src++ * 255.0f;
            long r = std::lround(static_cast<double>(v));
            out.at(tx * patch_size + px, ty * patch_size + py, c) =
                static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
          }
    }
  return out;
}

}  // namespace ipu

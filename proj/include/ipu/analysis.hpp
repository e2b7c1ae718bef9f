#pragma once

#include "ipu/codes.hpp"
#include "ipu/common.hpp"
#include "ipu/image.hpp"
#include "ipu/mlp.hpp"

#include <vector>

namespace ipu {

/// Concatenates the models' outputs column-wise on a shared input batch.
/// With one model this is a plain forward pass.
MatrixF forward_joint(const std::vector<Mlp<float>>& models, const MatrixF& x);

struct OutputStats {
  std::vector<std::uint64_t> histogram;  // value histogram, 64 bins over [0,1]
  std::vector<double> activation_prob;   // per node, after rounding at 0.5
  std::vector<std::uint64_t> active_count_histogram;  // active nodes per sample, 0..D
  double mean_active = 0.0;
  double near_binary_fraction = 0.0;  // values within 0.05 of 0 or 1
};

/// Value and activation statistics of sigmoid outputs.
OutputStats output_stats(const MatrixF& outputs);

struct LabelGrid {
  int resolution = 0;
  int dims = 0;
  // labels[(d * resolution + row) * resolution + col]; row indexes the second
  // input, col the first, both on an evenly spaced [0,1] grid.
  std::vector<std::uint8_t> labels;
};

/// Argmax output state of each model over an evenly spaced grid on [0,1]^2.
/// Ties take the lowest state index.
LabelGrid label_grid(const std::vector<Mlp<float>>& models, int resolution);

/// Distinct labels present for one dim of the grid.
std::size_t distinct_labels(const LabelGrid& grid, int dim);

struct JointIndependence {
  double tv_distance = 0.0;   // 0.5 * sum |joint - product of marginals|
  double marginal_dev = 0.0;  // max relative deviation of a marginal from uniform
};

/// Independence diagnostics for two label sequences with state counts na, nb.
JointIndependence joint_independence_labels(const std::vector<int>& a, const std::vector<int>& b,
                                            int na, int nb);

/// Same, taking argmax states of two softmax output batches on shared samples.
JointIndependence joint_independence(const MatrixF& ya, const MatrixF& yb);

/// Per-row binary codes (rounding at 0.5, ties to 1).
std::vector<Code> encode_rows(const MatrixF& y);
BinaryCodeSet build_code_set(const MatrixF& y);

struct FeatureMapSet {
  int out_w = 0, out_h = 0;
  std::vector<MatrixF> maps;  // one out_h x out_w map per output node, raw values
};

/// Slides the model over the image with stride 1 and records each node's raw
/// output per position.
FeatureMapSet feature_maps(const std::vector<Mlp<float>>& models, const Image& img, int patch_size,
                           int channels, int threads = 1);

struct ProbeSegment {
  int start_col = 0;
  int end_col = 0;  // inclusive
};

struct NodeProbeResponse {
  bool activated = false;           // active on >= 1% of probe columns
  std::vector<ProbeSegment> segments;  // maximal active runs >= 2% of width, 1-column gaps closed
};

struct ProbeResponse {
  int columns = 0;
  std::vector<NodeProbeResponse> nodes;
  double activated_fraction = 0.0;
  double single_segment_fraction = 0.0;
  double multi_segment_fraction = 0.0;
};

/// Response of every output node to a column-wise probe image: the probe is
/// scanned at stride 1, activations are rounded, and per-node column intervals
/// are extracted.
ProbeResponse probe_response(const std::vector<Mlp<float>>& models, const Image& probe,
                             int patch_size, int channels);

/// Encodes each non-overlapping tile, feeds the rounded code to the decoder,
/// and reassembles the image. Image dimensions must be divisible by the patch
/// size.
Image decode_image(const std::vector<Mlp<float>>& encoders, const Mlp<float>& decoder,
                   const Image& img, int patch_size, int channels);

}  // namespace ipu

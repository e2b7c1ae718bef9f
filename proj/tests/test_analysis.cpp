#include <doctest.h>

#include "helpers.hpp"
#include "ipu/analysis.hpp"

#include <cmath>
#include <limits>
#include <vector>

using namespace ipu;

namespace {

Mlp<float> zero_model(std::size_t in, std::size_t out, Activation act) {
  return Mlp<float>({{{in, out, act}}});
}

}  // namespace

TEST_CASE("forward_joint concatenates model outputs column-wise") {
  std::vector<Mlp<float>> models;
  models.push_back(zero_model(2, 3, Activation::kSigmoid));
  models.push_back(zero_model(2, 4, Activation::kSoftmax));
  MatrixF x = MatrixF::Random(5, 2);
  MatrixF y = forward_joint(models, x);
  REQUIRE(y.rows() == 5);
  REQUIRE(y.cols() == 7);
  for (int s = 0; s < 5; ++s) {
    for (int j = 0; j < 3; ++j) CHECK(y(s, j) == 0.5f);
    for (int j = 3; j < 7; ++j) CHECK(y(s, j) == doctest::Approx(0.25).epsilon(1e-6));
  }

  // One model degenerates to a plain forward pass.
  std::vector<Mlp<float>> single;
  single.push_back(zero_model(2, 3, Activation::kSigmoid));
  CHECK((forward_joint(single, x) - single[0].forward(x)).cwiseAbs().maxCoeff() == 0.0f);

  std::vector<Mlp<float>> bad;
  bad.push_back(zero_model(3, 2, Activation::kSigmoid));
  CHECK_THROWS_AS(forward_joint(bad, x), ValidationError);
  CHECK_THROWS_AS(forward_joint({}, x), ValidationError);
}

TEST_CASE("output statistics on a hand-built batch") {
  MatrixF y(2, 3);
  y << 0.0f, 0.5f, 0.999f, 0.03f, 0.96f, 0.49f;
  OutputStats st = output_stats(y);

  REQUIRE(st.histogram.size() == 64);
  CHECK(st.histogram[0] == 1);   // 0.0
  CHECK(st.histogram[1] == 1);   // 0.03
  CHECK(st.histogram[31] == 1);  // 0.49
  CHECK(st.histogram[32] == 1);  // 0.5
  CHECK(st.histogram[61] == 1);  // 0.96
  CHECK(st.histogram[63] == 1);  // 0.999
  std::uint64_t total = 0;
  for (auto c : st.histogram) total += c;
  CHECK(total == 6);

  REQUIRE(st.activation_prob.size() == 3);
  CHECK(st.activation_prob[0] == 0.0);
  CHECK(st.activation_prob[1] == 1.0);  // 0.5 rounds up
  CHECK(st.activation_prob[2] == 0.5);

  REQUIRE(st.active_count_histogram.size() == 4);
  CHECK(st.active_count_histogram[1] == 1);
  CHECK(st.active_count_histogram[2] == 1);
  CHECK(st.mean_active == doctest::Approx(1.5));
  CHECK(st.near_binary_fraction == doctest::Approx(4.0 / 6.0));

  MatrixF bad(1, 1);
  bad(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(output_stats(bad), ValidationError);
  CHECK_THROWS_AS(output_stats(MatrixF()), ValidationError);
}

TEST_CASE("untrained model statistics: every output at one half") {
  Mlp<float> m = zero_model(16, 8, Activation::kSigmoid);
  MatrixF x = MatrixF::Random(100, 16).cwiseAbs();
  OutputStats st = output_stats(m.forward(x));
  CHECK(st.histogram[32] == 800);  // everything lands in the 0.5 bin
  CHECK(st.near_binary_fraction == 0.0);
  for (double p : st.activation_prob) CHECK(p == 1.0);
  CHECK(st.mean_active == 8.0);
}

TEST_CASE("label grid splits the square along a crafted boundary") {
  // State 1 wins exactly when the first input exceeds one half.
  Mlp<float> m({{{2, 2, Activation::kSoftmax}}});
  m.layers()[0].w << 0.f, 0.f, 10.f, 0.f;
  m.layers()[0].b << 0.f, -5.f;

  LabelGrid grid = label_grid({m}, 11);
  CHECK(grid.resolution == 11);
  CHECK(grid.dims == 1);
  for (int row = 0; row < 11; ++row)
    for (int col = 0; col < 11; ++col) {
      std::uint8_t label = grid.labels[static_cast<std::size_t>(row) * 11 + col];
      // x = col/10; the tie at x = 0.5 goes to the lower state index.
      CHECK(label == (col > 5 ? 1 : 0));
    }
  CHECK(distinct_labels(grid, 0) == 2);

  // An all-zero model ties everywhere, so every cell takes state 0.
  LabelGrid flat = label_grid({zero_model(2, 5, Activation::kSoftmax)}, 4);
  for (std::uint8_t l : flat.labels) CHECK(l == 0);
  CHECK(distinct_labels(flat, 0) == 1);

  CHECK_THROWS_AS(label_grid({m}, 1), ValidationError);
  CHECK_THROWS_AS(label_grid({zero_model(3, 2, Activation::kSoftmax)}, 4), ValidationError);
  CHECK_THROWS_AS(distinct_labels(grid, 1), ValidationError);
}

TEST_CASE("independence diagnostics on label sequences") {
  // Perfectly dependent uniform labels over ten states.
  std::vector<int> a, b;
  for (int rep = 0; rep < 10; ++rep)
    for (int v = 0; v < 10; ++v) {
      a.push_back(v);
      b.push_back(v);
    }
  JointIndependence dep = joint_independence_labels(a, b, 10, 10);
  CHECK(dep.tv_distance == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(dep.marginal_dev == doctest::Approx(0.0).epsilon(1e-12));

  // Full product coverage: exactly independent.
  a.clear();
  b.clear();
  for (int i = 0; i < 100; ++i) {
    a.push_back(i / 10);
    b.push_back(i % 10);
  }
  JointIndependence ind = joint_independence_labels(a, b, 10, 10);
  CHECK(ind.tv_distance == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ind.marginal_dev == doctest::Approx(0.0).epsilon(1e-12));

  // Skewed marginals on a worked 2x2 example.
  JointIndependence skew = joint_independence_labels({0, 0, 0, 1}, {0, 1, 0, 1}, 2, 2);
  CHECK(skew.tv_distance == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(skew.marginal_dev == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(joint_independence_labels({0, 1}, {0}, 2, 2), ValidationError);
  CHECK_THROWS_AS(joint_independence_labels({0, 2}, {0, 0}, 2, 2), ValidationError);
}

TEST_CASE("independence diagnostics from softmax batches") {
  MatrixF ya(4, 2), yb(4, 2);
  // argmax labels: a = 0,0,1,1; b = 0,1,0,1 (independent, uniform)
  ya << .9f, .1f, .8f, .2f, .1f, .9f, .2f, .8f;
  yb << .7f, .3f, .3f, .7f, .6f, .4f, .4f, .6f;
  JointIndependence r = joint_independence(ya, yb);
  CHECK(r.tv_distance == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.marginal_dev == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("rows become codes by rounding at one half") {
  MatrixF y(3, 2);
  y << 0.6f, 0.4f, 0.5f, 0.5f, 0.2f, 0.9f;
  std::vector<Code> codes = encode_rows(y);
  REQUIRE(codes.size() == 3);
  CHECK(codes[0].get(0));
  CHECK_FALSE(codes[0].get(1));
  CHECK(codes[1].get(0));
  CHECK(codes[1].get(1));
  CHECK_FALSE(codes[2].get(0));
  CHECK(codes[2].get(1));

  BinaryCodeSet set = build_code_set(y);
  CHECK(set.distinct() == 3);
  CHECK(set.total() == 3);

  MatrixF wide(1, 129);
  wide.setZero();
  CHECK_THROWS_AS(encode_rows(wide), ValidationError);
}

TEST_CASE("feature maps slide the model at stride one") {
  // Model output = top-left pixel of the patch, so the map reproduces the
  // image region it can reach.
  Image img = testutil::synth_scene(3, 6, 5, 1);
  Mlp<float> m({{{9, 1, Activation::kLinear}}});
  m.layers()[0].w.setZero();
  m.layers()[0].w(0, 0) = 1.0f;

  FeatureMapSet maps = feature_maps({m}, img, 3, 1);
  CHECK(maps.out_w == 4);
  CHECK(maps.out_h == 3);
  REQUIRE(maps.maps.size() == 1);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x)
      CHECK(maps.maps[0](y, x) == doctest::Approx(img.at(x, y) / 255.0).epsilon(1e-6));

  // Identical for any worker count.
  FeatureMapSet maps3 = feature_maps({m}, img, 3, 1, 3);
  CHECK((maps.maps[0] - maps3.maps[0]).cwiseAbs().maxCoeff() == 0.0f);

  // Color input collapses through the grayscale path when asked for 1 channel.
  Image color = testutil::synth_scene(4, 8, 8, 3);
  FeatureMapSet gray_maps = feature_maps({m}, color, 3, 1);
  Image gray = to_gray(color);
  CHECK(gray_maps.maps[0](0, 0) == doctest::Approx(gray.at(0, 0) / 255.0).epsilon(1e-6));

  CHECK_THROWS_AS(feature_maps({m}, img, 7, 1), ValidationError);
  CHECK_THROWS_AS(feature_maps({zero_model(4, 1, Activation::kSigmoid)}, img, 3, 1),
                  ValidationError);
}

TEST_CASE("probe response of an untrained model: one full-width segment") {
  Image probe = gen_probe(ProbeKind::kGrayRamp, 100, 8);
  Mlp<float> m = zero_model(16, 6, Activation::kSigmoid);
  ProbeResponse r = probe_response({m}, probe, 4, 1);
  CHECK(r.columns == 97);
  REQUIRE(r.nodes.size() == 6);
  for (const NodeProbeResponse& node : r.nodes) {
    CHECK(node.activated);
    REQUIRE(node.segments.size() == 1);
    CHECK(node.segments[0].start_col == 0);
    CHECK(node.segments[0].end_col == 96);
  }
  CHECK(r.activated_fraction == 1.0);
  CHECK(r.single_segment_fraction == 1.0);
  CHECK(r.multi_segment_fraction == 0.0);
}

TEST_CASE("probe response localizes an intensity threshold") {
  // Node fires when the summed patch intensity exceeds half the range, which
  // on a ramp happens from the middle to the right edge.
  Image probe = gen_probe(ProbeKind::kGrayRamp, 259, 8);
  Mlp<float> m({{{16, 1, Activation::kSigmoid}}});
  m.layers()[0].w.setOnes();
  m.layers()[0].b << -8.0f;

  ProbeResponse r = probe_response({m}, probe, 4, 1);
  CHECK(r.columns == 256);
  REQUIRE(r.nodes.size() == 1);
  const NodeProbeResponse& node = r.nodes[0];
  CHECK(node.activated);
  REQUIRE(node.segments.size() == 1);
  CHECK(node.segments[0].end_col == 255);
  CHECK(node.segments[0].start_col > 115);
  CHECK(node.segments[0].start_col < 140);
}

TEST_CASE("decoding an image through zero models yields mid-gray") {
  // Zero encoder puts every sigmoid at 0.5, which rounds to the all-ones
  // code; the zero decoder then emits 0.5 everywhere.
  std::vector<Mlp<float>> enc;
  enc.push_back(zero_model(16, 8, Activation::kSigmoid));
  Mlp<float> dec = zero_model(8, 16, Activation::kSigmoid);
  Image img = testutil::synth_scene(9, 8, 8, 1);

  Image out = decode_image(enc, dec, img, 4, 1);
  CHECK(out.width == 8);
  CHECK(out.height == 8);
  for (std::uint8_t v : out.data) CHECK(v == 128);

  Image odd = testutil::synth_scene(9, 9, 8, 1);
  CHECK_THROWS_AS(decode_image(enc, dec, odd, 4, 1), ValidationError);
  Mlp<float> bad_in = zero_model(7, 16, Activation::kSigmoid);
  CHECK_THROWS_AS(decode_image(enc, bad_in, img, 4, 1), ValidationError);
  Mlp<float> bad_out = zero_model(8, 15, Activation::kSigmoid);
  CHECK_THROWS_AS(decode_image(enc, bad_out, img, 4, 1), ValidationError);
}

// Acceptance gate: every release-blocking behavior gets one pass/fail line
// with its measured value and the pinned limit. Exit status is the number of
// failed checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"
#include "ipu/analysis.hpp"
#include "ipu/codes.hpp"
#include "ipu/discrete.hpp"
#include "ipu/gradcheck.hpp"
#include "ipu/train.hpp"

using namespace ipu;
using nlohmann::json;

namespace {

// Pinned tolerances and limits.
constexpr double kIdentityTol = 1e-12;        // exact information identities
constexpr double kToyRatioTol = 0.002;        // |a_modeling/M - 0.602|
constexpr double kLossGradTol = 1e-3;         // FD check, 64-bit central differences
constexpr double kShiftRelTol = 0.05;         // first-order boundary shift accuracy
constexpr double kEntropyFraction = 0.95;     // held-out entropy vs log(16)
constexpr double kStateProbLo = 0.5 / 16.0;   // even-coding state bounds
constexpr double kStateProbHi = 2.0 / 16.0;
constexpr double kTvLimit = 0.05;             // joint independence
constexpr double kMarginalDevLimit = 0.2;     // marginals within 20% of 1/10
constexpr double kNearBinaryMin = 0.95;       // patch outputs within 0.05 of {0,1}
constexpr double kActivationRatioMax = 5.0;   // per-node activation spread
constexpr double kTimeIdentity = 5.0;         // seconds
constexpr double kTimeToy = 10.0;
constexpr double kTimeGrad = 30.0;
constexpr double kTimeOod = 600.0;
constexpr double kTimeMiod = 900.0;
constexpr double kTimePatch = 3600.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

template <typename Fn>
void criterion(int number, const std::string& name, Fn&& fn) {
  auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %02d %s: %s; %.2fs\n", o.pass ? "PASS" : "FAIL", number, name.c_str(),
              o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

std::vector<double> random_distribution(Rng& rng, std::size_t m) {
  std::vector<double> p(m);
  double sum = 0.0;
  for (double& v : p) {
    v = 0.05 + 0.95 * rng.next_double();
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

Partition random_partition(Rng& rng, std::size_t m, std::size_t n) {
  std::vector<std::uint32_t> a(m);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<std::uint32_t>(i);  // keep it surjective
  for (std::size_t i = n; i < m; ++i) a[i] = static_cast<std::uint32_t>(rng.below(n));
  return Partition(std::move(a), n);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

double elapsed_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared across criteria: the slow training runs feed the determinism and
// decoder checks.
struct SharedState {
  testutil::TempDir dir;
  std::string gray_manifest;
  RecipeConfig ood_cfg, miod_cfg, gray_cfg;
  bool have_ood = false, have_miod = false, have_gray = false;
};

RecipeConfig ood_config() {
  json j = {{"recipe", "two_pixel_ood"},
            {"seed", 1},
            {"epochs", 5},
            {"model",
             {{"layers",
               {{{"in", 2}, {"out", 200}, {"act", "relu"}},
                {{"in", 200}, {"out", 100}, {"act", "relu"}},
                {{"in", 100}, {"out", 16}, {"act", "softmax"}}}}}},
            {"loss", {{"loss", "ood"}}},
            {"data",
             {{"source", "synthetic_pairs"},
              {"pair_count", 1000000},
              {"batch_size", 10000},
              {"heldout_count", 100000},
              // sigma 0.2 keeps the [0,1] clamp atoms small; at 0.3 the corner
              // mass alone distorts the joint table.
              {"gaussian", {{"mean", {0.5, 0.5}}, {"cov", {{0.04, 0.036}, {0.036, 0.04}}}}}}}};
  return parse_recipe_config(j);
}

RecipeConfig miod_config() {
  json j = {{"recipe", "two_pixel_miod"},
            {"seed", 1},
            {"epochs", 5},
            {"model_count", 2},
            {"model",
             {{"layers",
               {{{"in", 2}, {"out", 200}, {"act", "relu"}},
                {{"in", 200}, {"out", 100}, {"act", "relu"}},
                {{"in", 100}, {"out", 10}, {"act", "softmax"}}}}}},
            {"loss", {{"loss", "miod"}}},
            {"data",
             {{"source", "synthetic_pairs"},
              {"pair_count", 1000000},
              {"batch_size", 10000},
              {"heldout_count", 100000},
              {"gaussian", {{"mean", {0.5, 0.5}}, {"cov", {{0.04, 0.036}, {0.036, 0.04}}}}}}}};
  return parse_recipe_config(j);
}

RecipeConfig gray_config(const std::string& manifest) {
  json j = {{"recipe", "patch_gray"},
            {"seed", 1},
            {"epochs", 1},
            {"model",
             {{"layers",
               {{{"in", 16}, {"out", 100}, {"act", "relu"}},
                {{"in", 100}, {"out", 64}, {"act", "sigmoid"}}}}}},
            // The binarized fraction grows with the Adam update count and the
            // L1 drift weight; alpha above 0.2 starts parking nodes at zero.
            {"loss", {{"loss", "repel"}, {"alpha", 0.18}}},
            {"data",
             {{"source", "patches"},
              {"corpus", manifest},
              {"patch_size", 4},
              {"channels", 1},
              {"heldout_count", 50000},
              {"sampler",
               {{"batch_images", 128},
                {"patches_per_image", 1000},
                {"minibatch_size", 50},
                {"flip_probability", 0.5},
                {"batches_per_epoch", 320}}}}}};
  return parse_recipe_config(j);
}

void save_models(const std::vector<Mlp<float>>& models, const std::string& stem) {
  for (std::size_t d = 0; d < models.size(); ++d)
    save_weights(models[d], stem + "_" + std::to_string(d) + ".ipuw");
}

bool same_files(const std::string& a, const std::string& b) {
  std::string ba = slurp(a), bb = slurp(b);
  return !ba.empty() && ba == bb;
}

}  // namespace

int main() {
  SharedState st;

  criterion(1, "information through a partition equals its output entropy", [] {
    auto t0 = std::chrono::steady_clock::now();
    Rng rng(101, 0);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      std::vector<double> p = random_distribution(rng, 1000);
      Partition f = random_partition(rng, 1000, 10);
      MutualInfoResult mi = transmission_rate(p, f);
      double hq = entropy(push_forward(p, f));
      worst = std::max(worst, std::abs(mi.direct - mi.output_entropy));
      worst = std::max(worst, std::abs(mi.direct - hq));
    }
    double secs = elapsed_since(t0);
    Outcome o;
    o.pass = worst < kIdentityTol && secs < kTimeIdentity;
    o.detail = fmt("max |I - H_Q| = %.2e over 100 random (p, f) with M=1000, N=10 (limit %.0e), "
                   "%.2fs (limit %.0fs)",
                   worst, kIdentityTol, secs, kTimeIdentity);
    return o;
  });

  criterion(2, "cross entropy against the modeled distribution equals its entropy", [] {
    Rng rng(202, 0);
    double worst_ce = 0.0, worst_grouped = 0.0;
    for (int t = 0; t < 100; ++t) {
      std::vector<double> p = random_distribution(rng, 1000);
      Partition f = random_partition(rng, 1000, 10);
      std::vector<double> q_out = push_forward(p, f);
      std::vector<double> q = modeled_distribution(q_out, f);
      double hq = hq_grouped(q_out, f);
      worst_ce = std::max(worst_ce, std::abs(cross_entropy(p, q) - hq));
      worst_grouped = std::max(worst_grouped, std::abs(hq - entropy(q)));
    }
    Outcome o;
    o.pass = worst_ce < kIdentityTol && worst_grouped < kIdentityTol;
    o.detail = fmt("max |H_pq - H_q| = %.2e, max grouped-vs-direct gap = %.2e (limit %.0e)",
                   worst_ce, worst_grouped, kIdentityTol);
    return o;
  });

  criterion(3, "linear-decay toy model: balanced split vs minimum-H_q split", [] {
    auto t0 = std::chrono::steady_clock::now();
    ToyExampleResult toy = toy_example(100000, 200);
    double ratio = static_cast<double>(toy.a_modeling) / 100000.0;
    Partition best = best_contiguous_partition(toy_distribution(100000), 2,
                                               PartitionObjective::kMinHq);
    long dp_gap = std::labs(static_cast<long>(best.boundaries()[0]) -
                            static_cast<long>(toy.a_modeling));
    double secs = elapsed_since(t0);
    Outcome o;
    bool trans_ok = toy.a_transmission >= 29288 && toy.a_transmission <= 29290;
    bool ratio_ok = std::abs(ratio - 0.602) <= kToyRatioTol;
    o.pass = trans_ok && ratio_ok && dp_gap <= 2 && secs < kTimeToy;
    o.detail = fmt("a_transmission=%zu (want 29289 +-1), a_modeling/M=%.5f (want 0.602 +-%.3f), "
                   "search gap=%ld states (limit 2), %.2fs (limit %.0fs)",
                   toy.a_transmission, ratio, kToyRatioTol, dp_gap, secs, kTimeToy);
    return o;
  });

  criterion(4, "maximizing output entropy differs from minimizing modeled entropy", [] {
    std::vector<double> p;
    for (int w = 6; w >= 1; --w) p.push_back(w / 21.0);
    Partition max_hq = best_contiguous_partition(p, 2, PartitionObjective::kMaxHQ);
    Partition min_hq = best_contiguous_partition(p, 2, PartitionObjective::kMinHq);

    // Independent enumeration of all five two-block splits.
    std::size_t best_max = 0, best_min = 0;
    double hi = -1e300, lo = 1e300;
    for (std::size_t k = 1; k <= 5; ++k) {
      Partition f = Partition::two_block(6, k);
      std::vector<double> q = push_forward(p, f);
      double out_h = entropy(q);
      double hq = hq_grouped(q, f);
      if (out_h > hi) {
        hi = out_h;
        best_max = k;
      }
      if (hq < lo) {
        lo = hq;
        best_min = k;
      }
    }
    Outcome o;
    o.pass = max_hq.boundaries()[0] == best_max && min_hq.boundaries()[0] == best_min &&
             best_max != best_min;
    o.detail = fmt("argmax H_Q splits at %zu, argmin H_q at %zu (enumeration: %zu, %zu)",
                   max_hq.boundaries()[0], min_hq.boundaries()[0], best_max, best_min);
    return o;
  });

  criterion(5, "all four loss gradients match 64-bit central differences", [] {
    auto t0 = std::chrono::steady_clock::now();
    LossGradCheck r = check_loss_gradients(20, 1);
    double secs = elapsed_since(t0);
    Outcome o;
    o.pass = r.worst() < kLossGradTol && secs < kTimeGrad;
    o.detail = fmt("worst relative error over 20 batches each: ood=%.1e miod=%.1e sample=%.1e "
                   "node=%.1e (limit %.0e), %.2fs (limit %.0fs)",
                   r.ood, r.miod, r.sample_wise, r.node_wise, kLossGradTol, secs, kTimeGrad);
    return o;
  });

  criterion(6, "first-order boundary-shift estimate tracks the exact change", [] {
    std::vector<double> p = toy_distribution(10000);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      std::size_t k = 500 + static_cast<std::size_t>(i) * (5500 - 500) / 49;
      Partition f = Partition::two_block(10000, k);
      BoundaryShiftResult r = boundary_shift_delta_hq(p, f, 0, 1);
      worst = std::max(worst, std::abs(r.exact - r.first_order) / std::abs(r.exact));
    }
    Outcome o;
    o.pass = worst < kShiftRelTol;
    o.detail = fmt("worst relative gap %.4f over 50 boundaries in [500, 5500] at M=10000 "
                   "(limit %.2f)",
                   worst, kShiftRelTol);
    return o;
  });

  criterion(7, "two-pixel even coding spreads mass over all 16 states", [&st] {
    auto t0 = std::chrono::steady_clock::now();
    st.ood_cfg = ood_config();
    TrainResult r = train(st.ood_cfg);
    save_models(r.models, st.dir.file("ood_run1"));
    st.have_ood = true;

    MatrixF y = r.models[0].forward(heldout_pairs(st.ood_cfg, nullptr));
    std::vector<double> q(16, 0.0);
    for (Eigen::Index s = 0; s < y.rows(); ++s) {
      int best = 0;
      for (Eigen::Index j = 1; j < y.cols(); ++j)
        if (y(s, j) > y(s, best)) best = static_cast<int>(j);
      q[static_cast<std::size_t>(best)] += 1.0;
    }
    for (double& v : q) v /= static_cast<double>(y.rows());
    double h = entropy(q);
    double qmin = *std::min_element(q.begin(), q.end());
    double qmax = *std::max_element(q.begin(), q.end());
    double secs = elapsed_since(t0);
    Outcome o;
    o.pass = h >= kEntropyFraction * std::log(16.0) && qmin >= kStateProbLo &&
             qmax <= kStateProbHi && secs < kTimeOod;
    o.detail = fmt("held-out state entropy %.4f (floor %.4f), probs in [%.4f, %.4f] "
                   "(bounds [%.4f, %.4f]), %.0fs (limit %.0fs)",
                   h, kEntropyFraction * std::log(16.0), qmin, qmax, kStateProbLo, kStateProbHi,
                   secs, kTimeOod);
    return o;
  });

  criterion(8, "two jointly trained models label the same data independently", [&st] {
    auto t0 = std::chrono::steady_clock::now();
    st.miod_cfg = miod_config();
    TrainResult r = train(st.miod_cfg);
    save_models(r.models, st.dir.file("miod_run1"));
    st.have_miod = true;

    MatrixF held = heldout_pairs(st.miod_cfg, nullptr);
    JointIndependence ji = joint_independence(r.models[0].forward(held), r.models[1].forward(held));
    double secs = elapsed_since(t0);
    Outcome o;
    o.pass = ji.tv_distance < kTvLimit && ji.marginal_dev < kMarginalDevLimit && secs < kTimeMiod;
    o.detail = fmt("TV(joint, product)=%.4f (limit %.2f), worst marginal deviation %.3f "
                   "(limit %.2f), %.0fs (limit %.0fs)",
                   ji.tv_distance, kTvLimit, ji.marginal_dev, kMarginalDevLimit, secs, kTimeMiod);
    return o;
  });

  criterion(9, "patch coding binarizes with evenly active nodes", [&st] {
    auto t0 = std::chrono::steady_clock::now();
    auto corpus_imgs = testutil::synth_corpus(128, 20250801, 96, 96);
    st.gray_manifest = testutil::write_corpus(corpus_imgs, st.dir.path() / "corpus");
    st.gray_cfg = gray_config(st.gray_manifest);
    TrainResult r = train(st.gray_cfg);
    save_models(r.models, st.dir.file("gray_run1"));
    st.have_gray = true;

    std::vector<Image> corpus = load_corpus(st.gray_manifest);
    MatrixF held = heldout_patches(st.gray_cfg, corpus);
    OutputStats stt = output_stats(r.models[0].forward(held));
    double pmin = *std::min_element(stt.activation_prob.begin(), stt.activation_prob.end());
    double pmax = *std::max_element(stt.activation_prob.begin(), stt.activation_prob.end());
    double ratio = pmin > 0.0 ? pmax / pmin : std::numeric_limits<double>::infinity();
    double secs = elapsed_since(t0);
    Outcome o;
    o.pass = stt.near_binary_fraction >= kNearBinaryMin && ratio <= kActivationRatioMax &&
             secs < kTimePatch;
    o.detail = fmt("near-binary fraction %.4f (floor %.2f) on 50000 held-out patches, activation "
                   "probs [%.3f, %.3f] ratio %.2f (limit %.1f), %.0fs (limit %.0fs)",
                   stt.near_binary_fraction, kNearBinaryMin, pmin, pmax, ratio,
                   kActivationRatioMax, secs, kTimePatch);
    return o;
  });

  criterion(10, "Hamming search and occupancy match brute force", [] {
    // kNN against a stable-sorted linear scan.
    Rng rng(77, 0);
    BinaryCodeSet set(96);
    for (int i = 0; i < 10000; ++i) {
      Code c;
      c.lo = rng.next_u64();
      c.hi = rng.next_u64() & ((1ULL << 32) - 1);
      set.add(c);
    }
    bool knn_ok = true;
    for (int t = 0; t < 25 && knn_ok; ++t) {
      Code q;
      q.lo = rng.next_u64();
      q.hi = rng.next_u64() & ((1ULL << 32) - 1);
      for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
        std::vector<KnnHit> fast = knn_hamming(set, q, k);
        std::vector<std::pair<int, std::uint32_t>> scan;
        for (std::size_t i = 0; i < set.codes().size(); ++i)
          scan.push_back({set.codes()[i].hamming(q), static_cast<std::uint32_t>(i)});
        std::stable_sort(scan.begin(), scan.end());
        for (std::size_t i = 0; i < k; ++i)
          if (fast[i].index != scan[i].second || fast[i].distance != scan[i].first) knn_ok = false;
      }
    }

    // Occupancy vs exhaustive enumeration of the whole 8-bit space.
    BinaryCodeSet small(8);
    for (int i = 0; i < 500; ++i) {
      Code c;
      c.lo = rng.below(256);
      small.add(c);
    }
    std::vector<OccupancyCurve> curves = occupancy_stats(small, 10, 5);
    bool occ_ok = curves.size() == 10;
    for (const OccupancyCurve& cv : curves) {
      Code anchor = small.codes()[cv.anchor_index];
      std::uint64_t seen = 0;
      for (int d = 0; d <= 8; ++d) {
        std::uint64_t manual = 0;
        for (std::uint64_t word = 0; word < 256; ++word) {  // every possible code
          Code c;
          c.lo = word;
          std::size_t idx = small.find(c);
          if (idx < small.distinct() && anchor.hamming(c) == d) manual += small.counts()[idx];
        }
        seen += manual;
        if (cv.count_at[static_cast<std::size_t>(d)] != manual ||
            cv.cumulative[static_cast<std::size_t>(d)] != seen)
          occ_ok = false;
        double want_rate = static_cast<double>(manual) / binomial_coefficient(8, d);
        if (std::abs(cv.rate[static_cast<std::size_t>(d)] - want_rate) > 1e-12) occ_ok = false;
      }
      if (seen != small.total()) occ_ok = false;
    }
    Outcome o;
    o.pass = knn_ok && occ_ok;
    o.detail = fmt("kNN matched the linear scan on 10000 codes x 25 queries x k in {1,5,10}: %s; "
                   "occupancy matched 8-bit enumeration on 10 anchors: %s",
                   knn_ok ? "yes" : "NO", occ_ok ? "yes" : "NO");
    return o;
  });

  criterion(11, "decoded reconstructions beat the mean-tile predictor", [&st] {
    Outcome o;
    if (!st.have_gray) {
      o.detail = "skipped: the patch encoder run failed earlier";
      return o;
    }
    json j = {{"recipe", "decoder"},
              {"seed", 1},
              {"epochs", 120},
              {"model",
               {{"layers",
                 {{{"in", 64}, {"out", 300}, {"act", "relu"}},
                  {{"in", 300}, {"out", 16}, {"act", "sigmoid"}}}}}},
              {"loss", {{"loss", "squared_error"}}},
              {"encoder_weights", {st.dir.file("gray_run1_0.ipuw")}},
              {"data",
               {{"source", "patches"},
                {"corpus", st.gray_manifest},
                {"patch_size", 4},
                {"channels", 1},
                {"pair_count", 150000},
                {"batch_size", 128}}}};
    TrainResult r = train(parse_recipe_config(j));

    // Held-out scene, not in the training corpus.
    Image scene = testutil::synth_scene(987654321, 96, 96);
    std::vector<Mlp<float>> encoders;
    encoders.push_back(load_weights(st.dir.file("gray_run1_0.ipuw")));
    Image decoded = decode_image(encoders, r.models[0], scene, 4, 1);

    double se = 0.0;
    for (std::size_t i = 0; i < decoded.data.size(); ++i) {
      double d = (static_cast<double>(decoded.data[i]) - static_cast<double>(scene.data[i])) / 255.0;
      se += d * d;
    }
    double mse = se / static_cast<double>(decoded.data.size());

    // Baseline: predict the image's own mean 4x4 tile everywhere.
    std::vector<double> mean_tile(16, 0.0);
    int tiles = (96 / 4) * (96 / 4);
    for (int ty = 0; ty < 96 / 4; ++ty)
      for (int tx = 0; tx < 96 / 4; ++tx)
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x)
            mean_tile[static_cast<std::size_t>(y) * 4 + x] +=
                scene.at(tx * 4 + x, ty * 4 + y) / 255.0;
    for (double& v : mean_tile) v /= tiles;
    double base_se = 0.0;
    for (int ty = 0; ty < 96 / 4; ++ty)
      for (int tx = 0; tx < 96 / 4; ++tx)
        for (int y = 0; y < 4; ++y)
          for (int x = 0; x < 4; ++x) {
            double d = scene.at(tx * 4 + x, ty * 4 + y) / 255.0 -
                       mean_tile[static_cast<std::size_t>(y) * 4 + x];
            base_se += d * d;
          }
    double base_mse = base_se / static_cast<double>(decoded.data.size());
    o.pass = mse < base_mse;
    o.detail = fmt("reconstruction mse %.5f vs mean-tile baseline %.5f on a held-out 96x96 scene "
                   "(%zu distinct codes in the table)",
                   mse, base_mse, static_cast<std::size_t>(r.table.inputs.rows()));
    return o;
  });

  criterion(12, "identical seeds reproduce every trained weight file bit for bit", [&st] {
    Outcome o;
    if (!st.have_ood || !st.have_miod || !st.have_gray) {
      o.detail = "skipped: an earlier training run failed";
      return o;
    }
    save_models(train(st.ood_cfg).models, st.dir.file("ood_run2"));
    save_models(train(st.miod_cfg).models, st.dir.file("miod_run2"));
    save_models(train(st.gray_cfg).models, st.dir.file("gray_run2"));
    bool ood_same = same_files(st.dir.file("ood_run1_0.ipuw"), st.dir.file("ood_run2_0.ipuw"));
    bool miod_same = same_files(st.dir.file("miod_run1_0.ipuw"), st.dir.file("miod_run2_0.ipuw")) &&
                     same_files(st.dir.file("miod_run1_1.ipuw"), st.dir.file("miod_run2_1.ipuw"));
    bool gray_same = same_files(st.dir.file("gray_run1_0.ipuw"), st.dir.file("gray_run2_0.ipuw"));
    o.pass = ood_same && miod_same && gray_same;
    o.detail = fmt("byte-identical re-runs: two-pixel %s, joint pair %s, patch %s",
                   ood_same ? "yes" : "NO", miod_same ? "yes" : "NO", gray_same ? "yes" : "NO");
    return o;
  });

  if (failures == 0)
    std::printf("all 12 acceptance checks passed\n");
  else
    std::printf("%d acceptance check(s) failed\n", failures);
  return failures;
}

#pragma once

#include "ipu/common.hpp"
#include "ipu/image.hpp"
#include "ipu/rng.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace ipu {

/// Uniformly random horizontally neighboring pixel pairs, scaled to [0,1].
/// Color images are converted to grayscale first. Output row s is
/// (left, right).
MatrixF sample_pixel_pairs(const std::vector<Image>& images, std::size_t count, Rng& rng);

/// Correlated 2D Gaussian via Box-Muller and Cholesky; cov is row-major
/// {c00, c01, c10, c11} and must be symmetric positive-definite. Values are
/// not clamped.
MatrixD synth_gaussian_2d(std::size_t count, const std::array<double, 2>& mean,
                          const std::array<double, 4>& cov, Rng& rng);

struct SamplerConfig {
  std::uint64_t seed = 0;
  std::size_t batch_images = 0;
  std::size_t patches_per_image = 0;
  std::size_t minibatch_size = 0;
  double flip_probability = 0.0;
  bool sequential_minibatches = false;
  std::size_t batches_per_epoch = 1;
};

struct PatchSource {
  std::uint32_t image = 0;
  std::uint16_t x = 0, y = 0;
  bool flipped = false;
};

struct PatchBatch {
  MatrixF values;  // S x (P*P*C)
  std::vector<PatchSource> sources;
};

/// Two-level patch stream: each top-level batch draws `batch_images` images
/// (with replacement), decides a horizontal flip per image, extracts
/// `patches_per_image` random patches from each, then cuts the pool into
/// mini-batches of `minibatch_size` either in extraction order (sequential)
/// or after one shuffle. A trailing partial mini-batch is dropped. The whole
/// stream is a function of (corpus, config), independent of scheduling.
class PatchSampler {
 public:
  PatchSampler(const std::vector<Image>* images, SamplerConfig cfg, int patch_size, int channels);

  std::size_t minibatches_per_batch() const;
  std::size_t steps_per_epoch() const { return cfg_.batches_per_epoch * minibatches_per_batch(); }
  std::size_t feature_dim() const;

  PatchBatch next();
  void reset();

 private:
  void build_pool(std::uint64_t batch_index);

  const std::vector<Image>* images_;
  SamplerConfig cfg_;
  int patch_;
  int channels_;
  std::uint64_t batch_counter_ = 0;
  std::size_t cursor_ = 0;  // row offset into the current pool
  PatchBatch pool_;
};

/// One-off pool of patches with uniformly random positions; used for held-out
/// evaluation sets.
PatchBatch sample_patch_pool(const std::vector<Image>& images, std::size_t count, int patch_size,
                             int channels, Rng& rng);

}  // namespace ipu

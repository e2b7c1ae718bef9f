#include "ipu/sampling.hpp"

#include <cmath>

namespace ipu {

MatrixF sample_pixel_pairs(const std::vector<Image>& images, std::size_t count, Rng& rng) {
  require(!images.empty(), "pixel pair sampling needs at least one image");
  std::vector<Image> gray;
  gray.reserve(images.size());
  for (const Image& img : images) {
    require(img.width >= 2, "pixel pair sampling needs image width >= 2");
    gray.push_back(to_gray(img));
  }
  MatrixF out(static_cast<Eigen::Index>(count), 2);
  for (std::size_t s = 0; s < count; ++s) {
    const Image& img = gray[rng.below(gray.size())];
    int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - 1)));
    int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height)));
    out(static_cast<Eigen::Index>(s), 0) = static_cast<float>(img.at(x, y)) / 255.0f;
    out(static_cast<Eigen::Index>(s), 1) = static_cast<float>(img.at(x + 1, y)) / 255.0f;
  }
  return out;
}

MatrixD synth_gaussian_2d(std::size_t count, const std::array<double, 2>& mean,
                          const std::array<double, 4>& cov, Rng& rng) {
  require(std::abs(cov[1] - cov[2]) <= 1e-12, "covariance must be symmetric");
  double a = cov[0];
  double det = cov[0] * cov[3] - cov[1] * cov[2];
  require(a > 0.0 && det > 0.0, "covariance must be positive-definite");
  // 2x2 Cholesky: [[l00, 0], [l10, l11]].
  double l00 = std::sqrt(a);
  double l10 = cov[2] / l00;
  double l11 = std::sqrt(cov[3] - l10 * l10);
  MatrixD out(static_cast<Eigen::Index>(count), 2);
  for (std::size_t s = 0; s < count; ++s) {
    auto [z0, z1] = rng.normal_pair();
    out(static_cast<Eigen::Index>(s), 0) = mean[0] + l00 * z0;
    out(static_cast<Eigen::Index>(s), 1) = mean[1] + l10 * z0 + l11 * z1;
  }
  return out;
}

namespace {

void extract_patch(const Image& img, int patch, int channels, int x, int y, float* dst) {
  for (int py = 0; py < patch; ++py)
    for (int px = 0; px < patch; ++px)
      for (int c = 0; c < channels; ++c)
        *dst++ = static_cast<float>(img.at(x + px, y + py, c)) / 255.0f;
}

}  // namespace

PatchSampler::PatchSampler(const std::vector<Image>* images, SamplerConfig cfg, int patch_size,
                           int channels)
    : images_(images), cfg_(cfg), patch_(patch_size), channels_(channels) {
  require(images_ != nullptr && !images_->empty(), "patch sampler needs a corpus");
  require(patch_ >= 1, "patch size must be positive");
  require(channels_ == 1 || channels_ == 3, "patches are 1- or 3-channel");
  require(cfg_.batch_images >= 1 && cfg_.patches_per_image >= 1, "batch shape must be positive");
  require(cfg_.minibatch_size >= 1, "minibatch size must be positive");
  require(cfg_.minibatch_size <= cfg_.batch_images * cfg_.patches_per_image,
          "minibatch larger than batch");
  require(cfg_.batches_per_epoch >= 1, "batches_per_epoch must be positive");
  require(cfg_.flip_probability >= 0.0 && cfg_.flip_probability <= 1.0,
          "flip probability must be in [0,1]");
  for (const Image& img : *images_) {
    require(img.width >= patch_ && img.height >= patch_, "patch larger than image");
    require(img.channels == channels_ || (channels_ == 1 && img.channels == 3),
            "corpus channel count does not match sampler");
  }
}

std::size_t PatchSampler::minibatches_per_batch() const {
  return (cfg_.batch_images * cfg_.patches_per_image) / cfg_.minibatch_size;
}

std::size_t PatchSampler::feature_dim() const {
  return static_cast<std::size_t>(patch_) * patch_ * channels_;
}

void PatchSampler::build_pool(std::uint64_t batch_index) {
  std::size_t pool_size = cfg_.batch_images * cfg_.patches_per_image;
  pool_.values.resize(static_cast<Eigen::Index>(pool_size), static_cast<Eigen::Index>(feature_dim()));
  pool_.sources.resize(pool_size);

  Rng pick = make_rng(cfg_.seed, Stream::kData, batch_index);
  std::vector<std::uint32_t> chosen(cfg_.batch_images);
  std::vector<bool> flipped(cfg_.batch_images);
  for (std::size_t i = 0; i < cfg_.batch_images; ++i) {
    chosen[i] = static_cast<std::uint32_t>(pick.below(images_->size()));
    flipped[i] = pick.next_double() < cfg_.flip_probability;
  }

  // Per-slot generators keep extraction embarrassingly parallel while the
  // emitted pool stays byte-identical to the serial order.
  for (std::size_t i = 0; i < cfg_.batch_images; ++i) {
    Rng slot = make_rng(cfg_.seed, Stream::kAugment,
                        batch_index * cfg_.batch_images + i);
    const Image& base = (*images_)[chosen[i]];
    Image local = flipped[i] ? flip_horizontal(base) : base;
    if (channels_ == 1 && local.channels == 3) local = to_gray(local);
    for (std::size_t k = 0; k < cfg_.patches_per_image; ++k) {
      std::size_t row = i * cfg_.patches_per_image + k;
      int x = static_cast<int>(slot.below(static_cast<std::uint64_t>(local.width - patch_ + 1)));
      int y = static_cast<int>(slot.below(static_cast<std::uint64_t>(local.height - patch_ + 1)));
      extract_patch(local, patch_, channels_, x, y,
                    pool_.values.data() + row * feature_dim());
      pool_.sources[row] = {chosen[i], static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                            flipped[i]};
    }
  }

  if (!cfg_.sequential_minibatches) {
    std::vector<std::uint32_t> order(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) order[i] = static_cast<std::uint32_t>(i);
    Rng shuffle_rng = make_rng(cfg_.seed, Stream::kShuffle, batch_index);
    shuffle_rng.shuffle(order);
    MatrixF shuffled(pool_.values.rows(), pool_.values.cols());
    std::vector<PatchSource> shuffled_src(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) {
      shuffled.row(static_cast<Eigen::Index>(i)) = pool_.values.row(order[i]);
      shuffled_src[i] = pool_.sources[order[i]];
    }
    pool_.values = std::move(shuffled);
    pool_.sources = std::move(shuffled_src);
  }
  cursor_ = 0;
}

PatchBatch PatchSampler::next() {
  std::size_t usable = minibatches_per_batch() * cfg_.minibatch_size;
  if (cursor_ >= usable || pool_.sources.empty()) {
    build_pool(batch_counter_);
    batch_counter_ += 1;
  }
  PatchBatch mb;
  mb.values = pool_.values.middleRows(static_cast<Eigen::Index>(cursor_),
                                      static_cast<Eigen::Index>(cfg_.minibatch_size));
  mb.sources.assign(pool_.sources.begin() + static_cast<std::ptrdiff_t>(cursor_),
                    pool_.sources.begin() + static_cast<std::ptrdiff_t>(cursor_ + cfg_.minibatch_size));
  cursor_ += cfg_.minibatch_size;
  return mb;
}

void PatchSampler::reset() {
  batch_counter_ = 0;
  cursor_ = 0;
  pool_ = PatchBatch{};
}

PatchBatch sample_patch_pool(const std::vector<Image>& images, std::size_t count, int patch_size,
                             int channels, Rng& rng) {
  require(!images.empty(), "patch pool needs a corpus");
  std::vector<Image> local;
  local.reserve(images.size());
  for (const Image& img : images) {
    require(img.width >= patch_size && img.height >= patch_size, "patch larger than image");
    local.push_back(channels == 1 && img.channels == 3 ? to_gray(img) : img);
    require(local.back().channels == channels, "corpus channel count does not match request");
  }
  std::size_t dim = static_cast<std::size_t>(patch_size) * patch_size * channels;
  PatchBatch out;
  out.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  out.sources.resize(count);
  for (std::size_t s = 0; s < count; ++s) {
    auto idx = static_cast<std::uint32_t>(rng.below(local.size()));
    const Image& img = local[idx];
    int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width - patch_size + 1)));
    int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height - patch_size + 1)));
    extract_patch(img, patch_size, channels, x, y, out.values.data() + s * dim);
    out.sources[s] = {idx, static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), false};
  }
  return out;
}

}  // namespace ipu

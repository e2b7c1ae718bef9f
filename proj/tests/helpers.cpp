#include "helpers.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "ipu/common.hpp"
#include "ipu/rng.hpp"

namespace testutil {

namespace {

double uniform(ipu::Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.next_double(); }

}  // namespace

ipu::Image synth_scene(std::uint64_t seed, int width, int height, int channels, double noise_sigma) {
  ipu::Rng rng(seed, 0xC0FFEE);
  std::vector<std::vector<double>> ch(static_cast<std::size_t>(channels));
  for (auto& plane : ch) plane.assign(static_cast<std::size_t>(width) * height, 0.0);
  auto at = [&](int c, int x, int y) -> double& {
    return ch[static_cast<std::size_t>(c)][static_cast<std::size_t>(y) * width + x];
  };

  for (int c = 0; c < channels; ++c) {
    double base = uniform(rng, 40, 215);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) at(c, x, y) = base;
  }

  std::uint64_t gradients = rng.below(2);
  for (std::uint64_t i = 0; i < gradients; ++i) {
    double ang = uniform(rng, 0, 2.0 * std::numbers::pi);
    double amp = uniform(rng, 10, 40);
    double inv = 1.0 / std::max(width, height);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double v = amp * ((std::cos(ang) * x + std::sin(ang) * y) * inv - 0.5);
        for (int c = 0; c < channels; ++c) at(c, x, y) += v;
      }
  }

  std::uint64_t blobs = 2 + rng.below(3);
  for (std::uint64_t i = 0; i < blobs; ++i) {
    double cx = uniform(rng, 0, width), cy = uniform(rng, 0, height);
    double s = uniform(rng, 4, 18);
    double amp = uniform(rng, -80, 80);
    double inv = 1.0 / (2.0 * s * s);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        double v = amp * std::exp(-d2 * inv);
        for (int c = 0; c < channels; ++c) at(c, x, y) += v;
      }
  }

  std::uint64_t rects = 6 + rng.below(7);
  auto span = [](int v) { return static_cast<std::uint64_t>(std::max(1, v)); };  // tiny images
  for (std::uint64_t i = 0; i < rects; ++i) {
    int x0 = static_cast<int>(rng.below(span(width - 8)));
    int y0 = static_cast<int>(rng.below(span(height - 8)));
    int rw = 6 + static_cast<int>(rng.below(span(width / 2 - 6)));
    int rh = 6 + static_cast<int>(rng.below(span(height / 2 - 6)));
    for (int c = 0; c < channels; ++c) {
      double fill = uniform(rng, 0, 255);
      for (int y = y0; y < std::min(height, y0 + rh); ++y)
        for (int x = x0; x < std::min(width, x0 + rw); ++x) at(c, x, y) = fill;
    }
  }

  ipu::Image img = ipu::make_image(width, height, channels);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        double v = at(c, x, y);
        if (noise_sigma > 0) v += noise_sigma * rng.normal();
        long r = std::lround(v);
        img.at(x, y, c) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
      }
  return img;
}

std::vector<ipu::Image> synth_corpus(std::size_t count, std::uint64_t seed, int width, int height,
                                     int channels, double noise_sigma) {
  std::vector<ipu::Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(synth_scene(seed * 1000003ULL + i, width, height, channels, noise_sigma));
  return out;
}

std::string write_corpus(const std::vector<ipu::Image>& images, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::string manifest = (dir / "manifest.txt").string();
  std::ofstream mf(manifest);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const char* ext = images[i].channels == 3 ? "ppm" : "pgm";
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04zu.%s", i, ext);
    ipu::save_image(images[i], (dir / name).string());
    mf << name << '\n';
  }
  mf.flush();
  if (!mf) throw ipu::IoError("cannot write corpus manifest");
  return manifest;
}

TempDir::TempDir() {
  static std::atomic<std::uint64_t> counter{0};
  auto base = std::filesystem::temp_directory_path();
  std::uint64_t stamp =
      static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
  path_ = base / ("ipu_test_" + std::to_string(stamp) + "_" + std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace testutil

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ipu/image.hpp"

namespace testutil {

/// Synthetic scene for corpus-dependent tests: flat rectangles over a soft
/// background (weak gradient + Gaussian blobs), light noise, 8-bit quantized.
/// Rectangles are drawn last so exactly-flat regions dominate, mimicking the
/// flat-patch-heavy statistics of natural images at small patch sizes.
ipu::Image synth_scene(std::uint64_t seed, int width = 96, int height = 96, int channels = 1,
                       double noise_sigma = 0.5);

std::vector<ipu::Image> synth_corpus(std::size_t count, std::uint64_t seed, int width = 96,
                                     int height = 96, int channels = 1, double noise_sigma = 0.5);

/// Saves the images plus a manifest listing them; returns the manifest path.
std::string write_corpus(const std::vector<ipu::Image>& images, const std::filesystem::path& dir);

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ipu {

/// 8-bit raster, row-major, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 or 3
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

Image make_image(int width, int height, int channels, std::uint8_t fill = 0);

/// Reads binary PGM (P5) or PPM (P6) with maxval 255.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

/// In-memory decode/encode of the same formats.
Image decode_pnm(const std::uint8_t* bytes, std::size_t len);
std::vector<std::uint8_t> encode_pnm(const Image& img);

/// BT.601 luma: round(0.299 R + 0.587 G + 0.114 B). Grayscale input passes
/// through unchanged.
Image to_gray(const Image& img);

/// Mirror around the vertical axis.
Image flip_horizontal(const Image& img);

enum class ProbeKind { kGrayRamp, kHueSpectrum };
ProbeKind probe_kind_from_name(const std::string& name);

/// Column-wise probe images, 3 channels. gray_ramp: value round(255 x/(W-1))
/// on all channels. hue_spectrum: saturated HSV hue sweep 0 to 270 degrees,
/// so column 0 is pure red.
Image gen_probe(ProbeKind kind, int width, int height);

}  // namespace ipu

#include "ipu/image.hpp"

#include "ipu/common.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ipu {

Image make_image(int width, int height, int channels, std::uint8_t fill) {
  require(width >= 1 && height >= 1, "image dimensions must be positive");
  require(channels == 1 || channels == 3, "images are 1- or 3-channel");
  Image img;
  img.width = width;
  img.height = height;
  img.channels = channels;
  img.data.assign(static_cast<std::size_t>(width) * height * channels, fill);
  return img;
}

namespace {

struct ByteReader {
  const std::uint8_t* p;
  std::size_t n;
  std::size_t pos = 0;

  int peek() const { return pos < n ? p[pos] : -1; }
  int get() { return pos < n ? p[pos++] : -1; }

  // Skips whitespace and '#' comment lines between header tokens.
  void skip_space() {
    for (;;) {
      int c = peek();
      if (c == '#') {
        while (c != -1 && c != '\n') c = get();
      } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        get();
      } else {
        return;
      }
    }
  }

  long token_int() {
    skip_space();
    int c = peek();
    if (c < '0' || c > '9') throw IoError("malformed PNM header: expected integer");
    long v = 0;
    while (c >= '0' && c <= '9') {
      v = v * 10 + (c - '0');
      if (v > 1000000000L) throw IoError("malformed PNM header: integer overflow");
      get();
      c = peek();
    }
    return v;
  }
};

}  // namespace

Image decode_pnm(const std::uint8_t* bytes, std::size_t len) {
  ByteReader r{bytes, len};
  int m0 = r.get(), m1 = r.get();
  if (m0 != 'P' || (m1 != '5' && m1 != '6')) throw IoError("malformed PNM header: expected P5 or P6");
  int channels = (m1 == '6') ? 3 : 1;
  long w = r.token_int();
  long h = r.token_int();
  long maxval = r.token_int();
  if (w < 1 || h < 1) throw IoError("malformed PNM header: bad dimensions");
  if (maxval != 255) throw IoError("unsupported PNM maxval (only 255)");
  int sep = r.get();
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
    throw IoError("malformed PNM header: missing separator before payload");
  std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * channels;
  if (r.n - r.pos < need) throw IoError("truncated PNM payload");
  Image img = make_image(static_cast<int>(w), static_cast<int>(h), channels);
  std::copy(bytes + r.pos, bytes + r.pos + need, img.data.begin());
  return img;
}

Image load_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open image: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes.data(), bytes.size());
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
  require(img.channels == 1 || img.channels == 3, "images are 1- or 3-channel");
  require(img.data.size() == static_cast<std::size_t>(img.width) * img.height * img.channels,
          "image buffer size mismatch");
  char header[64];
  int n = std::snprintf(header, sizeof(header), "P%c\n%d %d\n255\n", img.channels == 3 ? '6' : '5',
                        img.width, img.height);
  std::vector<std::uint8_t> out(header, header + n);
  out.insert(out.end(), img.data.begin(), img.data.end());
  return out;
}

void save_image(const Image& img, const std::string& path) {
  std::vector<std::uint8_t> bytes = encode_pnm(img);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing image: " + path);
}

Image to_gray(const Image& img) {
  if (img.channels == 1) return img;
  Image out = make_image(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double v = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
      long r = std::lround(v);
      out.at(x, y) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
    }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

ProbeKind probe_kind_from_name(const std::string& name) {
  if (name == "gray_ramp") return ProbeKind::kGrayRamp;
  if (name == "hue_spectrum") return ProbeKind::kHueSpectrum;
  throw ValidationError("unknown probe kind: " + name);
}

namespace {

void hsv_to_rgb(double h_deg, std::uint8_t rgb[3]) {
  // Saturation and value fixed at 1.
  double h = h_deg / 60.0;
  int sector = static_cast<int>(h) % 6;
  double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (sector) {
    case 0: r = 1; g = x; break;
    case 1: r = x; g = 1; break;
    case 2: g = 1; b = x; break;
    case 3: g = x; b = 1; break;
    case 4: r = x; b = 1; break;
    case 5: r = 1; b = x; break;
  }
  rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * r));
  rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * g));
  rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * b));
}

}  // namespace

Image gen_probe(ProbeKind kind, int width, int height) {
  require(width >= 2, "probe needs width >= 2");
  require(height >= 1, "probe needs height >= 1");
  Image img = make_image(width, height, 3);
  for (int x = 0; x < width; ++x) {
    std::uint8_t px[3];
    if (kind == ProbeKind::kGrayRamp) {
      auto v = static_cast<std::uint8_t>(std::lround(255.0 * x / (width - 1)));
      px[0] = px[1] = px[2] = v;
    } else {
      hsv_to_rgb(270.0 * x / (width - 1), px);
    }
    for (int y = 0; y < height; ++y)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = px[c];
  }
  return img;
}

}  // namespace ipu

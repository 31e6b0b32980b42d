#pragma once

#include <cstddef>
#include <vector>

namespace panoscan {

// Interleaved RGB, row-major, values in [0,1]. Equirectangular panoramas are
// Images with width == 2*height; viewport renders are square.
struct Image {
  std::size_t width = 0, height = 0;
  std::vector<double> data;  // height * width * 3

  Image() = default;
  Image(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), data(w * h * 3, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data[(y * width + x) * 3 + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * 3 + c];
  }
  std::size_t pixels() const { return width * height; }
  bool is_erp() const { return width == 2 * height && height > 0; }
};

struct GrayImage {
  std::size_t width = 0, height = 0;
  std::vector<double> data;  // height * width

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), data(w * h, fill) {}

  double& at(std::size_t y, std::size_t x) { return data[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return data[y * width + x]; }
};

// Rec.601 luma (0.299, 0.587, 0.114), clamped to [0,1].
GrayImage to_gray(const Image& img);

// Histogram Shannon entropy in bits: bin = min(floor(v*bins), bins-1),
// H = -sum p log2 p over nonempty bins.
double shannon_entropy(const GrayImage& img, std::size_t bins = 256);

// Mean local SSIM over all positions where the full 11x11 Gaussian (sigma 1.5)
// window fits; C1=(0.01)^2, C2=(0.03)^2 for unit dynamic range.
double ssim(const GrayImage& a, const GrayImage& b);

}  // namespace panoscan

#include "panoscan/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

GrayImage to_gray(const Image& img) {
  GrayImage g(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const double y = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] +
                     0.114 * img.data[3 * i + 2];
    g.data[i] = std::clamp(y, 0.0, 1.0);
  }
  return g;
}

double shannon_entropy(const GrayImage& img, std::size_t bins) {
  if (img.data.empty() || bins == 0)
    throw ContractError("shannon_entropy: empty image or zero bins");
  std::vector<std::size_t> hist(bins, 0);
  for (double v : img.data) {
    auto b = static_cast<std::size_t>(std::floor(v * static_cast<double>(bins)));
    hist[std::min(b, bins - 1)]++;
  }
  const double n = static_cast<double>(img.data.size());
  double h = 0.0;
  for (std::size_t c : hist) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWin> gaussian_kernel() {
  std::array<double, kWin> k{};
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Valid-mode separable Gaussian filter; output is (w-kWin+1) x (h-kWin+1).
std::vector<double> gauss_valid(const std::vector<double>& src, std::size_t w,
                                std::size_t h) {
  static const std::array<double, kWin> k = gaussian_kernel();
  const std::size_t ow = w - kWin + 1, oh = h - kWin + 1;
  std::vector<double> tmp(ow * h, 0.0);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[i] * src[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  }
  std::vector<double> out(ow * oh, 0.0);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kWin; ++i) acc += k[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw ArgumentError("ssim: dimension mismatch");
  if (a.width < kWin || a.height < kWin)
    throw ArgumentError("ssim: image smaller than the 11x11 window");

  const std::size_t n = a.data.size();
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.data[i] * a.data[i];
    bb[i] = b.data[i] * b.data[i];
    ab[i] = a.data[i] * b.data[i];
  }
  const auto mu_a = gauss_valid(a.data, a.width, a.height);
  const auto mu_b = gauss_valid(b.data, a.width, a.height);
  const auto m_aa = gauss_valid(aa, a.width, a.height);
  const auto m_bb = gauss_valid(bb, a.width, a.height);
  const auto m_ab = gauss_valid(ab, a.width, a.height);

  double acc = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = m_aa[i] - ma * ma;
    const double vb = m_bb[i] - mb * mb;
    const double cov = m_ab[i] - ma * mb;
    acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
           ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
  }
  return acc / static_cast<double>(mu_a.size());
}

}  // namespace panoscan

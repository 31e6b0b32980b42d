#include "panoscan/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "panoscan/errors.hpp"
#include "panoscan/param_set.hpp"
#include "panoscan/rng.hpp"

namespace panoscan {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Mean of the Gaussian-weighted local variance over all valid 11x11 windows
// (the SSIM window); falls back to the global variance when the image is too
// small to fit one.
double mean_window_variance(const GrayImage& g) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  const std::size_t w = g.width, h = g.height;

  double mu = 0.0, sq = 0.0;
  for (double v : g.data) {
    mu += v;
    sq += v * v;
  }
  mu /= static_cast<double>(g.data.size());
  const double global_var =
      std::max(0.0, sq / static_cast<double>(g.data.size()) - mu * mu);
  if (w < kWin || h < kWin) return global_var;

  double k[kWin];
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    ksum += k[i];
  }
  for (double& v : k) v /= ksum;

  // Separable filtering of x and x^2, valid windows only.
  const std::size_t cw = w - kWin + 1;
  std::vector<double> rm(h * cw), rs(h * cw);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < cw; ++x) {
      double m = 0.0, s = 0.0;
      for (int i = 0; i < kWin; ++i) {
        const double v = g.data[y * w + x + static_cast<std::size_t>(i)];
        m += k[i] * v;
        s += k[i] * v * v;
      }
      rm[y * cw + x] = m;
      rs[y * cw + x] = s;
    }
  const std::size_t ch = h - kWin + 1;
  double acc = 0.0;
  for (std::size_t y = 0; y < ch; ++y)
    for (std::size_t x = 0; x < cw; ++x) {
      double m = 0.0, s = 0.0;
      for (int i = 0; i < kWin; ++i) {
        m += k[i] * rm[(y + static_cast<std::size_t>(i)) * cw + x];
        s += k[i] * rs[(y + static_cast<std::size_t>(i)) * cw + x];
      }
      acc += std::max(0.0, s - m * m);
    }
  return acc / static_cast<double>(ch * cw);
}

// Fixed a-priori location/scale for each raw component; keeps the encoder
// dataset-independent while bringing the blocks to comparable magnitudes.
void standardize(std::vector<double>& raw) {
  auto norm = [&](std::size_t i, double m, double c) {
    raw[i] = (raw[i] - m) / c;
  };
  for (std::size_t i = 0; i < 16; ++i) norm(i, 0.5, 0.2);       // cell lum
  for (std::size_t i = 16; i < 24; ++i) norm(i, 0.125, 0.1);    // grad hist
  for (std::size_t i = 24; i < 27; ++i) norm(i, 0.5, 0.2);      // ch mean
  for (std::size_t i = 27; i < 30; ++i) norm(i, 0.15, 0.08);    // ch std
  norm(30, 6.0, 1.5);                                           // entropy
  norm(31, 0.003, 0.005);                                       // window var
}

}  // namespace

Tensor raw_descriptor(const Image& img) {
  if (img.width < 8 || img.height < 8)
    throw ArgumentError("raw_descriptor: image smaller than 8x8");
  const GrayImage g = to_gray(img);
  const std::size_t w = g.width, h = g.height;
  Tensor out({kRawDescriptorDim}, 0.0);

  // (a) 4x4 mean-luminance grid.
  for (std::size_t cy = 0; cy < 4; ++cy) {
    const std::size_t y0 = cy * h / 4, y1 = (cy + 1) * h / 4;
    for (std::size_t cx = 0; cx < 4; ++cx) {
      const std::size_t x0 = cx * w / 4, x1 = (cx + 1) * w / 4;
      double acc = 0.0;
      for (std::size_t y = y0; y < y1; ++y)
        for (std::size_t x = x0; x < x1; ++x) acc += g.data[y * w + x];
      out.data[cy * 4 + cx] =
          acc / static_cast<double>((y1 - y0) * (x1 - x0));
    }
  }

  // (b) 8-bin Sobel orientation histogram, magnitude-weighted.
  double hist[8] = {0};
  double total = 0.0;
  for (std::size_t y = 1; y + 1 < h; ++y)
    for (std::size_t x = 1; x + 1 < w; ++x) {
      auto p = [&](std::size_t yy, std::size_t xx) { return g.data[yy * w + xx]; };
      const double gx = (p(y - 1, x + 1) + 2 * p(y, x + 1) + p(y + 1, x + 1)) -
                        (p(y - 1, x - 1) + 2 * p(y, x - 1) + p(y + 1, x - 1));
      const double gy = (p(y + 1, x - 1) + 2 * p(y + 1, x) + p(y + 1, x + 1)) -
                        (p(y - 1, x - 1) + 2 * p(y - 1, x) + p(y - 1, x + 1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      const double theta = std::atan2(gy, gx);  // (-pi, pi]
      auto bin = static_cast<std::size_t>((theta + kPi) / (2.0 * kPi) * 8.0);
      if (bin > 7) bin = 7;
      hist[bin] += mag;
      total += mag;
    }
  if (total > 0.0)
    for (int i = 0; i < 8; ++i) out.data[16 + i] = hist[i] / total;

  // (c) per-channel mean and std.
  for (std::size_t c = 0; c < 3; ++c) {
    double mu = 0.0, sq = 0.0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double v = img.at(y, x, c);
        mu += v;
        sq += v * v;
      }
    const auto n = static_cast<double>(w * h);
    mu /= n;
    out.data[24 + c] = mu;
    out.data[27 + c] = std::sqrt(std::max(0.0, sq / n - mu * mu));
  }

  // (d) histogram entropy and mean local variance.
  out.data[30] = shannon_entropy(g);
  out.data[31] = mean_window_variance(g);
  return out;
}

Tensor projection_matrix(std::size_t d) {
  if (d == 0) throw ArgumentError("projection_matrix: d must be positive");
  Rng rng(fnv1a_str("panoscan-feature-projection"));
  Tensor p({d, kRawDescriptorDim}, 0.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kRawDescriptorDim));
  for (double& v : p.data) v = rng.normal() * scale;
  return p;
}

Tensor encode_viewport(const Image& img, std::size_t d) {
  std::vector<double> raw = raw_descriptor(img).data;
  standardize(raw);
  const Tensor p = projection_matrix(d);
  Tensor out({d}, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < kRawDescriptorDim; ++c)
      acc += p.data[r * kRawDescriptorDim + c] * raw[c];
    out.data[r] = acc;
  }
  return out;
}

namespace {

// Box downscale by pixel-center binning; bilinear fallback for cells no
// source center lands in (upscaling).
Image resize_box(const Image& src, std::size_t tw, std::size_t th) {
  Image out(tw, th);
  std::vector<double> acc(tw * th * 3, 0.0);
  std::vector<std::size_t> cnt(tw * th, 0);
  for (std::size_t y = 0; y < src.height; ++y) {
    const auto ty = std::min(th - 1, y * th / src.height);
    for (std::size_t x = 0; x < src.width; ++x) {
      const auto tx = std::min(tw - 1, x * tw / src.width);
      for (std::size_t c = 0; c < 3; ++c)
        acc[(ty * tw + tx) * 3 + c] += src.at(y, x, c);
      cnt[ty * tw + tx]++;
    }
  }
  for (std::size_t ty = 0; ty < th; ++ty)
    for (std::size_t tx = 0; tx < tw; ++tx) {
      const std::size_t i = ty * tw + tx;
      if (cnt[i] > 0) {
        for (std::size_t c = 0; c < 3; ++c)
          out.at(ty, tx, c) = acc[i * 3 + c] / static_cast<double>(cnt[i]);
      } else {
        const double sy = (static_cast<double>(ty) + 0.5) *
                              static_cast<double>(src.height) /
                              static_cast<double>(th) -
                          0.5;
        const double sx = (static_cast<double>(tx) + 0.5) *
                              static_cast<double>(src.width) /
                              static_cast<double>(tw) -
                          0.5;
        const double cy = std::clamp(sy, 0.0, static_cast<double>(src.height - 1));
        const double cx = std::clamp(sx, 0.0, static_cast<double>(src.width - 1));
        const auto y0 = static_cast<std::size_t>(cy);
        const auto x0 = static_cast<std::size_t>(cx);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const std::size_t x1 = std::min(x0 + 1, src.width - 1);
        const double fy = cy - static_cast<double>(y0);
        const double fx = cx - static_cast<double>(x0);
        for (std::size_t c = 0; c < 3; ++c)
          out.at(ty, tx, c) =
              (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
              fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
      }
    }
  return out;
}

}  // namespace

Tensor encode_global(const Image& erp, std::size_t d) {
  return encode_viewport(resize_box(erp, 64, 32), d);
}

std::vector<Tensor> precompute_all(const Image& erp, const ViewportGrid& grid,
                                   std::size_t res, std::size_t d) {
  std::vector<Tensor> out;
  out.reserve(grid.size());
  for (const Viewport& vp : grid.viewports)
    out.push_back(encode_viewport(render_viewport(erp, vp, res), d));
  return out;
}

ImageFeatures compute_features(const Image& erp, const ViewportGrid& grid,
                               std::size_t res, std::size_t d) {
  return ImageFeatures{precompute_all(erp, grid, res, d), encode_global(erp, d)};
}

void save_features(const std::string& path, const ImageFeatures& f) {
  ParameterSet ps;
  ps.add("global", f.global);
  for (std::size_t i = 0; i < f.viewports.size(); ++i) {
    char name[24];
    std::snprintf(name, sizeof(name), "vp/%04zu", i);
    ps.add(name, f.viewports[i]);
  }
  ps.save(path);
}

ImageFeatures load_features(const std::string& path) {
  const ParameterSet ps = ParameterSet::load_any(path);
  ImageFeatures f;
  std::size_t n_vp = 0;
  for (const auto& e : ps.entries())
    if (e.name.rfind("vp/", 0) == 0) ++n_vp;
  f.viewports.resize(n_vp);
  bool have_global = false;
  for (const auto& e : ps.entries()) {
    if (e.name == "global") {
      f.global = e.value;
      have_global = true;
    } else if (e.name.rfind("vp/", 0) == 0) {
      std::size_t idx = 0;
      try {
        idx = static_cast<std::size_t>(std::stoul(e.name.substr(3)));
      } catch (const std::exception&) {
        throw DataError("bad viewport entry '" + e.name + "' in " + path);
      }
      if (idx >= n_vp) throw DataError("feature file has gaps in " + path);
      f.viewports[idx] = e.value;
    } else {
      throw DataError("unexpected entry '" + e.name + "' in " + path);
    }
  }
  if (!have_global || n_vp == 0)
    throw DataError("feature file incomplete: " + path);
  return f;
}

}  // namespace panoscan

#include "panoscan/distortions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "panoscan/errors.hpp"
#include "panoscan/rng.hpp"

namespace panoscan {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* severity_name(Severity s) {
  switch (s) {
    case Severity::weak: return "weak";
    case Severity::mild: return "mild";
    case Severity::strong: return "strong";
  }
  throw ContractError("severity_name: bad enum");
}

Severity severity_from_string(const std::string& s) {
  if (s == "weak") return Severity::weak;
  if (s == "mild") return Severity::mild;
  if (s == "strong") return Severity::strong;
  throw ArgumentError("unknown severity: " + s);
}

const char* kind_name(DistortKind k) {
  switch (k) {
    case DistortKind::jpeg: return "jpeg";
    case DistortKind::motion_blur: return "motion_blur";
    case DistortKind::defocus_blur: return "defocus_blur";
    case DistortKind::color_jitter: return "color_jitter";
    case DistortKind::poisson: return "poisson";
  }
  throw ContractError("kind_name: bad enum");
}

DistortKind kind_from_string(const std::string& s) {
  if (s == "jpeg") return DistortKind::jpeg;
  if (s == "motion_blur") return DistortKind::motion_blur;
  if (s == "defocus_blur") return DistortKind::defocus_blur;
  if (s == "color_jitter") return DistortKind::color_jitter;
  if (s == "poisson") return DistortKind::poisson;
  throw ArgumentError("unknown distortion kind: " + s);
}

// ---------------------------------------------------------------- kernels

std::vector<KernelTap> motion_kernel(int k, double angle) {
  if (k < 1 || k % 2 == 0) throw ArgumentError("motion_kernel: k must be odd >= 1");
  if (k == 1) return {{0, 0, 1.0}};

  const double c = std::cos(angle), s = std::sin(angle);
  const double half = static_cast<double>(k) / 2.0;

  // Split the segment t*(c,s), t in [-half, half], at every unit-cell
  // boundary crossing; each piece contributes its length to the cell that
  // contains its midpoint.
  std::vector<double> ts = {-half, half};
  auto add_crossings = [&](double comp) {
    if (std::fabs(comp) < 1e-12) return;
    for (int m = -(k + 1); m <= k + 1; ++m) {
      const double t = (static_cast<double>(m) + 0.5) / comp;
      if (t > -half && t < half) ts.push_back(t);
    }
  };
  add_crossings(c);
  add_crossings(s);
  std::sort(ts.begin(), ts.end());

  std::map<std::pair<int, int>, double> cells;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    const double len = ts[i + 1] - ts[i];
    if (len <= 0.0) continue;
    const double tm = 0.5 * (ts[i] + ts[i + 1]);
    const int cx = static_cast<int>(std::floor(tm * c + 0.5));
    const int cy = static_cast<int>(std::floor(tm * s + 0.5));
    cells[{cx, cy}] += len;
    total += len;
  }
  std::vector<KernelTap> taps;
  taps.reserve(cells.size());
  for (const auto& [xy, len] : cells)
    taps.push_back({xy.first, xy.second, len / total});
  return taps;
}

std::vector<KernelTap> disk_kernel(double radius) {
  if (radius < 0.0) throw ArgumentError("disk_kernel: negative radius");
  const int sub = 16;  // coverage sampled on a 16x16 subgrid per cell
  const int ext = static_cast<int>(std::ceil(radius + 0.5));
  std::vector<KernelTap> taps;
  long total = 0;
  for (int dy = -ext; dy <= ext; ++dy) {
    for (int dx = -ext; dx <= ext; ++dx) {
      long hits = 0;
      for (int a = 0; a < sub; ++a) {
        const double y = dy + (a + 0.5) / sub - 0.5;
        for (int b = 0; b < sub; ++b) {
          const double x = dx + (b + 0.5) / sub - 0.5;
          if (x * x + y * y <= radius * radius) ++hits;
        }
      }
      if (hits > 0) {
        taps.push_back({dx, dy, static_cast<double>(hits)});
        total += hits;
      }
    }
  }
  if (taps.empty()) return {{0, 0, 1.0}};  // radius below sampling resolution
  for (auto& t : taps) t.w /= static_cast<double>(total);
  return taps;
}

namespace {

Image convolve_replicate(const Image& img, const std::vector<KernelTap>& taps) {
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  Image out(img.width, img.height);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      for (const auto& t : taps) {
        const auto sx = std::clamp<std::ptrdiff_t>(x + t.dx, 0, w - 1);
        const auto sy = std::clamp<std::ptrdiff_t>(y + t.dy, 0, h - 1);
        for (std::size_t ch = 0; ch < 3; ++ch)
          acc[ch] += t.w * img.at(sy, sx, ch);
      }
      for (std::size_t ch = 0; ch < 3; ++ch) out.at(y, x, ch) = acc[ch];
    }
  }
  return out;
}

}  // namespace

Image motion_blur(const Image& img, int k, double angle) {
  return convolve_replicate(img, motion_kernel(k, angle));
}

Image defocus_blur(const Image& img, double radius) {
  if (radius == 0.0) return img;
  return convolve_replicate(img, disk_kernel(radius));
}

// ---------------------------------------------------------------- jpeg

namespace {

// Standard JPEG luminance quantization table (zig-zag-free, row-major).
constexpr int kQuantBase[64] = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

// Orthonormal 8-point DCT basis: B[u][x] = a_u cos((2x+1) u pi / 16).
std::array<std::array<double, 8>, 8> dct_basis() {
  std::array<std::array<double, 8>, 8> b{};
  for (int u = 0; u < 8; ++u) {
    const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
    for (int x = 0; x < 8; ++x)
      b[u][x] = a * std::cos((2 * x + 1) * u * kPi / 16.0);
  }
  return b;
}

}  // namespace

Image jpeg_proxy(const Image& img, int quality) {
  if (quality < 1 || quality > 100)
    throw ArgumentError("jpeg_proxy: quality must be in [1,100]");

  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<double, 64> quant{};
  for (int i = 0; i < 64; ++i)
    quant[i] = std::clamp((kQuantBase[i] * scale + 50) / 100, 1, 255);

  static const auto basis = dct_basis();
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  Image out(img.width, img.height);

  double f[8][8], tmp[8][8], coef[8][8];
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::ptrdiff_t by = 0; by < h; by += 8) {
      for (std::ptrdiff_t bx = 0; bx < w; bx += 8) {
        for (int y = 0; y < 8; ++y) {
          const auto sy = std::min<std::ptrdiff_t>(by + y, h - 1);
          for (int x = 0; x < 8; ++x) {
            const auto sx = std::min<std::ptrdiff_t>(bx + x, w - 1);
            f[y][x] = img.at(sy, sx, ch) * 255.0 - 128.0;
          }
        }
        // coef = B f B^T, quantize, then f = B^T coef B.
        for (int u = 0; u < 8; ++u)
          for (int x = 0; x < 8; ++x) {
            double acc = 0.0;
            for (int y = 0; y < 8; ++y) acc += basis[u][y] * f[y][x];
            tmp[u][x] = acc;
          }
        for (int u = 0; u < 8; ++u)
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int x = 0; x < 8; ++x) acc += tmp[u][x] * basis[v][x];
            const double q = quant[u * 8 + v];
            coef[u][v] = static_cast<double>(std::lround(acc / q)) * q;
          }
        for (int y = 0; y < 8; ++y)
          for (int v = 0; v < 8; ++v) {
            double acc = 0.0;
            for (int u = 0; u < 8; ++u) acc += basis[u][y] * coef[u][v];
            tmp[y][v] = acc;
          }
        for (int y = 0; y < 8; ++y) {
          const auto oy = by + y;
          if (oy >= h) break;
          for (int x = 0; x < 8; ++x) {
            const auto ox = bx + x;
            if (ox >= w) break;
            double acc = 0.0;
            for (int v = 0; v < 8; ++v) acc += tmp[y][v] * basis[v][x];
            out.at(oy, ox, ch) = std::clamp((acc + 128.0) / 255.0, 0.0, 1.0);
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- jitter

namespace {

// Rec.601-weighted RGB->YIQ and its exact numeric inverse, so identity
// factors round-trip to ~1e-16.
constexpr double kYiq[3][3] = {{0.299, 0.587, 0.114},
                               {0.595716, -0.274453, -0.321263},
                               {0.211456, -0.522591, 0.311135}};

std::array<std::array<double, 3>, 3> invert3(const double m[3][3]) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  std::array<std::array<double, 3>, 3> inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

}  // namespace

Image color_jitter(const Image& img, const JitterFactors& f) {
  Image out = img;
  for (auto& v : out.data) v *= f.brightness;

  double mean[3] = {0, 0, 0};
  for (std::size_t i = 0; i < out.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) mean[c] += out.data[3 * i + c];
  for (auto& m : mean) m /= static_cast<double>(out.pixels());
  for (std::size_t i = 0; i < out.pixels(); ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      double& v = out.data[3 * i + c];
      v = mean[c] + f.contrast * (v - mean[c]);
    }

  static const auto inv = invert3(kYiq);
  const double hr = f.hue_deg * kPi / 180.0;
  const double ch = std::cos(hr), sh = std::sin(hr);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    double* p = &out.data[3 * i];
    const double luma = kYiq[0][0] * p[0] + kYiq[0][1] * p[1] + kYiq[0][2] * p[2];
    for (std::size_t c = 0; c < 3; ++c)
      p[c] = luma + f.saturation * (p[c] - luma);

    const double y = kYiq[0][0] * p[0] + kYiq[0][1] * p[1] + kYiq[0][2] * p[2];
    const double iq_i = kYiq[1][0] * p[0] + kYiq[1][1] * p[1] + kYiq[1][2] * p[2];
    const double iq_q = kYiq[2][0] * p[0] + kYiq[2][1] * p[1] + kYiq[2][2] * p[2];
    const double ri = ch * iq_i - sh * iq_q;
    const double rq = sh * iq_i + ch * iq_q;
    for (std::size_t c = 0; c < 3; ++c)
      p[c] = inv[c][0] * y + inv[c][1] * ri + inv[c][2] * rq;
  }
  for (auto& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

JitterFactors jitter_from_magnitude(double magnitude, std::uint64_t seed) {
  if (magnitude < 0.0) throw ArgumentError("jitter: negative magnitude");
  Rng rng(seed);
  const double u[4] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                       rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  double raw = 0.0;
  for (double v : u) raw = std::max(raw, std::fabs(v));
  const double s = raw < 1e-12 ? 0.0 : magnitude / raw;
  JitterFactors f;
  f.brightness = 1.0 + u[0] * s;
  f.contrast = 1.0 + u[1] * s;
  f.saturation = 1.0 + u[2] * s;
  f.hue_deg = u[3] * s * 50.0;
  return f;
}

// ---------------------------------------------------------------- poisson

Image poisson_noise(const Image& img, double lambda, std::uint64_t seed) {
  if (lambda <= 0.0) throw ArgumentError("poisson_noise: lambda must be > 0");
  Rng rng(seed);
  Image out = img;
  for (auto& v : out.data) {
    const double n = static_cast<double>(rng.poisson(std::max(v, 0.0) * lambda));
    v = std::clamp(n / lambda, 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------- dispatch

Image apply_distortion(const Image& img, const DistortionSpec& spec) {
  switch (spec.kind) {
    case DistortKind::jpeg:
      return jpeg_proxy(img, static_cast<int>(std::lround(spec.param)));
    case DistortKind::motion_blur: {
      const double angle = Rng(spec.seed).uniform(0.0, kPi);
      return motion_blur(img, static_cast<int>(std::lround(spec.param)), angle);
    }
    case DistortKind::defocus_blur:
      return defocus_blur(img, spec.param);
    case DistortKind::color_jitter:
      return color_jitter(img, jitter_from_magnitude(spec.param, spec.seed));
    case DistortKind::poisson:
      return poisson_noise(img, spec.param, spec.seed);
  }
  throw ContractError("apply_distortion: bad kind");
}

namespace {

// Supplementary parameter ranges per severity. Jitter magnitudes sample the
// upper half of each table bound so realized severities stay ordered.
double draw_param(DistortKind kind, Severity sev, Rng& rng) {
  switch (kind) {
    case DistortKind::jpeg:
      switch (sev) {
        case Severity::weak: return static_cast<double>(rng.uniform_int(85, 95));
        case Severity::mild: return static_cast<double>(rng.uniform_int(60, 75));
        case Severity::strong: return static_cast<double>(rng.uniform_int(20, 40));
      }
      break;
    case DistortKind::motion_blur:
      switch (sev) {
        case Severity::weak: return static_cast<double>(3 + 2 * rng.uniform_int(0, 2));
        case Severity::mild: return static_cast<double>(7 + 2 * rng.uniform_int(0, 2));
        case Severity::strong: return static_cast<double>(11 + 2 * rng.uniform_int(0, 4));
      }
      break;
    case DistortKind::defocus_blur:
      switch (sev) {
        case Severity::weak: return rng.uniform(1.0, 2.0);
        case Severity::mild: return rng.uniform(2.0, 3.0);
        case Severity::strong: return rng.uniform(4.0, 6.0);
      }
      break;
    case DistortKind::color_jitter:
      switch (sev) {
        case Severity::weak: return rng.uniform(0.025, 0.05);
        case Severity::mild: return rng.uniform(0.075, 0.15);
        case Severity::strong: return rng.uniform(0.2, 0.4);
      }
      break;
    case DistortKind::poisson:
      switch (sev) {
        case Severity::weak: break;  // excluded from weak
        case Severity::mild: return rng.uniform(18.0, 30.0);
        case Severity::strong: return rng.uniform(6.0, 12.0);
      }
      break;
  }
  throw ContractError("draw_param: invalid kind/severity combination");
}

}  // namespace

DistortionSpec sample_distortion(Severity sev, Rng& rng) {
  static const DistortKind kAll[5] = {DistortKind::jpeg, DistortKind::motion_blur,
                                      DistortKind::defocus_blur,
                                      DistortKind::color_jitter, DistortKind::poisson};
  const int n_kinds = sev == Severity::weak ? 4 : 5;
  DistortionSpec spec;
  spec.kind = kAll[rng.uniform_int(0, n_kinds - 1)];
  spec.param = draw_param(spec.kind, sev, rng);
  spec.seed = rng.next_u64();
  return spec;
}

std::pair<Image, DistortionSpec> augment(const Image& img, Severity sev,
                                         std::uint64_t seed) {
  Rng rng(seed);
  DistortionSpec spec = sample_distortion(sev, rng);
  return {apply_distortion(img, spec), spec};
}

double severity_ramp(DistortKind kind, double param) {
  double s = 0.0;
  switch (kind) {
    case DistortKind::jpeg: s = (95.0 - param) / 75.0; break;
    case DistortKind::motion_blur: s = (param - 3.0) / 16.0; break;
    case DistortKind::defocus_blur: s = (param - 1.0) / 5.0; break;
    case DistortKind::color_jitter: s = param / 0.4; break;
    case DistortKind::poisson:
      s = (1.0 / param - 1.0 / 30.0) / (1.0 / 6.0 - 1.0 / 30.0);
      break;
  }
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace panoscan

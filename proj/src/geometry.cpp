#include "panoscan/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

namespace {
constexpr double kPi = 3.14159265358979323846;

// Bilinear ERP sample at continuous pixel coordinates (fx, fy): integer
// coordinates are pixel centers; x wraps around the seam, y clamps at poles.
double sample_erp(const Image& erp, double fx, double fy, std::size_t c) {
  const auto w = static_cast<std::ptrdiff_t>(erp.width);
  const auto h = static_cast<std::ptrdiff_t>(erp.height);
  const double xf = std::floor(fx), yf = std::floor(fy);
  const double tx = fx - xf, ty = fy - yf;
  auto x0 = static_cast<std::ptrdiff_t>(xf);
  auto y0 = static_cast<std::ptrdiff_t>(yf);
  const std::ptrdiff_t xi0 = ((x0 % w) + w) % w;
  const std::ptrdiff_t xi1 = ((x0 + 1) % w + w) % w;
  const std::ptrdiff_t yi0 = std::clamp<std::ptrdiff_t>(y0, 0, h - 1);
  const std::ptrdiff_t yi1 = std::clamp<std::ptrdiff_t>(y0 + 1, 0, h - 1);
  const double v00 = erp.at(yi0, xi0, c), v01 = erp.at(yi0, xi1, c);
  const double v10 = erp.at(yi1, xi0, c), v11 = erp.at(yi1, xi1, c);
  const double top = v00 + tx * (v01 - v00);
  const double bot = v10 + tx * (v11 - v10);
  return top + ty * (bot - top);
}
}  // namespace

double wrap_yaw(double yaw) {
  double y = std::remainder(yaw, 2.0 * kPi);  // (-pi, pi], exact
  if (y == kPi) y = -kPi;
  return y;
}

ViewportGrid build_grid(std::size_t n_yaw, std::size_t n_pitch, double fov_deg) {
  if (n_yaw == 0 || n_pitch == 0)
    throw ArgumentError("build_grid: zero viewport count");
  if (fov_deg <= 0.0 || fov_deg >= 180.0)
    throw ArgumentError("build_grid: fov must be in (0, 180)");
  ViewportGrid grid;
  grid.n_yaw = n_yaw;
  grid.n_pitch = n_pitch;
  grid.viewports.reserve(n_yaw * n_pitch);
  for (std::size_t j = 0; j < n_pitch; ++j) {
    for (std::size_t i = 0; i < n_yaw; ++i) {
      Viewport vp;
      vp.index = j * n_yaw + i;
      vp.yaw = wrap_yaw(-kPi + (static_cast<double>(i) + 0.5) * 2.0 * kPi /
                                   static_cast<double>(n_yaw));
      vp.pitch = -kPi / 2.0 + (static_cast<double>(j) + 0.5) * kPi /
                                  static_cast<double>(n_pitch);
      vp.fov_deg = fov_deg;
      grid.viewports.push_back(vp);
    }
  }
  return grid;
}

Image render_viewport(const Image& erp, const Viewport& vp, std::size_t res) {
  if (res < 2) throw ArgumentError("render_viewport: res must be >= 2");
  if (erp.width == 0 || erp.height == 0)
    throw ArgumentError("render_viewport: empty panorama");

  const double yaw = wrap_yaw(vp.yaw);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(vp.pitch), sp = std::sin(vp.pitch);
  const double half_tan = std::tan(vp.fov_deg * kPi / 180.0 / 2.0);
  const double w = static_cast<double>(erp.width);
  const double h = static_cast<double>(erp.height);

  Image out(res, res);
  for (std::size_t py = 0; py < res; ++py) {
    // NDC in [-1,1], v pointing down the output image.
    const double v = ((static_cast<double>(py) + 0.5) / static_cast<double>(res)) * 2.0 - 1.0;
    for (std::size_t px = 0; px < res; ++px) {
      const double u = ((static_cast<double>(px) + 0.5) / static_cast<double>(res)) * 2.0 - 1.0;
      // Camera-frame ray (x right, y up, z forward).
      const double rx = u * half_tan;
      const double ry = -v * half_tan;
      const double rz = 1.0;
      // Pitch about x, then yaw about y, so the center ray lands at
      // longitude=yaw, latitude=pitch.
      const double ex = rx;
      const double ey = ry * cp + rz * sp;
      const double ez = -ry * sp + rz * cp;
      const double dx = ex * cy + ez * sy;
      const double dy = ey;
      const double dz = -ex * sy + ez * cy;
      const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
      const double lon = std::atan2(dx, dz);
      const double lat = std::asin(std::clamp(dy / norm, -1.0, 1.0));
      const double fx = (lon + kPi) / (2.0 * kPi) * w - 0.5;
      const double fy = (kPi / 2.0 - lat) / kPi * h - 0.5;
      for (std::size_t c = 0; c < 3; ++c)
        out.at(py, px, c) = sample_erp(erp, fx, fy, c);
    }
  }
  return out;
}

double coverage_fraction(const std::set<std::size_t>& visited, std::size_t x_count) {
  if (x_count == 0) throw ContractError("coverage_fraction: X = 0");
  for (std::size_t idx : visited) {
    if (idx >= x_count) throw ContractError("coverage_fraction: index out of range");
  }
  return static_cast<double>(visited.size()) / static_cast<double>(x_count);
}

}  // namespace panoscan

#include "panoscan/viz.hpp"

#include <algorithm>
#include <cmath>

#include "panoscan/errors.hpp"

namespace panoscan {

std::vector<double> visit_counts(const ViewportGrid& grid,
                                 const std::vector<Scanpath>& paths) {
  std::vector<double> counts(grid.size(), 0.0);
  for (const auto& p : paths)
    for (std::size_t idx : p.indices) {
      if (idx >= counts.size())
        throw ContractError("visit_counts: viewport index out of range");
      counts[idx] += 1.0;
    }
  return counts;
}

GrayImage visit_density(std::size_t width, std::size_t height,
                        const ViewportGrid& grid,
                        const std::vector<double>& counts) {
  if (width == 0 || height == 0)
    throw ArgumentError("visit_density: empty output frame");
  if (counts.size() != grid.size())
    throw ContractError("visit_density: counts/grid size mismatch");

  constexpr double kPi = 3.14159265358979323846;
  struct Splat {
    double x, y, z;     // unit center direction
    double inv_two_s2;  // 1 / (2 sigma^2)
    double w;
  };
  std::vector<Splat> splats;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    if (counts[j] <= 0.0) continue;
    const Viewport& vp = grid.viewports[j];
    double sigma = 0.25 * vp.fov_deg * kPi / 180.0;
    double cp = std::cos(vp.pitch);
    splats.push_back({cp * std::cos(vp.yaw), cp * std::sin(vp.yaw),
                      std::sin(vp.pitch), 1.0 / (2.0 * sigma * sigma),
                      counts[j]});
  }

  GrayImage density(width, height, 0.0);
  double peak = 0.0;
  for (std::size_t y = 0; y < height; ++y) {
    double lat = kPi / 2.0 - (static_cast<double>(y) + 0.5) * kPi /
                                 static_cast<double>(height);
    double cl = std::cos(lat), sl = std::sin(lat);
    for (std::size_t x = 0; x < width; ++x) {
      double lon = -kPi + (static_cast<double>(x) + 0.5) * 2.0 * kPi /
                              static_cast<double>(width);
      double px = cl * std::cos(lon), py = cl * std::sin(lon), pz = sl;
      double acc = 0.0;
      for (const Splat& s : splats) {
        double c = std::clamp(px * s.x + py * s.y + pz * s.z, -1.0, 1.0);
        double theta = std::acos(c);
        acc += s.w * std::exp(-theta * theta * s.inv_two_s2);
      }
      density.at(y, x) = acc;
      peak = std::max(peak, acc);
    }
  }
  if (peak > 0.0)
    for (double& v : density.data) v /= peak;
  return density;
}

void heat_color(double v, double& r, double& g, double& b) {
  v = std::clamp(v, 0.0, 1.0);
  r = v;
  g = 4.0 * v * (1.0 - v);
  b = 1.0 - v;
}

Image heatmap_overlay(const Image& erp, const GrayImage& density,
                      double alpha) {
  if (erp.width != density.width || erp.height != density.height)
    throw ContractError("heatmap_overlay: frame size mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ArgumentError("heatmap_overlay: alpha outside [0,1]");
  Image out(erp.width, erp.height);
  for (std::size_t y = 0; y < erp.height; ++y)
    for (std::size_t x = 0; x < erp.width; ++x) {
      double v = density.at(y, x);
      double r, g, b;
      heat_color(v, r, g, b);
      double w = alpha * v;
      out.at(y, x, 0) = (1.0 - w) * erp.at(y, x, 0) + w * r;
      out.at(y, x, 1) = (1.0 - w) * erp.at(y, x, 1) + w * g;
      out.at(y, x, 2) = (1.0 - w) * erp.at(y, x, 2) + w * b;
    }
  return out;
}

}  // namespace panoscan

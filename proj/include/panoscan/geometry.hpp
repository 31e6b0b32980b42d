#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "panoscan/image.hpp"

namespace panoscan {

// One candidate viewing direction on the sphere. Angles in radians, fov in
// degrees; yaw is kept normalized to [-pi, pi).
struct Viewport {
  std::size_t index = 0;
  double yaw = 0.0;
  double pitch = 0.0;
  double fov_deg = 90.0;
};

struct ViewportGrid {
  std::size_t n_yaw = 0, n_pitch = 0;
  std::vector<Viewport> viewports;  // index = j * n_yaw + i, dense

  std::size_t size() const { return viewports.size(); }
};

// Wraps an angle into [-pi, pi).
double wrap_yaw(double yaw);

// Uniform yaw/pitch partition: yaw centers -pi + (i+0.5)*2pi/n_yaw, pitch
// centers -pi/2 + (j+0.5)*pi/n_pitch.
ViewportGrid build_grid(std::size_t n_yaw, std::size_t n_pitch, double fov_deg);

// Gnomonic (rectilinear) render of a square res x res viewport from an
// equirectangular panorama: per-pixel camera rays scaled by tan(fov/2),
// rotated by pitch then yaw into world frame, converted to (lon, lat) and
// bilinearly sampled with longitude wraparound and latitude clamping.
Image render_viewport(const Image& erp, const Viewport& vp, std::size_t res);

// |visited| / X. Indices must be < X.
double coverage_fraction(const std::set<std::size_t>& visited, std::size_t x_count);

}  // namespace panoscan

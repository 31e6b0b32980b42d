#pragma once

#include <cstddef>
#include <vector>

#include "panoscan/geometry.hpp"
#include "panoscan/image.hpp"
#include "panoscan/policy.hpp"

namespace panoscan {

// Per-viewport visit totals over a set of scanpaths (one visit per step).
std::vector<double> visit_counts(const ViewportGrid& grid,
                                 const std::vector<Scanpath>& paths);

// Attention density in the panorama frame: each visited viewport splats a
// spherical Gaussian exp(-theta^2 / (2 sigma^2)) weighted by its count, where
// theta is the great-circle angle from the pixel direction to the viewport
// center and sigma is a quarter of that viewport's field of view. The summed
// map is normalized to peak at 1 (all-zero counts give an all-zero map).
GrayImage visit_density(std::size_t width, std::size_t height,
                        const ViewportGrid& grid,
                        const std::vector<double>& counts);

// Cold-to-hot ramp on [0,1]: r = v, g = 4v(1-v), b = 1-v (blue through green
// to red), all in [0,1].
void heat_color(double v, double& r, double& g, double& b);

// Alpha-blends the ramped density over the panorama. The blend weight is
// alpha * density, so unvisited pixels keep the photograph untouched.
Image heatmap_overlay(const Image& erp, const GrayImage& density,
                      double alpha = 0.6);

}  // namespace panoscan

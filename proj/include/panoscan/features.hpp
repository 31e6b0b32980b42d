#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "panoscan/geometry.hpp"
#include "panoscan/image.hpp"
#include "panoscan/tensor.hpp"

namespace panoscan {

inline constexpr std::size_t kRawDescriptorDim = 32;

// Hand-rolled 32-dim descriptor: 4x4 cell mean luminances (16), 8-bin
// magnitude-weighted Sobel orientation histogram, L1-normalized (8),
// per-channel mean and std (6), gray histogram entropy and mean local
// variance (2). Pure function; images smaller than 8x8 are rejected.
Tensor raw_descriptor(const Image& img);

// Fixed-seed Gaussian projection, rows = output components, entries
// N(0, 1/32). Identical across calls and processes.
Tensor projection_matrix(std::size_t d);

// Projection of the raw descriptor after per-component standardization by
// constants fixed in code (not fit to any dataset).
Tensor encode_viewport(const Image& img, std::size_t d = 64);

// Same pipeline on the panorama box-downscaled to 64x32.
Tensor encode_global(const Image& erp, std::size_t d = 64);

// Renders and encodes every candidate viewport once per image.
std::vector<Tensor> precompute_all(const Image& erp, const ViewportGrid& grid,
                                   std::size_t res, std::size_t d = 64);

// Per-image feature bundle; the sidecar file reuses the checkpoint container
// so an external pretrained encoder can be swapped in through data files.
struct ImageFeatures {
  std::vector<Tensor> viewports;
  Tensor global;
};

ImageFeatures compute_features(const Image& erp, const ViewportGrid& grid,
                               std::size_t res, std::size_t d = 64);
void save_features(const std::string& path, const ImageFeatures& f);
ImageFeatures load_features(const std::string& path);

}  // namespace panoscan

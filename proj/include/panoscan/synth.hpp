#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panoscan/distortions.hpp"
#include "panoscan/image.hpp"

namespace panoscan {

// Localized degradation: a yaw-pitch rectangle (radians, non-wrapping) whose
// pixels get one distortion at an impairment weight.
struct DistortRegion {
  double yaw_lo = 0.0, yaw_hi = 0.0;      // [-pi, pi], lo < hi
  double pitch_lo = 0.0, pitch_hi = 0.0;  // [-pi/2, pi/2], lo < hi
  DistortionSpec spec;
  double weight = 1.0;  // in [0,1]
};

// Full recipe for one synthetic panorama; the oracle score is a closed-form
// function of this spec alone.
struct SceneSpec {
  std::uint64_t seed = 0;
  int octaves = 4;
  double base_freq = 2.5;
  std::size_t width = 512, height = 256;
  std::vector<DistortRegion> regions;
};

struct LabeledSample {
  std::string image_path;
  double mos = 0.0;
  SceneSpec scene;
};

// Deterministic multi-octave value noise evaluated on the unit sphere (so the
// longitude seam is continuous) plus a latitude brightness gradient.
Image gen_panorama(std::uint64_t seed, std::size_t width = 512,
                   std::size_t height = 256, int octaves = 4,
                   double base_freq = 2.5);

// Replaces each region's pixels (by pixel-center membership) with the
// distorted rendition; overlaps apply in list order. Pixels outside every
// region are untouched.
Image apply_regions(const Image& erp, const SceneSpec& scene);

// gen_panorama + apply_regions.
Image render_scene(const SceneSpec& scene);

// Solid-angle fraction of the rectangle: dyaw * (sin hi - sin lo) / 4pi.
double region_area_fraction(const DistortRegion& r);

// 100 * (1 - sum_i w_i * a_i * severity_ramp_i), clamped to [0,100].
double oracle_mos(const SceneSpec& scene);

// Random scene: draws a target impairment level first, then 1-3 disjoint
// regions (one per yaw sector) sized and weighted to hit it, so generated
// scores cover the whole scale.
SceneSpec gen_scene(std::uint64_t seed, std::size_t width = 512,
                    std::size_t height = 256);

std::string scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const std::string& json_text);

struct DatasetPaths {
  std::string dir;
  std::string train_manifest;
  std::string test_manifest;
  std::size_t n_train = 0, n_test = 0;
};

// Writes n scenes as 16-bit PNGs plus JSON-lines manifests, split by a seeded
// shuffle into train/test. label_noise > 0 adds clamped Gaussian noise to the
// written scores (the scene oracle itself stays exact).
DatasetPaths make_dataset(const std::string& out_dir, std::size_t n,
                          std::uint64_t seed, double train_frac,
                          std::size_t width = 512, std::size_t height = 256,
                          double label_noise = 0.0);

// Parses one JSON-lines manifest; image paths stay relative to the manifest.
std::vector<LabeledSample> load_manifest(const std::string& path);

}  // namespace panoscan

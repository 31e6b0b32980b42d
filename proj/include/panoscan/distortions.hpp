#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "panoscan/image.hpp"

namespace panoscan {

enum class Severity { weak, mild, strong };
enum class DistortKind { jpeg, motion_blur, defocus_blur, color_jitter, poisson };

const char* severity_name(Severity s);
Severity severity_from_string(const std::string& s);
const char* kind_name(DistortKind k);
DistortKind kind_from_string(const std::string& s);

// One applied distortion, reproducible from (kind, param, seed). param is the
// kind's scalar knob: jpeg quality, kernel length, disk radius, jitter
// magnitude, or Poisson lambda. seed drives any secondary randomness (blur
// angle, jitter directions, the noise stream).
struct DistortionSpec {
  DistortKind kind = DistortKind::jpeg;
  double param = 0.0;
  std::uint64_t seed = 0;
};

struct KernelTap {
  int dx = 0, dy = 0;
  double w = 0.0;
};

// Length-k line kernel at the given angle, anti-aliased by exact segment/cell
// intersection lengths; taps sum to 1.
std::vector<KernelTap> motion_kernel(int k, double angle);
// Normalized disk kernel; rim cells weighted by sampled pixel coverage.
std::vector<KernelTap> disk_kernel(double radius);

// DCT-quantization compression proxy: per channel 8x8 block DCT, standard
// JPEG luminance table scaled by the libjpeg quality curve, dequantize,
// inverse DCT, clamp. Partial edge blocks replicate-pad.
Image jpeg_proxy(const Image& img, int quality);

Image motion_blur(const Image& img, int k, double angle);
Image defocus_blur(const Image& img, double radius);

struct JitterFactors {
  double brightness = 1.0, contrast = 1.0, saturation = 1.0, hue_deg = 0.0;
};

// Applied in order: brightness scale, contrast about per-channel means,
// saturation about Rec.601 luma, luma-preserving hue rotation; final clamp.
Image color_jitter(const Image& img, const JitterFactors& f);

// Factor directions drawn from the seed, scaled so the largest deviation
// equals `magnitude` (hue measured as degrees/50).
JitterFactors jitter_from_magnitude(double magnitude, std::uint64_t seed);

// out = Poisson(v * lambda) / lambda per value, clamped.
Image poisson_noise(const Image& img, double lambda, std::uint64_t seed);

Image apply_distortion(const Image& img, const DistortionSpec& spec);

class Rng;

// Draws a kind (weak excludes poisson), a parameter uniform in the kind's
// severity range, and a fresh sub-seed for secondary randomness.
DistortionSpec sample_distortion(Severity sev, Rng& rng);

// Samples one distortion kind and parameter for the severity level (weak
// excludes poisson) and applies it. Same seed, same bytes.
std::pair<Image, DistortionSpec> augment(const Image& img, Severity sev,
                                         std::uint64_t seed);

// Normalized severity in [0,1] of a parameter value: linear ramps
// jpeg 95->20, kernel 3->19, radius 1->6, magnitude 0->0.4, 1/lambda 1/30->1/6.
double severity_ramp(DistortKind kind, double param);

}  // namespace panoscan

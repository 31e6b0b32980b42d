#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>

#include "panoscan/distortions.hpp"
#include "panoscan/errors.hpp"
#include "panoscan/features.hpp"
#include "panoscan/geometry.hpp"
#include "panoscan/rng.hpp"
#include "panoscan/synth.hpp"

using namespace panoscan;

namespace {

constexpr double kPi = 3.14159265358979323846;

double l2_dist(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    const double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("raw descriptor layout and determinism") {
  const Image erp = gen_panorama(12, 128, 64);
  const Viewport vp{0, 0.3, 0.1, 90.0};
  const Image view = render_viewport(erp, vp, 32);

  const Tensor a = raw_descriptor(view);
  const Tensor b = raw_descriptor(view);
  REQUIRE(a.numel() == kRawDescriptorDim);
  CHECK(a.data == b.data);
  CHECK(a.all_finite());

  // Constant image: zero gradient block, zero stds, known means.
  const Image flat(32, 32, 0.25);
  const Tensor f = raw_descriptor(flat);
  for (std::size_t i = 0; i < 16; ++i)
    CHECK(f.data[i] == doctest::Approx(0.25).epsilon(1e-12));
  for (std::size_t i = 16; i < 24; ++i) CHECK(f.data[i] == 0.0);
  for (std::size_t i = 24; i < 27; ++i)
    CHECK(f.data[i] == doctest::Approx(0.25).epsilon(1e-12));
  for (std::size_t i = 27; i < 30; ++i)
    CHECK(f.data[i] == doctest::Approx(0.0));
  CHECK(f.data[30] == doctest::Approx(0.0));  // one occupied bin
  CHECK(f.data[31] == doctest::Approx(0.0));

  CHECK_THROWS_AS(raw_descriptor(Image(7, 7, 0.5)), ArgumentError);
  CHECK_NOTHROW(raw_descriptor(Image(8, 8, 0.5)));
}

TEST_CASE("orientation histogram picks the gradient direction") {
  // Horizontal luminance ramp: gradient points along +x, angle 0, which is
  // the start of bin 4 ([-pi,pi) split into 8 bins).
  Image ramp(32, 32);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        ramp.at(y, x, c) = static_cast<double>(x) / 31.0;
  const Tensor r = raw_descriptor(ramp);
  CHECK(r.data[16 + 4] == doctest::Approx(1.0).epsilon(1e-12));

  // Vertical ramp increasing downward: gradient along +y, angle pi/2, bin 6.
  Image vramp(32, 32);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        vramp.at(y, x, c) = static_cast<double>(y) / 31.0;
  const Tensor v = raw_descriptor(vramp);
  CHECK(v.data[16 + 6] == doctest::Approx(1.0).epsilon(1e-12));

  // L1 normalization on a textured image.
  const Image erp = gen_panorama(5, 128, 64);
  const Tensor t = raw_descriptor(render_viewport(erp, Viewport{0, 0, 0, 90}, 32));
  double sum = 0.0;
  for (std::size_t i = 16; i < 24; ++i) {
    CHECK(t.data[i] >= 0.0);
    sum += t.data[i];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("viewports at different yaw produce different descriptors") {
  for (std::uint64_t seed : {30ull, 31ull, 32ull}) {
    const Image erp = gen_panorama(seed, 256, 128);
    const Image a = render_viewport(erp, Viewport{0, 0.0, 0.0, 90.0}, 32);
    const Image b = render_viewport(erp, Viewport{1, kPi / 2, 0.0, 90.0}, 32);
    const Tensor ra = raw_descriptor(a);
    const Tensor rb = raw_descriptor(b);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < ra.numel(); ++i)
      max_diff = std::max(max_diff, std::abs(ra.data[i] - rb.data[i]));
    CHECK(max_diff > 1e-6);
  }
}

TEST_CASE("projection matrix is fixed and reproducible") {
  const Tensor p1 = projection_matrix(64);
  const Tensor p2 = projection_matrix(64);
  REQUIRE(p1.shape == std::vector<std::size_t>{64, kRawDescriptorDim});
  CHECK(p1.data == p2.data);
  CHECK(fnv1a(p1.data.data(), p1.data.size() * sizeof(double)) ==
        fnv1a(p2.data.data(), p2.data.size() * sizeof(double)));
  CHECK(p1.l2_norm() > 0.0);

  // Different output dims share the leading rows (same stream).
  const Tensor small = projection_matrix(8);
  for (std::size_t i = 0; i < small.numel(); ++i)
    CHECK(small.data[i] == p1.data[i]);

  CHECK_THROWS_AS(projection_matrix(0), ArgumentError);
}

TEST_CASE("encoded vectors are deterministic, finite, and non-degenerate") {
  const Image erp = gen_panorama(77, 128, 64);
  const Image view = render_viewport(erp, Viewport{0, 0.4, -0.2, 90.0}, 32);

  const Tensor e1 = encode_viewport(view);
  const Tensor e2 = encode_viewport(view);
  REQUIRE(e1.numel() == 64);
  CHECK(e1.data == e2.data);
  CHECK(e1.all_finite());
  CHECK(e1.l2_norm() > 0.0);

  const Tensor e8 = encode_viewport(view, 8);
  CHECK(e8.numel() == 8);
}

TEST_CASE("global descriptors separate scenes and react to distortion") {
  std::vector<Tensor> gs;
  for (std::uint64_t seed = 0; seed < 100; ++seed)
    gs.push_back(encode_global(gen_panorama(seed, 128, 64)));
  for (std::size_t i = 0; i < gs.size(); ++i)
    for (std::size_t j = i + 1; j < gs.size(); ++j)
      CHECK(l2_dist(gs[i], gs[j]) > 1e-3);

  for (std::uint64_t seed : {3ull, 4ull}) {
    const Image clean = gen_panorama(seed, 128, 64);
    DistortionSpec strong;
    strong.kind = DistortKind::jpeg;
    strong.param = 20.0;
    strong.seed = 1;
    const Image bad = apply_distortion(clean, strong);
    CHECK(l2_dist(encode_global(clean), encode_global(bad)) > 1e-4);
  }
}

TEST_CASE("precompute_all covers the default grid") {
  const Image erp = gen_panorama(13, 256, 128);
  const ViewportGrid grid = build_grid(8, 4, 90.0);
  const auto feats = precompute_all(erp, grid, 32);
  REQUIRE(feats.size() == 32);

  const auto again = precompute_all(erp, grid, 32);
  for (std::size_t i = 0; i < feats.size(); ++i)
    CHECK(feats[i].data == again[i].data);

  // Spot-check consistency against the single-viewport path.
  const Tensor direct =
      encode_viewport(render_viewport(erp, grid.viewports[5], 32));
  CHECK(feats[5].data == direct.data);
}

TEST_CASE("encoding 32 viewports at 32x32 fits the time budget") {
  const Image erp = gen_panorama(14, 256, 128);
  const ViewportGrid grid = build_grid(8, 4, 90.0);
  std::vector<Image> views;
  for (const auto& vp : grid.viewports)
    views.push_back(render_viewport(erp, vp, 32));

  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& v : views) (void)encode_viewport(v);
  const auto t1 = std::chrono::steady_clock::now();
  const double ms =
      std::chrono::duration_cast<std::chrono::microseconds>(t1 - t0).count() /
      1000.0;
  CHECK(ms < 50.0);
}

TEST_CASE("feature sidecar round trip") {
  namespace fs = std::filesystem;
  const Image erp = gen_panorama(15, 128, 64);
  const ViewportGrid grid = build_grid(4, 2, 90.0);
  const ImageFeatures f = compute_features(erp, grid, 24, 16);
  REQUIRE(f.viewports.size() == 8);
  REQUIRE(f.global.numel() == 16);

  const auto path = (fs::temp_directory_path() / "panoscan_feats.bin").string();
  save_features(path, f);
  const ImageFeatures r = load_features(path);
  REQUIRE(r.viewports.size() == f.viewports.size());
  CHECK(r.global.data == f.global.data);
  for (std::size_t i = 0; i < f.viewports.size(); ++i)
    CHECK(r.viewports[i].data == f.viewports[i].data);
  fs::remove(path);

  CHECK_THROWS_AS(load_features("/nonexistent/feats.bin"), DataError);
}

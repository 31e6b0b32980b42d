#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "panoscan/distortions.hpp"
#include "panoscan/errors.hpp"
#include "panoscan/rng.hpp"

using namespace panoscan;

namespace {

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Image img(w, h);
  Rng rng(seed);
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

double mse(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

}  // namespace

TEST_CASE("jpeg: q=100 round-trips within 2 levels") {
  Image img = random_image(24, 16, 42);
  Image out = jpeg_proxy(img, 100);
  CHECK(max_abs_diff(img, out) <= 2.0 / 255.0);
}

TEST_CASE("jpeg: zero-DC constant survives any quality") {
  // 128/255 maps to a zero DC coefficient after level shift, so quantization
  // has nothing to round at any table scale.
  Image img(16, 16, 128.0 / 255.0);
  for (int q : {5, 20, 40, 60, 75, 85, 95, 100}) {
    CAPTURE(q);
    CHECK(max_abs_diff(img, jpeg_proxy(img, q)) < 1e-9);
  }
  // DC of a 0.5 constant is -4; the q=100 all-ones table keeps it intact.
  Image half(16, 16, 0.5);
  CHECK(max_abs_diff(half, jpeg_proxy(half, 100)) < 1e-9);
}

TEST_CASE("jpeg: lower quality degrades more, bounds hold") {
  Image img = random_image(32, 24, 7);
  const double e90 = mse(img, jpeg_proxy(img, 90));
  const double e30 = mse(img, jpeg_proxy(img, 30));
  CHECK(e90 < e30);
  Image out = jpeg_proxy(img, 20);
  for (double v : out.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(jpeg_proxy(img, 0), ArgumentError);
  CHECK_THROWS_AS(jpeg_proxy(img, 101), ArgumentError);
}

TEST_CASE("jpeg: edge blocks on non-multiple-of-8 sizes") {
  Image img = random_image(13, 11, 9);
  Image out = jpeg_proxy(img, 80);
  CHECK(out.width == 13);
  CHECK(out.height == 11);
  for (double v : out.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("motion kernel: axis-aligned exact taps") {
  auto taps = motion_kernel(3, 0.0);
  REQUIRE(taps.size() == 3);
  std::map<std::pair<int, int>, double> m;
  for (const auto& t : taps) m[{t.dx, t.dy}] = t.w;
  CHECK(m[{-1, 0}] == 1.0 / 3.0);
  CHECK(m[{0, 0}] == 1.0 / 3.0);
  CHECK(m[{1, 0}] == 1.0 / 3.0);

  auto vert = motion_kernel(3, 1.5707963267948966);
  std::map<std::pair<int, int>, double> mv;
  for (const auto& t : vert) mv[{t.dx, t.dy}] = t.w;
  CHECK(mv[{0, -1}] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(mv[{0, 1}] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("motion kernel: unit mass at arbitrary angles") {
  Rng rng(31);
  for (int k : {3, 5, 7, 11, 19}) {
    for (int trial = 0; trial < 8; ++trial) {
      const double angle = rng.uniform(0.0, 3.14159265358979323846);
      auto taps = motion_kernel(k, angle);
      double sum = 0.0;
      for (const auto& t : taps) {
        CHECK(t.w > 0.0);
        sum += t.w;
      }
      CAPTURE(k);
      CAPTURE(angle);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(motion_kernel(4, 0.0), ArgumentError);
  CHECK_THROWS_AS(motion_kernel(0, 0.0), ArgumentError);
}

TEST_CASE("motion blur: identity, mass conservation, impulse response") {
  Image img = random_image(12, 9, 13);
  Image same = motion_blur(img, 1, 0.7);
  CHECK(img.data == same.data);

  Image flat(16, 10, 0.42);
  CHECK(max_abs_diff(flat, motion_blur(flat, 7, 1.1)) < 1e-12);

  Image impulse(9, 9, 0.0);
  impulse.at(4, 4, 0) = 1.0;
  impulse.at(4, 4, 1) = 1.0;
  impulse.at(4, 4, 2) = 1.0;
  Image resp = motion_blur(impulse, 3, 0.0);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(resp.at(4, 3, c) == 1.0 / 3.0);
    CHECK(resp.at(4, 4, c) == 1.0 / 3.0);
    CHECK(resp.at(4, 5, c) == 1.0 / 3.0);
    CHECK(resp.at(3, 4, c) == 0.0);
    CHECK(resp.at(5, 4, c) == 0.0);
  }
}

TEST_CASE("disk kernel: mass, symmetry, area") {
  for (double r : {1.0, 2.0, 3.5, 6.0}) {
    auto taps = disk_kernel(r);
    double sum = 0.0;
    std::map<std::pair<int, int>, double> m;
    for (const auto& t : taps) {
      sum += t.w;
      m[{t.dx, t.dy}] = t.w;
    }
    CAPTURE(r);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    // 4-fold symmetry plus diagonal swap.
    for (const auto& t : taps) {
      CHECK(m[{-t.dx, t.dy}] == t.w);
      CHECK(m[{t.dx, -t.dy}] == t.w);
      CHECK(m[{t.dy, t.dx}] == t.w);
    }
  }
  // Sampled coverage area vs pi r^2 within 5% (r=1): reconstruct total mass
  // in cell units from the center weight, whose true coverage is 1.
  auto taps = disk_kernel(1.0);
  std::map<std::pair<int, int>, double> m;
  for (const auto& t : taps) m[{t.dx, t.dy}] = t.w;
  const double cells = 1.0 / m[{0, 0}];  // center cell fully covered
  CHECK(std::fabs(cells - 3.14159265358979323846) < 0.05 * 3.141592653589793);
  CHECK_THROWS_AS(disk_kernel(-0.5), ArgumentError);
}

TEST_CASE("defocus blur: identity and mass conservation") {
  Image img = random_image(10, 8, 17);
  Image same = defocus_blur(img, 0.0);
  CHECK(img.data == same.data);
  Image flat(12, 12, 0.77);
  CHECK(max_abs_diff(flat, defocus_blur(flat, 2.5)) < 1e-12);
}

TEST_CASE("color jitter: closed-form factor checks") {
  Image img = random_image(8, 6, 23);
  JitterFactors ident;
  CHECK(max_abs_diff(img, color_jitter(img, ident)) < 1e-12);

  Image gray(8, 6, 0.5);
  JitterFactors bright;
  bright.brightness = 1.1;
  Image out = color_jitter(gray, bright);
  for (double v : out.data) CHECK(v == doctest::Approx(0.55).epsilon(1e-12));

  JitterFactors hue;
  hue.hue_deg = 25.0;
  Image hout = color_jitter(gray, hue);
  CHECK(max_abs_diff(gray, hout) < 1e-12);

  JitterFactors strong{0.6, 1.4, 1.4, 20.0};
  Image sout = color_jitter(img, strong);
  for (double v : sout.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("color jitter: magnitude parameterization") {
  for (std::uint64_t seed : {1ull, 5ull, 9ull}) {
    const double mag = 0.3;
    JitterFactors f = jitter_from_magnitude(mag, seed);
    const double m = std::max({std::fabs(f.brightness - 1.0),
                               std::fabs(f.contrast - 1.0),
                               std::fabs(f.saturation - 1.0),
                               std::fabs(f.hue_deg) / 50.0});
    CHECK(m == doctest::Approx(mag).epsilon(1e-12));
  }
  JitterFactors z = jitter_from_magnitude(0.0, 3);
  CHECK(z.brightness == 1.0);
  CHECK(z.hue_deg == 0.0);
}

TEST_CASE("poisson noise: zero input, mean, variance ordering") {
  Image black(8, 4, 0.0);
  Image bout = poisson_noise(black, 20.0, 5);
  for (double v : bout.data) CHECK(v == 0.0);

  Image gray(200, 100, 0.5);
  Image nout = poisson_noise(gray, 18.0, 99);
  double mean = 0.0;
  for (double v : nout.data) mean += v;
  mean /= static_cast<double>(nout.data.size());
  // 3 sigma of the sample mean at var = v/lambda.
  const double tol = 3.0 * std::sqrt(0.5 / 18.0 / static_cast<double>(nout.data.size()));
  CHECK(std::fabs(mean - 0.5) < tol);

  auto variance = [](const Image& im) {
    double m = 0.0, s2 = 0.0;
    for (double v : im.data) m += v;
    m /= static_cast<double>(im.data.size());
    for (double v : im.data) s2 += (v - m) * (v - m);
    return s2 / static_cast<double>(im.data.size());
  };
  CHECK(variance(poisson_noise(gray, 30.0, 1)) < variance(poisson_noise(gray, 6.0, 1)));

  CHECK_THROWS_AS(poisson_noise(gray, 0.0, 1), ArgumentError);
  Image a = poisson_noise(gray, 12.0, 77);
  Image b = poisson_noise(gray, 12.0, 77);
  CHECK(a.data == b.data);
}

TEST_CASE("augment: determinism and severity sampling rules") {
  Image img = random_image(8, 4, 55);
  auto [out1, spec1] = augment(img, Severity::mild, 1234);
  auto [out2, spec2] = augment(img, Severity::mild, 1234);
  CHECK(out1.data == out2.data);
  CHECK(spec1.kind == spec2.kind);
  CHECK(spec1.param == spec2.param);
  CHECK(spec1.seed == spec2.seed);

  // Ranges per severity; weak never draws poisson.
  auto in_range = [](DistortKind k, Severity s, double p) {
    switch (k) {
      case DistortKind::jpeg:
        return s == Severity::weak   ? p >= 85 && p <= 95
               : s == Severity::mild ? p >= 60 && p <= 75
                                     : p >= 20 && p <= 40;
      case DistortKind::motion_blur:
        if (std::fmod(p, 2.0) != 1.0) return false;
        return s == Severity::weak   ? p >= 3 && p <= 7
               : s == Severity::mild ? p >= 7 && p <= 11
                                     : p >= 11 && p <= 19;
      case DistortKind::defocus_blur:
        return s == Severity::weak   ? p >= 1 && p <= 2
               : s == Severity::mild ? p >= 2 && p <= 3
                                     : p >= 4 && p <= 6;
      case DistortKind::color_jitter:
        return s == Severity::weak   ? p >= 0.025 && p <= 0.05
               : s == Severity::mild ? p >= 0.075 && p <= 0.15
                                     : p >= 0.2 && p <= 0.4;
      case DistortKind::poisson:
        return s == Severity::mild ? p >= 18 && p <= 30 : (s == Severity::strong && p >= 6 && p <= 12);
    }
    return false;
  };

  Image tiny = random_image(4, 2, 3);
  for (Severity sev : {Severity::weak, Severity::mild, Severity::strong}) {
    bool saw_poisson = false;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      auto [out, spec] = augment(tiny, sev, seed);
      if (spec.kind == DistortKind::poisson) saw_poisson = true;
      CAPTURE(severity_name(sev));
      CAPTURE(kind_name(spec.kind));
      CAPTURE(spec.param);
      REQUIRE(in_range(spec.kind, sev, spec.param));
      REQUIRE(out.data.size() == tiny.data.size());
    }
    CHECK(saw_poisson == (sev != Severity::weak));
  }

  // Outputs stay in range on a full-size application of every kind.
  for (std::uint64_t seed : {10ull, 11ull, 12ull, 13ull, 14ull}) {
    auto [out, spec] = augment(img, Severity::strong, seed);
    (void)spec;
    for (double v : out.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("severity ramp endpoints and monotone direction") {
  CHECK(severity_ramp(DistortKind::jpeg, 95) == 0.0);
  CHECK(severity_ramp(DistortKind::jpeg, 20) == 1.0);
  CHECK(severity_ramp(DistortKind::jpeg, 57.5) == doctest::Approx(0.5));
  CHECK(severity_ramp(DistortKind::motion_blur, 3) == 0.0);
  CHECK(severity_ramp(DistortKind::motion_blur, 19) == 1.0);
  CHECK(severity_ramp(DistortKind::defocus_blur, 1) == 0.0);
  CHECK(severity_ramp(DistortKind::defocus_blur, 6) == 1.0);
  CHECK(severity_ramp(DistortKind::color_jitter, 0.4) == 1.0);
  CHECK(severity_ramp(DistortKind::poisson, 30) == doctest::Approx(0.0));
  CHECK(severity_ramp(DistortKind::poisson, 6) == doctest::Approx(1.0));
  // Clamped outside the calibrated span.
  CHECK(severity_ramp(DistortKind::jpeg, 100) == 0.0);
  CHECK(severity_ramp(DistortKind::jpeg, 5) == 1.0);

  // weak < mild < strong for representative parameters of each kind.
  CHECK(severity_ramp(DistortKind::jpeg, 90) < severity_ramp(DistortKind::jpeg, 67));
  CHECK(severity_ramp(DistortKind::jpeg, 67) < severity_ramp(DistortKind::jpeg, 30));
  CHECK(severity_ramp(DistortKind::motion_blur, 5) < severity_ramp(DistortKind::motion_blur, 9));
  CHECK(severity_ramp(DistortKind::motion_blur, 9) < severity_ramp(DistortKind::motion_blur, 15));
  CHECK(severity_ramp(DistortKind::poisson, 24) < severity_ramp(DistortKind::poisson, 9));
}

TEST_CASE("string names round-trip") {
  for (Severity s : {Severity::weak, Severity::mild, Severity::strong})
    CHECK(severity_from_string(severity_name(s)) == s);
  for (DistortKind k :
       {DistortKind::jpeg, DistortKind::motion_blur, DistortKind::defocus_blur,
        DistortKind::color_jitter, DistortKind::poisson})
    CHECK(kind_from_string(kind_name(k)) == k);
  CHECK_THROWS_AS(severity_from_string("extreme"), ArgumentError);
  CHECK_THROWS_AS(kind_from_string("gaussian"), ArgumentError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "panoscan/errors.hpp"
#include "panoscan/image.hpp"
#include "panoscan/rng.hpp"

using namespace panoscan;

namespace {

GrayImage random_gray(std::size_t w, std::size_t h, std::uint64_t seed) {
  GrayImage g(w, h);
  Rng rng(seed);
  for (auto& v : g.data) v = rng.uniform();
  return g;
}

// Independent histogram-entropy oracle: bin counts via an ordered map, summed
// in bin order.
double entropy_oracle(const GrayImage& img, std::size_t bins) {
  std::map<std::size_t, std::size_t> counts;
  for (double v : img.data) {
    auto b = static_cast<std::size_t>(v * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    counts[b]++;
  }
  double h = 0.0;
  const double n = static_cast<double>(img.data.size());
  for (const auto& [bin, c] : counts) {
    (void)bin;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  return h;
}

// Brute-force SSIM oracle: per-window weighted sums with explicit mean
// subtraction, no separable filtering.
double ssim_oracle(const GrayImage& a, const GrayImage& b) {
  const int win = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double kern[win][win];
  double ksum = 0.0;
  for (int i = 0; i < win; ++i) {
    for (int j = 0; j < win; ++j) {
      const double dy = i - 5.0, dx = j - 5.0;
      kern[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
      ksum += kern[i][j];
    }
  }
  for (auto& row : kern)
    for (auto& v : row) v /= ksum;

  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + win <= a.height; ++y) {
    for (std::size_t x = 0; x + win <= a.width; ++x) {
      double ma = 0.0, mb = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          ma += kern[i][j] * a.at(y + i, x + j);
          mb += kern[i][j] * b.at(y + i, x + j);
        }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
          const double da = a.at(y + i, x + j) - ma;
          const double db = b.at(y + i, x + j) - mb;
          va += kern[i][j] * da * da;
          vb += kern[i][j] * db * db;
          cov += kern[i][j] * da * db;
        }
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace

TEST_CASE("to_gray: rec601 weights") {
  Image img(2, 2);
  // pixel 0 white, pixel 1 red, pixel 2 gray 0.4, pixel 3 black
  img.data = {1, 1, 1, 1, 0, 0, 0.4, 0.4, 0.4, 0, 0, 0};
  GrayImage g = to_gray(img);
  CHECK(g.data[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g.data[1] == doctest::Approx(0.299).epsilon(1e-15));
  CHECK(g.data[2] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(g.data[3] == 0.0);
}

TEST_CASE("entropy: constant and exactly uniform histograms") {
  GrayImage flat(8, 8, 0.37);
  CHECK(shannon_entropy(flat) == 0.0);

  // 256 pixels, one per bin: H = log2(256) = 8 bits exactly.
  GrayImage uni(16, 16);
  for (std::size_t i = 0; i < 256; ++i)
    uni.data[i] = (static_cast<double>(i) + 0.5) / 256.0;
  CHECK(shannon_entropy(uni) == 8.0);

  // Two equal bins -> 1 bit.
  GrayImage two(4, 2);
  two.data = {0.1, 0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 0.9};
  CHECK(shannon_entropy(two) == 1.0);
}

TEST_CASE("entropy: matches independent oracle and is bounded") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    GrayImage g = random_gray(16, 16, seed);
    const double h = shannon_entropy(g);
    CHECK(h == doctest::Approx(entropy_oracle(g, 256)).epsilon(1e-12));
    CHECK(h >= 0.0);
    CHECK(h <= 8.0);
  }
}

TEST_CASE("entropy: permutation invariant") {
  GrayImage g = random_gray(16, 16, 99);
  const double before = shannon_entropy(g);
  Rng rng(5);
  for (std::size_t i = g.data.size(); i > 1; --i)
    std::swap(g.data[i - 1],
              g.data[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  CHECK(shannon_entropy(g) == before);
}

TEST_CASE("entropy: value 1.0 lands in the top bin") {
  GrayImage g(2, 1);
  g.data = {1.0, 1.0};
  CHECK(shannon_entropy(g) == 0.0);
}

TEST_CASE("ssim: identity, anticorrelation, symmetry, bounds") {
  GrayImage a = random_gray(16, 16, 7);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  // Binary checkerboard vs its inverse: strictly anticorrelated windows.
  GrayImage cb(16, 16), inv(16, 16);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      cb.at(y, x) = static_cast<double>((x + y) % 2);
      inv.at(y, x) = 1.0 - cb.at(y, x);
    }
  CHECK(ssim(cb, inv) < 0.0);

  GrayImage b = random_gray(16, 16, 8);
  CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-12));
  for (std::uint64_t s = 0; s < 6; ++s) {
    GrayImage x = random_gray(13, 17, 100 + s);
    GrayImage y = random_gray(13, 17, 200 + s);
    const double v = ssim(x, y);
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("ssim: matches brute-force oracle") {
  for (std::uint64_t seed : {11ull, 12ull}) {
    GrayImage a = random_gray(16, 16, seed);
    GrayImage b = random_gray(16, 16, seed + 50);
    CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-9));
  }
  // Non-square, correlated pair (b = blurred-ish copy of a).
  GrayImage a = random_gray(20, 12, 31);
  GrayImage b = a;
  for (std::size_t i = 1; i < b.data.size(); ++i)
    b.data[i] = 0.5 * (a.data[i] + a.data[i - 1]);
  CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-9));
}

TEST_CASE("ssim: argument errors") {
  GrayImage a(16, 16, 0.5), b(15, 16, 0.5), tiny(10, 16, 0.5);
  CHECK_THROWS_AS(ssim(a, b), ArgumentError);
  CHECK_THROWS_AS(ssim(tiny, tiny), ArgumentError);
}

#include "panoscan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "panoscan/errors.hpp"
#include "panoscan/png_io.hpp"
#include "panoscan/rng.hpp"

namespace panoscan {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Lattice value in [0,1) at an integer 3D grid point.
double lattice(std::uint64_t seed, std::int64_t ix, std::int64_t iy,
               std::int64_t iz) {
  std::uint64_t k = seed;
  k = mix64(k ^ (static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ull));
  k = mix64(k ^ (static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4full));
  k = mix64(k ^ (static_cast<std::uint64_t>(iz) * 0x165667b19e3779f9ull));
  return static_cast<double>(k >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double vnoise3(std::uint64_t seed, double x, double y, double z) {
  const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = smooth(x - fx), ty = smooth(y - fy), tz = smooth(z - fz);
  double c[2][2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int d = 0; d < 2; ++d) c[a][b][d] = lattice(seed, ix + a, iy + b, iz + d);
  auto lerp = [](double u, double v, double t) { return u + t * (v - u); };
  const double x00 = lerp(c[0][0][0], c[1][0][0], tx);
  const double x10 = lerp(c[0][1][0], c[1][1][0], tx);
  const double x01 = lerp(c[0][0][1], c[1][0][1], tx);
  const double x11 = lerp(c[0][1][1], c[1][1][1], tx);
  return lerp(lerp(x00, x10, ty), lerp(x01, x11, ty), tz);
}

}  // namespace

Image gen_panorama(std::uint64_t seed, std::size_t width, std::size_t height,
                   int octaves, double base_freq) {
  if (width != 2 * height || height == 0)
    throw ArgumentError("gen_panorama: panorama must be 2:1");
  if (octaves < 1 || base_freq <= 0.0)
    throw ArgumentError("gen_panorama: bad texture parameters");

  Image img(width, height);
  double amp_total = 0.0;
  for (int o = 0; o < octaves; ++o) amp_total += std::pow(0.5, o);

  for (std::size_t y = 0; y < height; ++y) {
    const double lat = kPi / 2.0 - (static_cast<double>(y) + 0.5) / static_cast<double>(height) * kPi;
    const double cl = std::cos(lat), sl = std::sin(lat);
    const double horizon = 0.12 * cl;
    for (std::size_t x = 0; x < width; ++x) {
      const double lon = (static_cast<double>(x) + 0.5) / static_cast<double>(width) * 2.0 * kPi - kPi;
      const double dx = cl * std::sin(lon);
      const double dy = sl;
      const double dz = cl * std::cos(lon);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const std::uint64_t chseed = mix64(seed ^ (0x51ed2701ull + ch));
        double val = 0.0, amp = 1.0, freq = base_freq;
        for (int o = 0; o < octaves; ++o) {
          val += amp * vnoise3(mix64(chseed + static_cast<std::uint64_t>(o)),
                               dx * freq, dy * freq, dz * freq);
          amp *= 0.5;
          freq *= 2.0;
        }
        img.at(y, x, ch) = std::clamp(0.12 + 0.72 * val / amp_total + horizon, 0.0, 1.0);
      }
    }
  }
  return img;
}

namespace {

void validate_region(const DistortRegion& r) {
  if (!(r.yaw_lo < r.yaw_hi) || r.yaw_lo < -kPi - 1e-9 || r.yaw_hi > kPi + 1e-9)
    throw ContractError("region: bad yaw bounds");
  if (!(r.pitch_lo < r.pitch_hi) || r.pitch_lo < -kPi / 2 - 1e-9 ||
      r.pitch_hi > kPi / 2 + 1e-9)
    throw ContractError("region: bad pitch bounds");
  if (r.weight < 0.0 || r.weight > 1.0)
    throw ContractError("region: weight outside [0,1]");
}

}  // namespace

Image apply_regions(const Image& erp, const SceneSpec& scene) {
  Image out = erp;
  for (const auto& region : scene.regions) {
    validate_region(region);
    const Image distorted = apply_distortion(out, region.spec);
    for (std::size_t y = 0; y < out.height; ++y) {
      const double lat = kPi / 2.0 - (static_cast<double>(y) + 0.5) / static_cast<double>(out.height) * kPi;
      if (lat < region.pitch_lo || lat > region.pitch_hi) continue;
      for (std::size_t x = 0; x < out.width; ++x) {
        const double lon = (static_cast<double>(x) + 0.5) / static_cast<double>(out.width) * 2.0 * kPi - kPi;
        if (lon < region.yaw_lo || lon > region.yaw_hi) continue;
        for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = distorted.at(y, x, c);
      }
    }
  }
  return out;
}

Image render_scene(const SceneSpec& scene) {
  Image erp = gen_panorama(scene.seed, scene.width, scene.height, scene.octaves,
                           scene.base_freq);
  return apply_regions(erp, scene);
}

double region_area_fraction(const DistortRegion& r) {
  validate_region(r);
  return (r.yaw_hi - r.yaw_lo) * (std::sin(r.pitch_hi) - std::sin(r.pitch_lo)) /
         (4.0 * kPi);
}

double oracle_mos(const SceneSpec& scene) {
  double impairment = 0.0;
  for (const auto& r : scene.regions) {
    impairment += r.weight * region_area_fraction(r) *
                  severity_ramp(r.spec.kind, r.spec.param);
  }
  return std::clamp(100.0 * (1.0 - impairment), 0.0, 100.0);
}

namespace {

// Maps a target severity-ramp value back to a parameter for the kind.
double param_for_ramp(DistortKind kind, double s) {
  switch (kind) {
    case DistortKind::jpeg:
      return std::round(95.0 - 75.0 * s);
    case DistortKind::motion_blur:
      return 3.0 + 2.0 * std::round(8.0 * s);
    case DistortKind::defocus_blur:
      return 1.0 + 5.0 * s;
    case DistortKind::color_jitter:
      return 0.4 * s;
    case DistortKind::poisson:
      return 1.0 / (1.0 / 30.0 + s * (1.0 / 6.0 - 1.0 / 30.0));
  }
  throw ContractError("param_for_ramp: bad kind");
}

}  // namespace

SceneSpec gen_scene(std::uint64_t seed, std::size_t width, std::size_t height) {
  SceneSpec scene;
  scene.seed = seed;
  scene.width = width;
  scene.height = height;
  Rng rng(mix64(seed ^ 0x7363656eull));  // independent of the texture stream

  // Scenes target a total impairment level so the MOS distribution covers the
  // whole scale; the quadratic shaping favors lightly distorted panoramas.
  const double u = rng.uniform();
  const double target = 0.02 + 0.86 * u * u;
  const std::size_t n_regions =
      target > 0.5 ? 1 : static_cast<std::size_t>(rng.uniform_int(1, 3));

  // One yaw sector per region keeps regions disjoint, so the additive oracle
  // matches what is actually visible.
  const double sector_w = 2.0 * kPi / static_cast<double>(n_regions);
  double shares[3] = {0, 0, 0};
  double share_sum = 0.0;
  for (std::size_t i = 0; i < n_regions; ++i) {
    shares[i] = rng.uniform(0.5, 1.5);
    share_sum += shares[i];
  }

  for (std::size_t i = 0; i < n_regions; ++i) {
    const double share = target * shares[i] / share_sum;
    DistortRegion r;

    double s = rng.uniform(0.15, 1.0);
    double w = rng.uniform(0.6, 1.0);

    // Latitude band, kept clear of the poles. The band must be tall enough
    // that the sector can supply the share even at w = s = 1, else heavy
    // targets are unreachable.
    const double dyaw_max = sector_w * 0.92;
    const double lat_cap = kPi / 2.0 - 0.02;
    double center = rng.uniform(-0.35, 0.35);
    const double dsin_needed = 4.0 * kPi * share / dyaw_max;
    const double ratio = dsin_needed / (2.0 * std::cos(center));
    double half_lo = 0.3;
    if (ratio < 1.0) half_lo = std::max(half_lo, std::asin(ratio) * 1.1);
    half_lo = std::min(half_lo, lat_cap);
    double half = rng.uniform(half_lo, std::max(half_lo, 1.15));
    if (half > lat_cap) half = lat_cap;
    center = std::clamp(center, -(lat_cap - half), lat_cap - half);
    r.pitch_lo = center - half;
    r.pitch_hi = center + half;
    const double dsin = std::sin(r.pitch_hi) - std::sin(r.pitch_lo);

    // Width to hit the share at (w, s); clamp to the sector and push the
    // shortfall back into s, then w.
    double dyaw = 4.0 * kPi * share / (w * s * dsin);
    dyaw = std::clamp(dyaw, 0.25, dyaw_max);
    double area = dyaw * dsin / (4.0 * kPi);
    s = std::clamp(share / (w * area), 0.1, 1.0);

    const auto kind = static_cast<DistortKind>(rng.uniform_int(0, 4));
    r.spec.kind = kind;
    r.spec.param = param_for_ramp(kind, s);
    r.spec.seed = rng.next_u64();
    s = severity_ramp(kind, r.spec.param);  // actual, after rounding

    w = std::clamp(s > 0.0 ? share / (area * s) : 1.0, 0.05, 1.0);
    r.weight = w;

    const double sector_lo = -kPi + sector_w * static_cast<double>(i);
    r.yaw_lo = sector_lo + rng.uniform(0.0, sector_w - dyaw);
    r.yaw_hi = r.yaw_lo + dyaw;
    scene.regions.push_back(r);
  }
  return scene;
}

// ------------------------------------------------------------ serialization

namespace {

nlohmann::json region_to_json(const DistortRegion& r) {
  return {{"yaw_lo", r.yaw_lo},
          {"yaw_hi", r.yaw_hi},
          {"pitch_lo", r.pitch_lo},
          {"pitch_hi", r.pitch_hi},
          {"weight", r.weight},
          {"spec",
           {{"kind", kind_name(r.spec.kind)},
            {"param", r.spec.param},
            {"seed", r.spec.seed}}}};
}

DistortRegion region_from_json(const nlohmann::json& j) {
  DistortRegion r;
  r.yaw_lo = j.at("yaw_lo").get<double>();
  r.yaw_hi = j.at("yaw_hi").get<double>();
  r.pitch_lo = j.at("pitch_lo").get<double>();
  r.pitch_hi = j.at("pitch_hi").get<double>();
  r.weight = j.at("weight").get<double>();
  const auto& s = j.at("spec");
  r.spec.kind = kind_from_string(s.at("kind").get<std::string>());
  r.spec.param = s.at("param").get<double>();
  r.spec.seed = s.at("seed").get<std::uint64_t>();
  return r;
}

nlohmann::json scene_json(const SceneSpec& scene) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : scene.regions) regions.push_back(region_to_json(r));
  return {{"seed", scene.seed},       {"octaves", scene.octaves},
          {"base_freq", scene.base_freq}, {"width", scene.width},
          {"height", scene.height},   {"regions", regions}};
}

SceneSpec scene_from(const nlohmann::json& j) {
  SceneSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.octaves = j.at("octaves").get<int>();
  s.base_freq = j.at("base_freq").get<double>();
  s.width = j.at("width").get<std::size_t>();
  s.height = j.at("height").get<std::size_t>();
  for (const auto& rj : j.at("regions")) s.regions.push_back(region_from_json(rj));
  return s;
}

}  // namespace

std::string scene_to_json(const SceneSpec& scene) { return scene_json(scene).dump(); }

SceneSpec scene_from_json(const std::string& json_text) {
  try {
    return scene_from(nlohmann::json::parse(json_text));
  } catch (const std::exception& e) {
    throw DataError(std::string("bad scene JSON: ") + e.what());
  }
}

DatasetPaths make_dataset(const std::string& out_dir, std::size_t n,
                          std::uint64_t seed, double train_frac,
                          std::size_t width, std::size_t height,
                          double label_noise) {
  if (train_frac < 0.0 || train_frac > 1.0)
    throw ArgumentError("make_dataset: train fraction outside [0,1]");
  if (label_noise < 0.0)
    throw ArgumentError("make_dataset: negative label noise");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");

  // Seeded shuffle decides split membership before any generation.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(mix64(seed ^ 0x73706c6974ull));
  for (std::size_t i = n; i > 1; --i)
    std::swap(order[i - 1],
              order[static_cast<std::size_t>(shuffle_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_frac * static_cast<double>(n)));
  std::vector<bool> is_train(n, false);
  for (std::size_t i = 0; i < n_train && i < n; ++i) is_train[order[i]] = true;

  DatasetPaths paths;
  paths.dir = out_dir;
  paths.train_manifest = (fs::path(out_dir) / "train.jsonl").string();
  paths.test_manifest = (fs::path(out_dir) / "test.jsonl").string();
  std::ofstream train_out(paths.train_manifest), test_out(paths.test_manifest);
  if (!train_out || !test_out)
    throw DataError("make_dataset: cannot write manifests in " + out_dir);

  Rng noise_rng(mix64(seed ^ 0x6e6f697365ull));
  for (std::size_t i = 0; i < n; ++i) {
    SceneSpec scene = gen_scene(seed + i, width, height);
    const Image erp = render_scene(scene);
    char name[32];
    std::snprintf(name, sizeof(name), "images/%05zu.png", i);
    save_png((fs::path(out_dir) / name).string(), erp, 16);

    double mos = oracle_mos(scene);
    if (label_noise > 0.0)
      mos = std::clamp(mos + label_noise * noise_rng.normal(), 0.0, 100.0);
    nlohmann::json line = {{"image", name},
                           {"mos", mos},
                           {"scene", scene_json(scene)}};
    (is_train[i] ? train_out : test_out) << line.dump() << "\n";
    (is_train[i] ? paths.n_train : paths.n_test)++;
  }
  if (!train_out.flush() || !test_out.flush())
    throw DataError("make_dataset: manifest write failed");
  return paths;
}

std::vector<LabeledSample> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  const std::string base = std::filesystem::path(path).parent_path().string();
  std::vector<LabeledSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledSample s;
      s.image_path = (std::filesystem::path(base) / j.at("image").get<std::string>()).string();
      s.mos = j.at("mos").get<double>();
      s.scene = scene_from(j.at("scene"));
      samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      throw DataError("manifest " + path + " line " + std::to_string(line_no) +
                      ": " + e.what());
    }
  }
  if (samples.empty()) throw DataError("manifest has no samples: " + path);
  return samples;
}

}  // namespace panoscan

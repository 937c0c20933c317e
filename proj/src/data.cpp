#include "mpscl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpscl/error.hpp"
#include "mpscl/pgm.hpp"
#include "mpscl/rng.hpp"

namespace fs = std::filesystem;

namespace mpscl {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Domain A per-category intensity means: background, then the nested
// structures from the outer ring inward.
constexpr double kMeansA[] = {0.05, 0.2, 0.45, 0.65, 0.85, 0.35, 0.75};
constexpr double kNoiseA = 0.03;
constexpr double kNoiseB = 0.05;
constexpr double kBiasAmplitude = 0.08;

// Domain B inverts the scale: 1 - mu compressed to [0.15, 0.9].
double domain_b_mean(double mu_a) { return 0.15 + 0.75 * (1.0 - mu_a); }

// Wavy ellipse membership: normalized radius against an angle-modulated rim.
struct Blob {
  double cx, cy;        // center, pixels
  double ax, ay;        // semi-axes, pixels
  double angle;         // orientation, radians
  double wob1, wob2;    // rim modulation amplitudes
  double ph1, ph2;      // rim modulation phases

  bool contains(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double u = (dx * ca + dy * sa) / ax;
    const double v = (-dx * sa + dy * ca) / ay;
    const double rho = std::sqrt(u * u + v * v);
    const double t = std::atan2(v, u);
    const double rim = 1.0 + wob1 * std::sin(3.0 * t + ph1) + wob2 * std::sin(5.0 * t + ph2);
    return rho <= rim;
  }
};

std::string scene_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene%04d", index);
  return buf;
}

ImageU16 quantize16(const ImageF& img) {
  ImageU16 out;
  out.h = img.h;
  out.w = img.w;
  out.v.resize(img.v.size());
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    out.v[i] = static_cast<std::uint16_t>(std::lround(img.v[i] * 65535.0));
  }
  return out;
}

ImageF dequantize16(const ImageU16& img) {
  ImageF out;
  out.h = img.h;
  out.w = img.w;
  out.v.resize(img.v.size());
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    out.v[i] = static_cast<double>(img.v[i]) / 65535.0;
  }
  return out;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  if (spec.h < 16 || spec.w < 16) {
    throw ValueError("generate_scene: canvas must be at least 16x16, got " +
                     std::to_string(spec.h) + "x" + std::to_string(spec.w));
  }
  if (spec.num_categories < 2 || spec.num_categories > 7) {
    throw ValueError("generate_scene: num_categories must lie in [2, 7], got " +
                     std::to_string(spec.num_categories));
  }
  const int H = spec.h, W = spec.w, L = spec.num_categories;

  Rng geom(mix_seed(spec.seed, 0));
  Rng noise_a(mix_seed(spec.seed, 1));
  Rng noise_b(mix_seed(spec.seed, 2));

  Blob outer;
  outer.cx = W / 2.0 + geom.uniform(-W / 16.0, W / 16.0);
  outer.cy = H / 2.0 + geom.uniform(-H / 16.0, H / 16.0);
  outer.ax = geom.uniform(0.28, 0.36) * W;
  outer.ay = geom.uniform(0.28, 0.36) * H;
  outer.angle = geom.uniform(0.0, kTwoPi / 2.0);
  outer.wob1 = 0.08;
  outer.wob2 = 0.05;
  outer.ph1 = geom.uniform(0.0, kTwoPi);
  outer.ph2 = geom.uniform(0.0, kTwoPi);

  // Sub-structures sit at evenly spaced angles halfway out from the center;
  // spacing and radii keep them disjoint and inside the outer rim.
  const int subs = L - 2;
  std::vector<Blob> inner;
  const double t0 = geom.uniform(0.0, kTwoPi);
  const double rmin = std::min(outer.ax, outer.ay);
  for (int i = 0; i < subs; ++i) {
    const double t = t0 + kTwoPi * i / std::max(1, subs);
    const double u = 0.5 * std::cos(t), v = 0.5 * std::sin(t);
    const double ca = std::cos(outer.angle), sa = std::sin(outer.angle);
    Blob b;
    b.cx = outer.cx + outer.ax * u * ca - outer.ay * v * sa;
    b.cy = outer.cy + outer.ax * u * sa + outer.ay * v * ca;
    const double r = geom.uniform(0.22, 0.30) * rmin;
    b.ax = r;
    b.ay = r * geom.uniform(0.8, 1.2);
    b.angle = geom.uniform(0.0, kTwoPi / 2.0);
    b.wob1 = 0.1;
    b.wob2 = 0.0;
    b.ph1 = geom.uniform(0.0, kTwoPi);
    b.ph2 = 0.0;
    inner.push_back(b);
  }

  Scene scene;
  scene.mask.h = H;
  scene.mask.w = W;
  scene.mask.v.assign(static_cast<std::size_t>(H) * W, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::uint8_t cat = 0;
      if (outer.contains(px, py)) {
        cat = 1;
        for (int i = 0; i < subs; ++i) {
          if (inner[static_cast<std::size_t>(i)].contains(px, py)) {
            cat = static_cast<std::uint8_t>(2 + i);
            break;
          }
        }
      }
      scene.mask.v[static_cast<std::size_t>(y) * W + x] = cat;
    }
  }

  // Domain B multiplicative bias field: one smooth low-frequency bump.
  const double fx = geom.uniform(0.5, 1.0), fy = geom.uniform(0.5, 1.0);
  const double phx = geom.uniform(0.0, kTwoPi), phy = geom.uniform(0.0, kTwoPi);

  scene.image_a.h = scene.image_b.h = H;
  scene.image_a.w = scene.image_b.w = W;
  scene.image_a.v.resize(scene.mask.v.size());
  scene.image_b.v.resize(scene.mask.v.size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double mu = kMeansA[scene.mask.v[i]];
      const double a = mu + noise_a.normal(0.0, kNoiseA);
      scene.image_a.v[i] = std::clamp(a, 0.0, 1.0);
      const double bias =
          1.0 + kBiasAmplitude * std::sin(kTwoPi * fx * x / W + phx) *
                    std::sin(kTwoPi * fy * y / H + phy);
      const double b = domain_b_mean(mu) * bias + noise_b.normal(0.0, kNoiseB);
      scene.image_b.v[i] = std::clamp(b, 0.0, 1.0);
    }
  }
  return scene;
}

std::vector<ManifestRow> write_dataset(const std::string& out_dir, int scenes,
                                       std::uint64_t seed, int h, int w,
                                       int num_categories) {
  if (scenes < 0) throw ValueError("write_dataset: negative scene count");
  fs::create_directories(fs::path(out_dir) / "images");
  fs::create_directories(fs::path(out_dir) / "masks");

  const int train_count = static_cast<int>((5LL * scenes + 5) / 6);  // ceil(5N/6)
  std::vector<ManifestRow> rows;
  for (int i = 0; i < scenes; ++i) {
    SceneSpec spec;
    spec.seed = mix_seed(seed, static_cast<std::uint64_t>(i));
    spec.h = h;
    spec.w = w;
    spec.num_categories = num_categories;
    const Scene scene = generate_scene(spec);
    const std::string stem = scene_stem(i);
    const std::string split = i < train_count ? "train" : "test";
    for (const char* domain : {"A", "B"}) {
      const std::string img_rel = "images/" + stem + "_" + domain + ".pgm";
      const std::string mask_rel = "masks/" + stem + "_" + domain + "_mask.pgm";
      const ImageF& img = domain[0] == 'A' ? scene.image_a : scene.image_b;
      write_pgm((fs::path(out_dir) / img_rel).string(), quantize16(img));
      write_pgm((fs::path(out_dir) / mask_rel).string(), scene.mask);
      rows.push_back({split, domain, img_rel, mask_rel});
    }
  }
  write_manifest((fs::path(out_dir) / "manifest.csv").string(), rows);
  return rows;
}

std::vector<ManifestRow> build_manifest(const std::string& dir) {
  std::vector<int> indices;
  const fs::path images = fs::path(dir) / "images";
  if (fs::exists(images)) {
    for (const auto& entry : fs::directory_iterator(images)) {
      const std::string name = entry.path().filename().string();
      int idx = -1;
      char domain = 0;
      if (std::sscanf(name.c_str(), "scene%d_%c.pgm", &idx, &domain) == 2 && domain == 'A' &&
          name.size() >= 6 && name.compare(name.size() - 6, 6, "_A.pgm") == 0) {
        indices.push_back(idx);
      }
    }
  }
  std::sort(indices.begin(), indices.end());
  const int scenes = static_cast<int>(indices.size());
  const int train_count = static_cast<int>((5LL * scenes + 5) / 6);
  std::vector<ManifestRow> rows;
  for (int k = 0; k < scenes; ++k) {
    const int i = indices[static_cast<std::size_t>(k)];
    const std::string stem = scene_stem(i);
    const std::string split = k < train_count ? "train" : "test";
    for (const char* domain : {"A", "B"}) {
      rows.push_back({split, domain, "images/" + stem + "_" + domain + ".pgm",
                      "masks/" + stem + "_" + domain + "_mask.pgm"});
    }
  }
  write_manifest((fs::path(dir) / "manifest.csv").string(), rows);
  return rows;
}

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_manifest: cannot open " + path);
  f << "split,domain,image_path,mask_path\n";
  for (const auto& r : rows) {
    f << r.split << ',' << r.domain << ',' << r.image_path << ',' << r.mask_path << '\n';
  }
  if (!f) throw IoError("write_manifest: short write to " + path);
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw ParseError("manifest: empty file", 0);
  if (line == "split,domain,image_path,mask_path\r") line.pop_back();
  if (line != "split,domain,image_path,mask_path") {
    throw ParseError("manifest: unexpected header '" + line + "'", 0);
  }
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestRow r;
    if (!std::getline(ss, r.split, ',') || !std::getline(ss, r.domain, ',') ||
        !std::getline(ss, r.image_path, ',') || !std::getline(ss, r.mask_path)) {
      throw ParseError("manifest: malformed row " + std::to_string(lineno), lineno);
    }
    rows.push_back(std::move(r));
    ++lineno;
  }
  return rows;
}

Dataset Dataset::open(const std::string& dir) {
  Dataset ds;
  ds.dir_ = dir;
  ds.rows_ = read_manifest((fs::path(dir) / "manifest.csv").string());
  return ds;
}

ImageF Dataset::image(std::size_t i) const {
  const auto& r = rows_.at(i);
  return dequantize16(to_u16(read_pgm((fs::path(dir_) / r.image_path).string())));
}

ImageU8 Dataset::mask(std::size_t i, MaskPurpose purpose) const {
  const auto& r = rows_.at(i);
  if (purpose == MaskPurpose::Training && r.domain == target_domain_) {
    throw GuardError("Dataset: target-domain mask '" + r.mask_path +
                     "' requested on a training path; target labels are reserved "
                     "for evaluation");
  }
  return to_u8(read_pgm((fs::path(dir_) / r.mask_path).string()));
}

std::vector<std::size_t> Dataset::select(const std::string& split,
                                         const std::string& domain) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i].split == split && rows_[i].domain == domain) out.push_back(i);
  }
  return out;
}

}  // namespace mpscl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpscl/image.hpp"

namespace mpscl {

// Deterministic two-modality scene recipe: one shared label mask rendered
// into two domains with different appearance.
struct SceneSpec {
  std::uint64_t seed = 0;
  int h = 64;
  int w = 64;
  int num_categories = 5;  // background + nested structures
};

struct Scene {
  ImageU8 mask;      // shared anatomy
  ImageF image_a;    // domain A rendering
  ImageF image_b;    // domain B rendering (inverted intensities, bias field)
};

// Builds the mask (one large wavy ellipse containing L-2 disjoint sub-blobs)
// and both renderings. Fully deterministic from the spec. Errors when the
// canvas is smaller than 16 pixels a side or L is out of [2, 7].
Scene generate_scene(const SceneSpec& spec);

struct ManifestRow {
  std::string split;       // train | test
  std::string domain;      // A | B
  std::string image_path;  // relative to the manifest directory
  std::string mask_path;
};

// Generates `scenes` scenes under out_dir (images/, masks/) and writes
// manifest.csv. The first ceil(5N/6) scenes form the train split, the rest
// the test split. Images are 16-bit PGM, masks 8-bit PGM.
std::vector<ManifestRow> write_dataset(const std::string& out_dir, int scenes,
                                       std::uint64_t seed, int h, int w,
                                       int num_categories = 5);

// Scans images/ and masks/ under dir for scene files written by
// write_dataset and rebuilds the manifest rows (also writes manifest.csv).
std::vector<ManifestRow> build_manifest(const std::string& dir);

void write_manifest(const std::string& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

enum class MaskPurpose { Training, Evaluation };

// Manifest-backed sample access. Target-domain masks are listed for
// evaluation only; requesting one with MaskPurpose::Training throws
// GuardError. The target domain defaults to "B".
class Dataset {
 public:
  static Dataset open(const std::string& dir);

  std::size_t size() const { return rows_.size(); }
  const ManifestRow& row(std::size_t i) const { return rows_.at(i); }
  const std::string& dir() const { return dir_; }

  ImageF image(std::size_t i) const;
  ImageU8 mask(std::size_t i, MaskPurpose purpose) const;

  void set_target_domain(const std::string& domain) { target_domain_ = domain; }
  const std::string& target_domain() const { return target_domain_; }

  std::vector<std::size_t> select(const std::string& split, const std::string& domain) const;

 private:
  std::string dir_;
  std::string target_domain_ = "B";
  std::vector<ManifestRow> rows_;
};

}  // namespace mpscl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpscl/prototypes.hpp"
#include "mpscl/tensor.hpp"

namespace mpscl {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Binary training snapshot. Layout (all little-endian):
//   magic "MPSC", u32 version,
//   u32 phase, u64 iteration, f64 best_val_dice,
//   u64 config_len + config bytes (canonical key=value text),
//   u8 has_prototypes [+ u32 L, u32 d, u64 proto_iteration, f64 momentum,
//                       L*d f64 vectors],
//   u64 tensor_count, then per tensor:
//     u64 name_len + name bytes, u32 rank, u64 dims..., f64 payload.
// Doubles round-trip bit-exactly (raw IEEE-754 bits).
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t phase = 1;
  std::uint64_t iteration = 0;
  double best_val_dice = -1.0;
  std::string config_text;
  bool has_prototypes = false;
  PrototypeSet prototypes;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(const std::string& name) const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mpscl

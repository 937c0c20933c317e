#include "mpscl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mpscl/error.hpp"

namespace mpscl {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n, const char* what) const {
    if (bytes.size() - pos < n) {
      throw ParseError(std::string("checkpoint: truncated ") + what, pos);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }

  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  out += "MPSC";
  put_u32(out, Checkpoint::kVersion);
  put_u32(out, ckpt.phase);
  put_u64(out, ckpt.iteration);
  put_f64(out, ckpt.best_val_dice);
  put_u64(out, ckpt.config_text.size());
  out += ckpt.config_text;
  out.push_back(ckpt.has_prototypes ? 1 : 0);
  if (ckpt.has_prototypes) {
    const auto& p = ckpt.prototypes;
    put_u32(out, static_cast<std::uint32_t>(p.num_categories));
    put_u32(out, static_cast<std::uint32_t>(p.dim));
    put_u64(out, p.iteration);
    put_f64(out, p.momentum);
    for (double v : p.vectors) put_f64(out, v);
  }
  put_u64(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    put_u64(out, t.name.size());
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    std::int64_t numel = 1;
    for (auto d : t.shape) {
      put_u64(out, static_cast<std::uint64_t>(d));
      numel *= d;
    }
    if (numel != static_cast<std::int64_t>(t.values.size())) {
      throw ValueError("checkpoint: tensor '" + t.name + "' shape/value mismatch");
    }
    for (double v : t.values) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r{bytes};
  const std::string magic = r.str(4, "magic");
  if (magic != "MPSC") throw ParseError("checkpoint: bad magic", 0);
  const std::uint32_t version = r.u32("version");
  if (version != Checkpoint::kVersion) {
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 4);
  }
  Checkpoint ckpt;
  ckpt.phase = r.u32("phase");
  ckpt.iteration = r.u64("iteration");
  ckpt.best_val_dice = r.f64("best_val_dice");
  const std::uint64_t cfg_len = r.u64("config length");
  ckpt.config_text = r.str(cfg_len, "config text");
  r.need(1, "prototype flag");
  ckpt.has_prototypes = bytes[r.pos++] != 0;
  if (ckpt.has_prototypes) {
    auto& p = ckpt.prototypes;
    p.num_categories = static_cast<int>(r.u32("prototype categories"));
    p.dim = static_cast<int>(r.u32("prototype dim"));
    p.iteration = r.u64("prototype iteration");
    p.momentum = r.f64("prototype momentum");
    p.initialized = true;
    const std::size_t n = static_cast<std::size_t>(p.num_categories) *
                          static_cast<std::size_t>(p.dim);
    p.vectors.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.vectors[i] = r.f64("prototype vector");
  }
  const std::uint64_t count = r.u64("tensor count");
  ckpt.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor t;
    const std::uint64_t name_len = r.u64("tensor name length");
    t.name = r.str(name_len, "tensor name");
    const std::uint32_t rank = r.u32("tensor rank");
    std::int64_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::int64_t dim = static_cast<std::int64_t>(r.u64("tensor dim"));
      if (dim <= 0 || dim > (1LL << 32)) {
        throw ParseError("checkpoint: implausible dimension in tensor '" + t.name + "'", r.pos);
      }
      t.shape.push_back(dim);
      numel *= dim;
    }
    t.values.resize(static_cast<std::size_t>(numel));
    for (std::int64_t j = 0; j < numel; ++j) {
      t.values[static_cast<std::size_t>(j)] = r.f64("tensor payload");
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.pos != bytes.size()) {
    throw ParseError("checkpoint: trailing bytes", r.pos);
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  const std::string bytes = encode_checkpoint(ckpt);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("save_checkpoint: short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace mpscl

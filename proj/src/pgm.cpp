#include "mpscl/pgm.hpp"

#include <fstream>
#include <sstream>

#include "mpscl/error.hpp"

namespace mpscl {

namespace {

void append_header(std::string& out, int w, int h, int maxval) {
  out += "P5\n";
  out += std::to_string(w);
  out += ' ';
  out += std::to_string(h);
  out += '\n';
  out += std::to_string(maxval);
  out += '\n';
}

// Skips whitespace and '#' comments; returns the offset of the next token.
std::size_t skip_separators(const std::string& s, std::size_t pos) {
  while (pos < s.size()) {
    const char c = s[pos];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      ++pos;
    } else if (c == '#') {
      while (pos < s.size() && s[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  return pos;
}

long parse_int(const std::string& s, std::size_t& pos, const char* what) {
  pos = skip_separators(s, pos);
  if (pos >= s.size()) {
    throw ParseError(std::string("pgm: missing ") + what, s.size());
  }
  if (s[pos] < '0' || s[pos] > '9') {
    throw ParseError(std::string("pgm: expected digit for ") + what, pos);
  }
  long value = 0;
  const std::size_t start = pos;
  while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
    value = value * 10 + (s[pos] - '0');
    if (value > 1000000000L) {
      throw ParseError(std::string("pgm: ") + what + " out of range", start);
    }
    ++pos;
  }
  return value;
}

}  // namespace

std::string encode_pgm(const ImageU8& img) {
  if (img.w <= 0 || img.h <= 0 ||
      img.v.size() != static_cast<std::size_t>(img.w) * img.h) {
    throw ValueError("encode_pgm: malformed raster");
  }
  std::string out;
  append_header(out, img.w, img.h, 255);
  out.append(reinterpret_cast<const char*>(img.v.data()), img.v.size());
  return out;
}

std::string encode_pgm(const ImageU16& img) {
  if (img.w <= 0 || img.h <= 0 ||
      img.v.size() != static_cast<std::size_t>(img.w) * img.h) {
    throw ValueError("encode_pgm: malformed raster");
  }
  std::string out;
  append_header(out, img.w, img.h, 65535);
  out.reserve(out.size() + img.v.size() * 2);
  for (std::uint16_t s : img.v) {
    out.push_back(static_cast<char>(s >> 8));
    out.push_back(static_cast<char>(s & 0xFF));
  }
  return out;
}

PgmImage decode_pgm(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw ParseError("pgm: bad magic, expected P5", 0);
  }
  std::size_t pos = 2;
  const long w = parse_int(bytes, pos, "width");
  const long h = parse_int(bytes, pos, "height");
  const long maxval = parse_int(bytes, pos, "maxval");
  if (w <= 0 || h <= 0) {
    throw ParseError("pgm: non-positive dimensions", pos);
  }
  if (maxval <= 0 || maxval > 65535) {
    throw ParseError("pgm: maxval must lie in [1, 65535]", pos);
  }
  if (pos >= bytes.size()) {
    throw ParseError("pgm: missing whitespace after maxval", bytes.size());
  }
  const char sep = bytes[pos];
  if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
    throw ParseError("pgm: expected single whitespace after maxval", pos);
  }
  ++pos;
  const std::size_t pixels = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
  const std::size_t need = pixels * bytes_per_sample;
  if (bytes.size() - pos < need) {
    throw ParseError("pgm: truncated payload, expected " + std::to_string(need) +
                         " bytes, got " + std::to_string(bytes.size() - pos),
                     bytes.size());
  }
  if (bytes.size() - pos > need) {
    throw ParseError("pgm: trailing bytes after payload", pos + need);
  }
  PgmImage img;
  img.w = static_cast<int>(w);
  img.h = static_cast<int>(h);
  img.maxval = static_cast<int>(maxval);
  img.v.resize(pixels);
  if (bytes_per_sample == 1) {
    for (std::size_t i = 0; i < pixels; ++i) {
      img.v[i] = static_cast<std::uint8_t>(bytes[pos + i]);
    }
  } else {
    for (std::size_t i = 0; i < pixels; ++i) {
      const auto hi = static_cast<std::uint8_t>(bytes[pos + 2 * i]);
      const auto lo = static_cast<std::uint8_t>(bytes[pos + 2 * i + 1]);
      img.v[i] = static_cast<std::uint16_t>((hi << 8) | lo);
    }
  }
  return img;
}

void write_pgm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_pgm: cannot open " + path);
  const std::string bytes = encode_pgm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write_pgm: short write to " + path);
}

void write_pgm(const std::string& path, const ImageU16& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("write_pgm: cannot open " + path);
  const std::string bytes = encode_pgm(img);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write_pgm: short write to " + path);
}

PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pgm: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return decode_pgm(buf.str());
}

ImageU8 to_u8(const PgmImage& img) {
  if (img.maxval > 255) {
    throw ValueError("to_u8: raster has maxval " + std::to_string(img.maxval));
  }
  ImageU8 out;
  out.h = img.h;
  out.w = img.w;
  out.v.resize(img.v.size());
  for (std::size_t i = 0; i < img.v.size(); ++i) {
    out.v[i] = static_cast<std::uint8_t>(img.v[i]);
  }
  return out;
}

ImageU16 to_u16(const PgmImage& img) {
  ImageU16 out;
  out.h = img.h;
  out.w = img.w;
  out.v = img.v;
  return out;
}

}  // namespace mpscl

#pragma once

#include <cstdint>
#include <string>

#include "mpscl/image.hpp"

namespace mpscl {

// Decoded binary PGM (P5). Samples are widened to 16 bits regardless of the
// file's maxval; maxval distinguishes 8-bit (255) from 16-bit (65535) rasters.
struct PgmImage {
  int w = 0;
  int h = 0;
  int maxval = 0;
  std::vector<std::uint16_t> v;
};

// Serializes a raster as binary PGM: "P5\n<w> <h>\n<maxval>\n" followed by the
// payload, one byte per sample for maxval <= 255 and two bytes (MSB first)
// otherwise. Exactly one whitespace byte separates the maxval from the payload.
std::string encode_pgm(const ImageU8& img);
std::string encode_pgm(const ImageU16& img);

// Parses a binary PGM from memory. Throws ParseError carrying the byte offset
// of the malformed header token or the truncation point.
PgmImage decode_pgm(const std::string& bytes);

void write_pgm(const std::string& path, const ImageU8& img);
void write_pgm(const std::string& path, const ImageU16& img);
PgmImage read_pgm(const std::string& path);

ImageU8 to_u8(const PgmImage& img);    // requires maxval <= 255
ImageU16 to_u16(const PgmImage& img);  // any maxval

}  // namespace mpscl

#pragma once

// Minimal 8-bit RGB / grey PNG writer. Link with ZLIB::ZLIB.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <zlib.h>

#include "error.hpp"
#include "features.hpp"

namespace consensus {

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

inline void put_chunk(std::string& out, const char type[4], const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// Encodes a patch with 1 or 3 channels; intensities are clamped to [0, 1].
inline std::string encode_png(const Patch& patch) {
  require(patch.channels == 1 || patch.channels == 3, ErrorKind::shape, "encode_png: need 1 or 3 channels");
  require(patch.data.size() == patch.width * patch.height * patch.channels, ErrorKind::shape,
          "encode_png: data size mismatch");
  std::string raw;
  raw.reserve((patch.width * patch.channels + 1) * patch.height);
  for (std::size_t y = 0; y < patch.height; ++y) {
    raw.push_back('\0');  // filter: none
    for (std::size_t x = 0; x < patch.width; ++x) {
      for (std::size_t ch = 0; ch < patch.channels; ++ch) {
        const double v = std::clamp(patch.at(ch, y, x), 0.0, 1.0);
        raw.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
      }
    }
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string packed(packed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(packed.data()), &packed_size, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK) {
    fail(ErrorKind::io, "encode_png: deflate failed");
  }
  packed.resize(packed_size);

  std::string out("\x89PNG\r\n\x1a\n", 8);
  std::string header;
  detail::put_u32(header, static_cast<std::uint32_t>(patch.width));
  detail::put_u32(header, static_cast<std::uint32_t>(patch.height));
  header.push_back(8);                                      // bit depth
  header.push_back(patch.channels == 3 ? 2 : 0);            // colour type
  header.append(3, '\0');                                   // compression, filter, interlace
  detail::put_chunk(out, "IHDR", header);
  detail::put_chunk(out, "IDAT", packed);
  detail::put_chunk(out, "IEND", "");
  return out;
}

}  // namespace consensus

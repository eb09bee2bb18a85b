#pragma once

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "cosim/common.hpp"
#include "cosim/tensor.hpp"

// 8-bit image I/O. PNG (gray and RGB, non-interlaced) is the primary format,
// with binary PGM/PPM accepted as a zero-dependency fallback. Decoding
// supports filter types 0-4 and color types gray / RGB / RGBA (alpha is
// dropped on load).

namespace cosim {

// Interleaved row-major HxWxC bytes.
struct ImageU8 {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

inline Tensor image_to_tensor(const ImageU8& img) {
  Tensor t = Tensor::zeros({img.channels, img.height, img.width});
  const std::size_t hw = static_cast<std::size_t>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c)
    for (std::size_t j = 0; j < hw; ++j)
      t.data()[static_cast<std::size_t>(c) * hw + j] =
          static_cast<double>(img.pixels[j * static_cast<std::size_t>(img.channels) +
                                         static_cast<std::size_t>(c)]) /
          255.0;
  return t;
}

// pixel = round(255 * v), clamped to [0, 1] first.
inline ImageU8 tensor_to_image(const Tensor& t) {
  COSIM_CHECK_ARG(t.ndim() == 3 && (t.dim(0) == 1 || t.dim(0) == 3),
                  "tensor_to_image: expected 1xHxW or 3xHxW, shape is ", shape_str(t.shape()));
  ImageU8 img;
  img.channels = t.dim(0);
  img.height = t.dim(1);
  img.width = t.dim(2);
  const std::size_t hw = static_cast<std::size_t>(img.height) * img.width;
  img.pixels.resize(hw * static_cast<std::size_t>(img.channels));
  for (int c = 0; c < img.channels; ++c)
    for (std::size_t j = 0; j < hw; ++j) {
      const double v = std::clamp(t.data()[static_cast<std::size_t>(c) * hw + j], 0.0, 1.0);
      img.pixels[j * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  return img;
}

namespace imgio {

inline void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32_be(const std::uint8_t* p) {
  return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
         (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                         const std::vector<std::uint8_t>& payload) {
  put_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  std::size_t crc_start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const auto crc = static_cast<std::uint32_t>(
      ::crc32(0, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start)));
  put_u32_be(out, crc);
}

inline const std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

inline std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  COSIM_CHECK_ARG(img.channels == 1 || img.channels == 3,
                  "encode_png: channels must be 1 or 3, got ", img.channels);
  COSIM_CHECK_ARG(img.height > 0 && img.width > 0, "encode_png: empty image");
  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);

  std::vector<std::uint8_t> ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(img.channels == 1 ? 0 : 2);            // gray / truecolor
  ihdr.push_back(0);                                    // compression
  ihdr.push_back(0);                                    // filter method
  ihdr.push_back(0);                                    // no interlace
  append_chunk(out, "IHDR", ihdr);

  // Filter byte 0 (None) on every scanline.
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    raw[static_cast<std::size_t>(y) * (stride + 1)] = 0;
    std::memcpy(raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1,
                img.pixels.data() + static_cast<std::size_t>(y) * stride, stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  const int rc = compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                           Z_DEFAULT_COMPRESSION);
  COSIM_CHECK_DATA(rc == Z_OK, "encode_png: deflate failed with code ", rc);
  compressed.resize(bound);
  append_chunk(out, "IDAT", compressed);
  append_chunk(out, "IEND", {});
  return out;
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

inline ImageU8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  COSIM_CHECK_DATA(bytes.size() > 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0,
                   "decode_png: '", origin, "' is not a PNG file");
  std::size_t pos = 8;
  int width = 0, height = 0, bit_depth = 0, color_type = 0, interlace = 0;
  std::vector<std::uint8_t> idat;
  bool saw_ihdr = false, saw_iend = false;
  while (pos + 8 <= bytes.size() && !saw_iend) {
    const std::uint32_t len = get_u32_be(bytes.data() + pos);
    COSIM_CHECK_DATA(pos + 12 + len <= bytes.size(), "decode_png: truncated chunk in '", origin,
                     "'");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* payload = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      width = static_cast<int>(get_u32_be(payload));
      height = static_cast<int>(get_u32_be(payload + 4));
      bit_depth = payload[8];
      color_type = payload[9];
      interlace = payload[12];
      saw_ihdr = true;
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), payload, payload + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_iend = true;
    }
    pos += 12 + len;
  }
  COSIM_CHECK_DATA(saw_ihdr && !idat.empty(), "decode_png: '", origin, "' has no image data");
  COSIM_CHECK_DATA(bit_depth == 8, "decode_png: '", origin, "' has unsupported bit depth ",
                   bit_depth, " (only 8 supported)");
  COSIM_CHECK_DATA(interlace == 0, "decode_png: '", origin, "' is interlaced (unsupported)");
  int src_channels;
  switch (color_type) {
    case 0: src_channels = 1; break;
    case 2: src_channels = 3; break;
    case 4: src_channels = 2; break;
    case 6: src_channels = 4; break;
    default:
      throw data_error(detail::cat("decode_png: '", origin, "' has unsupported color type ",
                                   color_type));
  }
  COSIM_CHECK_DATA(width > 0 && height > 0, "decode_png: '", origin, "' has bad dimensions");

  const std::size_t stride = static_cast<std::size_t>(width) * src_channels;
  std::vector<std::uint8_t> raw((stride + 1) * static_cast<std::size_t>(height));
  uLongf raw_size = static_cast<uLongf>(raw.size());
  const int rc = uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size()));
  COSIM_CHECK_DATA(rc == Z_OK && raw_size == raw.size(), "decode_png: '", origin,
                   "' inflate failed");

  // Undo per-scanline filters in place.
  const int bpp = src_channels;
  std::vector<std::uint8_t> flat(stride * static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) {
    const std::uint8_t filter = raw[static_cast<std::size_t>(y) * (stride + 1)];
    const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (stride + 1) + 1;
    std::uint8_t* cur = flat.data() + static_cast<std::size_t>(y) * stride;
    const std::uint8_t* up = y > 0 ? cur - stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? cur[i - static_cast<std::size_t>(bpp)] : 0;
      const int b = up ? up[i] : 0;
      const int c = (up && i >= static_cast<std::size_t>(bpp))
                        ? up[i - static_cast<std::size_t>(bpp)]
                        : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default:
          throw data_error(detail::cat("decode_png: '", origin, "' has bad filter byte ",
                                       static_cast<int>(filter)));
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }

  ImageU8 img;
  img.height = height;
  img.width = width;
  img.channels = (src_channels >= 3) ? 3 : 1;
  img.pixels.resize(static_cast<std::size_t>(height) * width * img.channels);
  const std::size_t n = static_cast<std::size_t>(height) * width;
  for (std::size_t j = 0; j < n; ++j)
    for (int ci = 0; ci < img.channels; ++ci)
      img.pixels[j * static_cast<std::size_t>(img.channels) + static_cast<std::size_t>(ci)] =
          flat[j * static_cast<std::size_t>(src_channels) + static_cast<std::size_t>(ci)];
  return img;
}

inline std::vector<std::uint8_t> encode_pnm(const ImageU8& img) {
  COSIM_CHECK_ARG(img.channels == 1 || img.channels == 3,
                  "encode_pnm: channels must be 1 or 3, got ", img.channels);
  std::string header = std::string(img.channels == 1 ? "P5" : "P6") + "\n" +
                       std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

inline ImageU8 decode_pnm(const std::vector<std::uint8_t>& bytes, const std::string& origin) {
  COSIM_CHECK_DATA(bytes.size() > 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6'),
                   "decode_pnm: '", origin, "' is not a binary PGM/PPM file");
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  auto next_int = [&]() -> int {
    // Skip whitespace and '#' comments between header fields.
    for (;;) {
      COSIM_CHECK_DATA(pos < bytes.size(), "decode_pnm: truncated header in '", origin, "'");
      if (std::isspace(bytes[pos])) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    int v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos] - '0');
      ++pos;
      any = true;
    }
    COSIM_CHECK_DATA(any, "decode_pnm: malformed header in '", origin, "'");
    return v;
  };
  ImageU8 img;
  img.channels = channels;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  COSIM_CHECK_DATA(maxval == 255, "decode_pnm: '", origin, "' maxval must be 255, got ", maxval);
  COSIM_CHECK_DATA(pos < bytes.size() && std::isspace(bytes[pos]), "decode_pnm: bad header end");
  ++pos;
  const std::size_t need =
      static_cast<std::size_t>(img.width) * img.height * static_cast<std::size_t>(channels);
  COSIM_CHECK_DATA(bytes.size() - pos >= need, "decode_pnm: '", origin, "' pixel data truncated");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return img;
}

}  // namespace imgio

inline void save_image(const std::string& path, const ImageU8& img) {
  std::vector<std::uint8_t> bytes;
  if (path.size() >= 4 && (path.substr(path.size() - 4) == ".pgm" ||
                           path.substr(path.size() - 4) == ".ppm"))
    bytes = imgio::encode_pnm(img);
  else
    bytes = imgio::encode_png(img);
  std::ofstream out(path, std::ios::binary);
  COSIM_CHECK_DATA(out.good(), "save_image: cannot open '", path, "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  COSIM_CHECK_DATA(out.good(), "save_image: write failed for '", path, "'");
}

inline ImageU8 load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  COSIM_CHECK_DATA(in.good(), "load_image: cannot open '", path, "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  COSIM_CHECK_DATA(!bytes.empty(), "load_image: '", path, "' is empty");
  if (bytes.size() > 8 && std::memcmp(bytes.data(), imgio::kPngSignature, 8) == 0)
    return imgio::decode_png(bytes, path);
  if (bytes[0] == 'P') return imgio::decode_pnm(bytes, path);
  throw data_error(detail::cat("load_image: '", path, "' is neither PNG nor binary PGM/PPM"));
}

}  // namespace cosim

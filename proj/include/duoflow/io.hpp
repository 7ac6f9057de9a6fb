#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "duoflow/image.hpp"

namespace duoflow {

inline std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return bytes;
}

namespace detail {

struct PngMemReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos;
};

inline void png_mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* ctx = static_cast<PngMemReader*>(png_get_io_ptr(png));
  if (ctx->pos + n > ctx->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, ctx->data + ctx->pos, n);
  ctx->pos += n;
}

inline double from_code(unsigned int code, unsigned int max_code) {
  return static_cast<double>(code) / max_code;
}

inline unsigned int to_code(double v, unsigned int max_code) {
  const double scaled = std::clamp(v, 0.0, 1.0) * max_code;
  return static_cast<unsigned int>(std::lround(scaled));
}

}  // namespace detail

/// Decode an 8- or 16-bit grayscale/RGB PNG from memory into [0,1] values.
inline Image decode_png(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw std::runtime_error("not a PNG file");

  detail::PngMemReader reader{bytes.data(), bytes.size(), 0};
  std::vector<unsigned char> raw;
  std::vector<png_bytep> rows;
  Image img;

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("corrupt PNG file");
  }
  png_set_read_fn(png, &reader, detail::png_mem_read);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if ((bit_depth != 8 && bit_depth != 16) ||
      (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG bit depth or colorspace");
  }
  const int channels = color_type == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raw.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img = Image(static_cast<int>(h), static_cast<int>(w), channels);
  const unsigned int max_code = bit_depth == 8 ? 255u : 65535u;
  for (png_uint_32 y = 0; y < h; ++y) {
    const unsigned char* row = raw.data() + y * rowbytes;
    for (png_uint_32 x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        unsigned int code;
        if (bit_depth == 8) {
          code = row[x * channels + c];
        } else {  // PNG stores 16-bit samples big-endian
          const unsigned char* p = row + 2 * (x * channels + c);
          code = (static_cast<unsigned int>(p[0]) << 8) | p[1];
        }
        img.at(static_cast<int>(y), static_cast<int>(x), c) =
            detail::from_code(code, max_code);
      }
    }
  }
  return img;
}

inline std::vector<unsigned char> encode_png(const Image& img, int bit_depth) {
  require(bit_depth == 8 || bit_depth == 16, "encode_png: bad bit depth");
  const int color_type =
      img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  const std::size_t rowbytes =
      static_cast<std::size_t>(img.width) * img.channels * (bit_depth / 8);
  std::vector<unsigned char> raw(rowbytes * img.height);
  const unsigned int max_code = bit_depth == 8 ? 255u : 65535u;
  for (int y = 0; y < img.height; ++y) {
    unsigned char* row = raw.data() + y * rowbytes;
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const unsigned int code = detail::to_code(img.at(y, x, c), max_code);
        if (bit_depth == 8) {
          row[x * img.channels + c] = static_cast<unsigned char>(code);
        } else {
          unsigned char* p = row + 2 * (x * img.channels + c);
          p[0] = static_cast<unsigned char>(code >> 8);
          p[1] = static_cast<unsigned char>(code & 0xff);
        }
      }
    }
  }

  std::vector<unsigned char> out;
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = raw.data() + y * rowbytes;

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("PNG encode failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* buf = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, img.width, img.height, bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

namespace detail {

inline Image decode_pnm(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) &&
           bytes[pos] != '#') {
      tok.push_back(static_cast<char>(bytes[pos++]));
    }
    if (tok.empty()) throw std::runtime_error("truncated PNM header");
    return tok;
  };

  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6")
    throw std::runtime_error("unsupported PNM magic: " + magic);
  const int channels = magic == "P5" ? 1 : 3;
  const int w = std::stoi(next_token());
  const int h = std::stoi(next_token());
  const long maxval = std::stol(next_token());
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535)
    throw std::runtime_error("bad PNM header");
  ++pos;  // single whitespace after maxval
  const int bytes_per = maxval > 255 ? 2 : 1;
  const std::size_t payload =
      static_cast<std::size_t>(w) * h * channels * bytes_per;
  if (pos + payload > bytes.size())
    throw std::runtime_error("truncated PNM payload");

  Image img(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        unsigned int code;
        if (bytes_per == 1) {
          code = bytes[pos++];
        } else {  // 16-bit PNM samples are big-endian
          code = (static_cast<unsigned int>(bytes[pos]) << 8) | bytes[pos + 1];
          pos += 2;
        }
        img.at(y, x, c) = from_code(code, static_cast<unsigned int>(maxval));
      }
    }
  }
  return img;
}

inline std::vector<unsigned char> encode_pnm(const Image& img, int bit_depth) {
  const unsigned int max_code = bit_depth == 8 ? 255u : 65535u;
  std::string header = (img.channels == 1 ? "P5\n" : "P6\n") +
                       std::to_string(img.width) + " " +
                       std::to_string(img.height) + "\n" +
                       std::to_string(max_code) + "\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        const unsigned int code = to_code(img.at(y, x, c), max_code);
        if (bit_depth == 8) {
          out.push_back(static_cast<unsigned char>(code));
        } else {
          out.push_back(static_cast<unsigned char>(code >> 8));
          out.push_back(static_cast<unsigned char>(code & 0xff));
        }
      }
    }
  }
  return out;
}

inline bool has_suffix(const std::string& s, const std::string& suf) {
  return s.size() >= suf.size() &&
         s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace detail

/// Read a PNG or binary PGM/PPM image; the format is sniffed from the bytes.
/// Values are mapped to [0,1] by dividing by the format's max code value.
inline Image read_image(const std::string& path) {
  const std::vector<unsigned char> bytes = read_file_bytes(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' &&
      (bytes[1] == '5' || bytes[1] == '6')) {
    return detail::decode_pnm(bytes);
  }
  return decode_png(bytes);
}

/// Write PNG (.png) or binary PNM (.pgm/.ppm) chosen by extension.
/// Writing inverts read exactly for values on the code lattice.
inline void write_image(const Image& img, const std::string& path,
                        int bit_depth = 16) {
  std::vector<unsigned char> bytes;
  if (detail::has_suffix(path, ".png")) {
    bytes = encode_png(img, bit_depth);
  } else if (detail::has_suffix(path, ".pgm")) {
    require(img.channels == 1, "write_image: .pgm requires 1 channel");
    bytes = detail::encode_pnm(img, bit_depth);
  } else if (detail::has_suffix(path, ".ppm")) {
    require(img.channels == 3, "write_image: .ppm requires 3 channels");
    bytes = detail::encode_pnm(img, bit_depth);
  } else {
    throw std::runtime_error("write_image: unsupported extension: " + path);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

// Middlebury .flo interchange: little-endian float 202021.25 ("PIEH"),
// int32 width, int32 height, then interleaved (u, v) float32 row-major.
inline constexpr float kFloMagic = 202021.25f;

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "flo I/O assumes a little-endian host");

template <typename T>
inline T read_pod(const std::vector<unsigned char>& b, std::size_t& pos) {
  if (pos + sizeof(T) > b.size()) throw std::runtime_error("truncated .flo");
  T v;
  std::memcpy(&v, b.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

template <typename T>
inline void append_pod(std::vector<unsigned char>& b, T v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  b.insert(b.end(), p, p + sizeof(T));
}

}  // namespace detail

inline FlowField decode_flo(const std::vector<unsigned char>& bytes) {
  std::size_t pos = 0;
  const float magic = detail::read_pod<float>(bytes, pos);
  if (magic != kFloMagic) throw std::runtime_error(".flo: bad magic number");
  const std::int32_t w = detail::read_pod<std::int32_t>(bytes, pos);
  const std::int32_t h = detail::read_pod<std::int32_t>(bytes, pos);
  if (w < 1 || h < 1) throw std::runtime_error(".flo: bad dimensions");
  const std::size_t payload =
      static_cast<std::size_t>(w) * h * 2 * sizeof(float);
  if (bytes.size() - pos != payload)
    throw std::runtime_error(".flo: size mismatch vs payload length");
  FlowField flow(h, w);
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    flow.u[i] = detail::read_pod<float>(bytes, pos);
    flow.v[i] = detail::read_pod<float>(bytes, pos);
  }
  return flow;
}

inline std::vector<unsigned char> encode_flo(const FlowField& flow) {
  std::vector<unsigned char> out;
  out.reserve(12 + flow.u.size() * 8);
  detail::append_pod(out, kFloMagic);
  detail::append_pod(out, static_cast<std::int32_t>(flow.width));
  detail::append_pod(out, static_cast<std::int32_t>(flow.height));
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    detail::append_pod(out, static_cast<float>(flow.u[i]));
    detail::append_pod(out, static_cast<float>(flow.v[i]));
  }
  return out;
}

inline FlowField read_flo(const std::string& path) {
  return decode_flo(read_file_bytes(path));
}

inline void write_flo(const FlowField& flow, const std::string& path) {
  const std::vector<unsigned char> bytes = encode_flo(flow);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

namespace detail {

// 55-bin Middlebury color wheel, RGB in [0,1].
inline const std::vector<std::array<double, 3>>& color_wheel() {
  static const std::vector<std::array<double, 3>> wheel = [] {
    const int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
    std::vector<std::array<double, 3>> w;
    w.reserve(RY + YG + GC + CB + BM + MR);
    for (int i = 0; i < RY; ++i)
      w.push_back({1.0, static_cast<double>(i) / RY, 0.0});
    for (int i = 0; i < YG; ++i)
      w.push_back({1.0 - static_cast<double>(i) / YG, 1.0, 0.0});
    for (int i = 0; i < GC; ++i)
      w.push_back({0.0, 1.0, static_cast<double>(i) / GC});
    for (int i = 0; i < CB; ++i)
      w.push_back({0.0, 1.0 - static_cast<double>(i) / CB, 1.0});
    for (int i = 0; i < BM; ++i)
      w.push_back({static_cast<double>(i) / BM, 0.0, 1.0});
    for (int i = 0; i < MR; ++i)
      w.push_back({1.0, 0.0, 1.0 - static_cast<double>(i) / MR});
    return w;
  }();
  return wheel;
}

}  // namespace detail

/// Middlebury color coding: hue encodes direction, saturation encodes
/// magnitude relative to max_mag (auto: 99th percentile). Zero flow is white.
inline Image flow_to_color(const FlowField& flow,
                           std::optional<double> max_mag = std::nullopt) {
  double scale;
  if (max_mag.has_value()) {
    scale = std::max(*max_mag, 1e-9);
  } else {
    std::vector<double> mags(flow.u.size());
    for (std::size_t i = 0; i < flow.u.size(); ++i)
      mags[i] = std::hypot(flow.u[i], flow.v[i]);
    std::sort(mags.begin(), mags.end());
    const std::size_t q =
        static_cast<std::size_t>(0.99 * (mags.size() - 1));
    scale = std::max(mags.empty() ? 0.0 : mags[q], 1e-9);
  }

  const auto& wheel = detail::color_wheel();
  const int ncols = static_cast<int>(wheel.size());
  Image out(flow.height, flow.width, 3);
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      const std::size_t i = flow.idx(y, x);
      const double fx = flow.u[i] / scale;
      const double fy = flow.v[i] / scale;
      const double rad = std::hypot(fx, fy);
      const double a = std::atan2(-fy, -fx) / M_PI;  // in [-1, 1]
      const double fk = (a + 1.0) / 2.0 * (ncols - 1);
      int k0 = static_cast<int>(std::floor(fk));
      const double f = fk - k0;
      k0 = std::clamp(k0, 0, ncols - 1);
      const int k1 = (k0 + 1) % ncols;
      for (int c = 0; c < 3; ++c) {
        double col = (1.0 - f) * wheel[k0][c] + f * wheel[k1][c];
        if (rad <= 1.0)
          col = 1.0 - rad * (1.0 - col);
        else
          col *= 0.75;
        out.at(y, x, c) = col;
      }
    }
  }
  return out;
}

}  // namespace duoflow

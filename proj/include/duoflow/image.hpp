#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace duoflow {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

/// Dense H x W x C brightness field, values conceptually in [0, 1].
/// Layout is row-major with channels innermost: (y * width + x) * channels + c.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    require(h >= 1 && w >= 1 && (c == 1 || c == 3), "Image: bad dimensions");
  }

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Per-pixel displacement field in pixels. u is horizontal, v vertical.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<double> u;
  std::vector<double> v;

  FlowField() = default;
  FlowField(int h, int w, double du = 0.0, double dv = 0.0)
      : height(h), width(w),
        u(static_cast<std::size_t>(h) * w, du),
        v(static_cast<std::size_t>(h) * w, dv) {}

  std::size_t idx(int y, int x) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  bool same_shape(const FlowField& o) const {
    return height == o.height && width == o.width;
  }
  std::size_t size() const { return u.size(); }
};

/// Per-pixel validity flags (1 = valid). Shared by warps and data terms.
struct PixelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> valid;

  PixelMask() = default;
  PixelMask(int h, int w, bool all_valid = true)
      : height(h), width(w),
        valid(static_cast<std::size_t>(h) * w, all_valid ? 1 : 0) {}

  bool at(int y, int x) const {
    return valid[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int y, int x, bool v) {
    valid[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count_valid() const {
    std::size_t n = 0;
    for (auto f : valid) n += f;
    return n;
  }
};

struct ComposeResult {
  Image image;
  bool clipped = false;
};

/// Pixel-wise layer sum clamped to [0, 1]. Reports whether any pixel clipped.
inline ComposeResult compose(const Image& l1, const Image& l2) {
  require(l1.same_shape(l2), "compose: layer shape mismatch");
  ComposeResult out;
  out.image = Image(l1.height, l1.width, l1.channels);
  for (std::size_t i = 0; i < l1.data.size(); ++i) {
    double s = l1.data[i] + l2.data[i];
    if (s < 0.0) {
      s = 0.0;
      out.clipped = true;
    } else if (s > 1.0) {
      s = 1.0;
      out.clipped = true;
    }
    out.image.data[i] = s;
  }
  return out;
}

namespace detail {

// Bilinear sample at real coordinates (sx, sy). Caller guarantees the point
// lies inside [0, W-1] x [0, H-1].
inline void bilinear_weights(double s, int size, int& i0, double& frac) {
  i0 = static_cast<int>(std::floor(s));
  frac = s - i0;
  if (i0 >= size - 1) {  // s == size-1 exactly
    i0 = size - 2;
    frac = s - i0;
  }
  if (i0 < 0) {  // s == 0 with negative rounding noise is excluded by caller
    i0 = 0;
    frac = 0.0;
  }
}

inline double sample_bilinear(const Image& img, double sx, double sy, int c) {
  int x0, y0;
  double fx, fy;
  bilinear_weights(sx, img.width, x0, fx);
  bilinear_weights(sy, img.height, y0, fy);
  const double a = img.at(y0, x0, c);
  const double b = img.at(y0, x0 + 1, c);
  const double d = img.at(y0 + 1, x0, c);
  const double e = img.at(y0 + 1, x0 + 1, c);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
}

// Clamped bilinear sample; coordinates outside the rectangle are clamped to
// the border. Used where a mask is not wanted (resampling, masters).
inline double sample_bilinear_clamped(const Image& img, double sx, double sy,
                                      int c) {
  sx = std::clamp(sx, 0.0, static_cast<double>(img.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(img.height - 1));
  return sample_bilinear(img, sx, sy, c);
}

}  // namespace detail

struct WarpResult {
  Image image;
  PixelMask mask;
};

/// Backward warp: output(x) = img(x + flow(x)) by bilinear interpolation.
/// Pixels whose sample point leaves the image rectangle are masked invalid
/// (their output value is 0) and must be excluded from data terms.
inline WarpResult warp_backward(const Image& img, const FlowField& flow) {
  require(img.height == flow.height && img.width == flow.width,
          "warp_backward: image/flow shape mismatch");
  WarpResult out;
  out.image = Image(img.height, img.width, img.channels);
  out.mask = PixelMask(img.height, img.width, true);
  const double xmax = img.width - 1;
  const double ymax = img.height - 1;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t i = flow.idx(y, x);
      const double sx = x + flow.u[i];
      const double sy = y + flow.v[i];
      if (sx < 0.0 || sx > xmax || sy < 0.0 || sy > ymax ||
          !std::isfinite(sx) || !std::isfinite(sy)) {
        out.mask.set(y, x, false);
        continue;
      }
      for (int c = 0; c < img.channels; ++c) {
        out.image.at(y, x, c) = detail::sample_bilinear(img, sx, sy, c);
      }
    }
  }
  return out;
}

struct GradientPair {
  Image gx;  // forward difference along x, zero in the last column
  Image gy;  // forward difference along y, zero in the last row
};

/// Forward-difference spatial gradient with zero (Neumann) boundary.
inline GradientPair spatial_gradient(const Image& img) {
  GradientPair g{Image(img.height, img.width, img.channels),
                 Image(img.height, img.width, img.channels)};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        if (x + 1 < img.width)
          g.gx.at(y, x, c) = img.at(y, x + 1, c) - img.at(y, x, c);
        if (y + 1 < img.height)
          g.gy.at(y, x, c) = img.at(y + 1, x, c) - img.at(y, x, c);
      }
    }
  }
  return g;
}

/// Separable Gaussian blur with replicate boundary. sigma <= 0 is a no-op.
inline Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    sum += kernel[k + radius];
  }
  for (auto& w : kernel) w /= sum;

  Image tmp(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xs = std::clamp(x + k, 0, img.width - 1);
          acc += kernel[k + radius] * img.at(y, xs, c);
        }
        tmp.at(y, x, c) = acc;
      }
    }
  }
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int ys = std::clamp(y + k, 0, img.height - 1);
          acc += kernel[k + radius] * tmp.at(ys, x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

/// Bilinear resample to (new_h, new_w) with pixel-center alignment.
inline Image resize_bilinear(const Image& img, int new_h, int new_w) {
  require(new_h >= 1 && new_w >= 1, "resize_bilinear: bad target size");
  if (new_h == img.height && new_w == img.width) return img;
  Image out(new_h, new_w, img.channels);
  const double sy = static_cast<double>(img.height) / new_h;
  const double sx = static_cast<double>(img.width) / new_w;
  for (int y = 0; y < new_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < new_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      for (int c = 0; c < img.channels; ++c) {
        out.at(y, x, c) = detail::sample_bilinear_clamped(img, src_x, src_y, c);
      }
    }
  }
  return out;
}

}  // namespace duoflow

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "duoflow/energy.hpp"
#include "duoflow/image.hpp"
#include "duoflow/io.hpp"

namespace duoflow {

/// A synthetic instance with exact layers and flows.
struct GroundTruthBundle {
  std::string name;
  Image i0, i1;
  LayerDecomposition dec;
  FlowField gt_u, gt_v;
  Mode mode = Mode::kStaticForeground;
  std::uint64_t seed = 0;
};

struct FlowSpec {
  enum Kind { kConstant, kAffine, kSmoothRandom };
  Kind kind = kConstant;
  double dx = 0.0, dy = 0.0;                      // kConstant
  double a[6] = {0, 0, 0, 0, 0, 0};               // kAffine: u=a0+a1*x+a2*y, v=a3+a4*x+a5*y
  double amplitude = 0.0, smoothness = 4.0;       // kSmoothRandom
  std::uint64_t seed = 0;

  static FlowSpec constant(double dx, double dy) {
    FlowSpec s;
    s.kind = kConstant;
    s.dx = dx;
    s.dy = dy;
    return s;
  }
  static FlowSpec affine(const double (&params)[6]) {
    FlowSpec s;
    s.kind = kAffine;
    for (int i = 0; i < 6; ++i) s.a[i] = params[i];
    return s;
  }
  static FlowSpec smooth_random(double amplitude, double smoothness,
                                std::uint64_t seed) {
    FlowSpec s;
    s.kind = kSmoothRandom;
    s.amplitude = amplitude;
    s.smoothness = smoothness;
    s.seed = seed;
    return s;
  }
};

namespace detail {

inline double max_flow_magnitude(const FlowField& f) {
  double m = 0.0;
  for (std::size_t i = 0; i < f.u.size(); ++i)
    m = std::max(m, std::hypot(f.u[i], f.v[i]));
  return m;
}

inline void blur_field(std::vector<double>& f, int h, int w, double sigma) {
  Image tmp(h, w, 1);
  tmp.data = f;
  f = gaussian_blur(tmp, sigma).data;
}

}  // namespace detail

/// Ground-truth motion generator. SmoothRandom is a Gaussian-smoothed random
/// field scaled to the requested maximum magnitude.
inline FlowField make_flow(const FlowSpec& spec, int h, int w) {
  FlowField f(h, w);
  switch (spec.kind) {
    case FlowSpec::kConstant:
      for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = spec.dx;
        f.v[i] = spec.dy;
      }
      break;
    case FlowSpec::kAffine:
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t i = f.idx(y, x);
          f.u[i] = spec.a[0] + spec.a[1] * x + spec.a[2] * y;
          f.v[i] = spec.a[3] + spec.a[4] * x + spec.a[5] * y;
        }
      break;
    case FlowSpec::kSmoothRandom: {
      std::mt19937 rng(static_cast<std::uint32_t>(spec.seed * 2654435761u + 1));
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] = gauss(rng);
        f.v[i] = gauss(rng);
      }
      detail::blur_field(f.u, h, w, spec.smoothness);
      detail::blur_field(f.v, h, w, spec.smoothness);
      const double m = detail::max_flow_magnitude(f);
      const double scale = m > 0.0 ? spec.amplitude / m : 0.0;
      for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] *= scale;
        f.v[i] *= scale;
      }
      break;
    }
  }
  const double max_mag = detail::max_flow_magnitude(f);
  require(max_mag <= std::min(h, w) / 4.0,
          "make_flow: flow amplitude exceeds a quarter of the image size");
  return f;
}

namespace detail {

inline double catmull_rom_weight(double t) {
  t = std::abs(t);
  if (t < 1.0) return 1.0 + t * t * (1.5 * t - 2.5);
  if (t < 2.0) return 2.0 - t * (4.0 - t * (2.5 - 0.5 * t));
  return 0.0;
}

inline double sample_catmull_rom(const Image& img, double sx, double sy,
                                 int c) {
  const int x1 = static_cast<int>(std::floor(sx));
  const int y1 = static_cast<int>(std::floor(sy));
  double acc = 0.0;
  for (int j = -1; j <= 2; ++j) {
    const int yy = std::clamp(y1 + j, 0, img.height - 1);
    const double wy = catmull_rom_weight(sy - (y1 + j));
    for (int i = -1; i <= 2; ++i) {
      const int xx = std::clamp(x1 + i, 0, img.width - 1);
      acc += wy * catmull_rom_weight(sx - (x1 + i)) * img.at(yy, xx, c);
    }
  }
  return acc;
}

// Align-corners 4x supersampled master: master lattice point 4k coincides
// with base pixel k exactly, so integer ground-truth flows resample the
// base values bit-for-bit.
inline Image build_master(const Image& base) {
  const int mh = 4 * (base.height - 1) + 1;
  const int mw = 4 * (base.width - 1) + 1;
  Image master(mh, mw, base.channels);
  for (int y = 0; y < mh; ++y) {
    for (int x = 0; x < mw; ++x) {
      for (int c = 0; c < base.channels; ++c) {
        if (y % 4 == 0 && x % 4 == 0) {
          master.at(y, x, c) = base.at(y / 4, x / 4, c);
        } else {
          master.at(y, x, c) = sample_catmull_rom(base, x / 4.0, y / 4.0, c);
        }
      }
    }
  }
  return master;
}

inline void sample_flow_clamped(const FlowField& f, double sx, double sy,
                                double& fu, double& fv) {
  sx = std::clamp(sx, 0.0, static_cast<double>(f.width - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(f.height - 1));
  int x0, y0;
  double fx, fy;
  bilinear_weights(sx, f.width, x0, fx);
  bilinear_weights(sy, f.height, y0, fy);
  auto lerp = [&](const std::vector<double>& d) {
    const double a = d[f.idx(y0, x0)], b = d[f.idx(y0, x0 + 1)];
    const double c = d[f.idx(y0 + 1, x0)], e = d[f.idx(y0 + 1, x0 + 1)];
    return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * e);
  };
  fu = lerp(f.u);
  fv = lerp(f.v);
}

// Second-frame layer from the first-frame layer and its flow: solve
// y + flow(y) = z by fixed point, then resample the supersampled master at
// y so that layer0(x) == layer1(x + flow(x)) holds to interpolation accuracy
// (exactly for integer flows).
inline Image inverse_warp_layer(const Image& layer0, const FlowField& flow,
                                double clamp_lo, double clamp_hi) {
  const Image master = build_master(layer0);
  Image out(layer0.height, layer0.width, layer0.channels);
  for (int zy = 0; zy < layer0.height; ++zy) {
    for (int zx = 0; zx < layer0.width; ++zx) {
      double yx = zx, yy = zy;
      for (int it = 0; it < 12; ++it) {
        double fu, fv;
        sample_flow_clamped(flow, yx, yy, fu, fv);
        yx = zx - fu;
        yy = zy - fv;
      }
      const double mx = std::clamp(4.0 * yx, 0.0, master.width - 1.0);
      const double my = std::clamp(4.0 * yy, 0.0, master.height - 1.0);
      for (int c = 0; c < layer0.channels; ++c) {
        out.at(zy, zx, c) = std::clamp(sample_bilinear(master, mx, my, c),
                                       clamp_lo, clamp_hi);
      }
    }
  }
  return out;
}

}  // namespace detail

/// Build a ground-truth bundle from first-frame layers and flows: the frames
/// satisfy the double-layer brightness constancy by construction. The caller
/// must pre-scale l2 below c and l1 + l2 below 1 so composition never clips.
inline GroundTruthBundle render_pair(const Image& l1, const Image& l2,
                                     const FlowField& gt_u,
                                     const FlowField& gt_v, Mode mode,
                                     double c) {
  require(l1.same_shape(l2), "render_pair: layer shape mismatch");
  require(l1.height == gt_u.height && l1.width == gt_u.width &&
              gt_u.same_shape(gt_v),
          "render_pair: flow shape mismatch");
  for (std::size_t i = 0; i < l2.data.size(); ++i) {
    require(l2.data[i] >= 0.0 && l2.data[i] <= c,
            "render_pair: l2 violates the [0, c] bound");
    require(l1.data[i] >= 0.0 && l1.data[i] + l2.data[i] <= 1.0,
            "render_pair: l1 + l2 exceeds 1");
  }

  GroundTruthBundle b;
  b.mode = mode;
  b.gt_u = gt_u;
  b.dec.c = c;
  b.dec.l1 = l1;
  b.dec.l2 = l2;
  b.dec.l1p = detail::inverse_warp_layer(l1, gt_u, 0.0, 1.0);
  if (mode == Mode::kStaticForeground) {
    b.gt_v = FlowField(l1.height, l1.width);
    b.dec.l2p = l2;
  } else {
    b.gt_v = gt_v;
    b.dec.l2p = detail::inverse_warp_layer(l2, gt_v, 0.0, c);
  }
  ComposeResult c0 = compose(b.dec.l1, b.dec.l2);
  ComposeResult c1 = compose(b.dec.l1p, b.dec.l2p);
  require(!c0.clipped && !c1.clipped, "render_pair: composition clipped");
  b.i0 = std::move(c0.image);
  b.i1 = std::move(c1.image);
  return b;
}

namespace detail {

// Smooth textured background in [lo, hi]: blurred white noise, affinely
// normalized. Channels get a shared base plus a small decorrelated part.
inline Image noise_background(int h, int w, int channels, double lo, double hi,
                              std::mt19937& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Image base(h, w, 1);
  for (auto& v : base.data) v = gauss(rng);
  base = gaussian_blur(base, 2.0);
  Image img(h, w, channels);
  for (int c = 0; c < channels; ++c) {
    Image extra(h, w, 1);
    if (channels > 1) {
      for (auto& v : extra.data) v = gauss(rng);
      extra = gaussian_blur(extra, 2.0);
    }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(y, x, c) =
            base.at(y, x, 0) + (channels > 1 ? 0.3 * extra.at(y, x, 0) : 0.0);
  }
  double mn = img.data[0], mx = img.data[0];
  for (double v : img.data) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  const double scale = mx > mn ? (hi - lo) / (mx - mn) : 0.0;
  for (auto& v : img.data) v = lo + (v - mn) * scale;
  return img;
}

// Rain-like foreground: a few soft streak segments on a zero background.
// Values below 1e-4 are truncated to exactly zero, which keeps the gradient
// field genuinely sparse.
inline Image rain_streaks(int h, int w, int channels, double amplitude,
                          int count, std::mt19937& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  struct Streak {
    double cx, cy, dirx, diry, half_len, sigma, amp;
  };
  std::vector<Streak> streaks(count);
  for (Streak& s : streaks) {
    s.cx = uni(rng) * (w - 1);
    s.cy = uni(rng) * (h - 1);
    const double angle =
        M_PI / 2.0 + (uni(rng) - 0.5) * (M_PI / 4.0);  // mostly vertical
    s.dirx = std::cos(angle);
    s.diry = std::sin(angle);
    s.half_len = (0.08 + 0.12 * uni(rng)) * std::min(h, w);
    s.sigma = 0.9 + 0.4 * uni(rng);
    s.amp = 0.45 + 0.55 * uni(rng);
  }
  Image img(h, w, channels);
  double peak = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const Streak& s : streaks) {
        const double rx = x - s.cx, ry = y - s.cy;
        const double along = rx * s.dirx + ry * s.diry;
        const double perp = -rx * s.diry + ry * s.dirx;
        const double over = std::max(0.0, std::abs(along) - s.half_len);
        const double g = s.amp * std::exp(-0.5 * (perp * perp) /
                                          (s.sigma * s.sigma)) *
                         std::exp(-0.5 * (over * over) /
                                  (4.0 * s.sigma * s.sigma));
        if (g > 1e-4) v += g;
      }
      for (int c = 0; c < channels; ++c) img.at(y, x, c) = v;
      peak = std::max(peak, v);
    }
  }
  if (peak > 0.0) {
    const double scale = amplitude / peak;
    for (auto& v : img.data) v *= scale;
  }
  return img;
}

}  // namespace detail

/// Fixed catalog of synthetic instances: 10 static and 5 dynamic, sizes
/// 64x64 to 128x128, single- and 3-channel, textured backgrounds with sparse
/// rain-like foregrounds.
inline std::vector<GroundTruthBundle> standard_suite(std::uint64_t seed,
                                                     int override_h = 0,
                                                     int override_w = 0) {
  const double c = 0.25;
  const double fg_amp = 0.8 * c;
  std::vector<GroundTruthBundle> out;

  struct Item {
    int size;
    int channels;
    int streaks;
    bool dynamic;
  };
  const Item items[] = {
      {64, 1, 5, false},  {64, 1, 6, false}, {64, 3, 5, false},
      {64, 1, 4, false},  {64, 3, 6, false}, {64, 1, 5, false},
      {96, 1, 7, false},  {96, 3, 6, false}, {128, 1, 8, false},
      {128, 3, 8, false}, {64, 1, 5, true},  {64, 1, 6, true},
      {64, 3, 5, true},   {64, 1, 4, true},  {96, 3, 6, true},
  };

  int static_id = 0, dynamic_id = 0;
  for (std::size_t k = 0; k < std::size(items); ++k) {
    const Item& it = items[k];
    const std::uint64_t inst_seed = seed * 1000 + k;
    std::mt19937 rng(static_cast<std::uint32_t>(inst_seed * 48271u + 11));
    const int h = override_h > 0 ? override_h : it.size;
    const int w = override_w > 0 ? override_w : it.size;

    const Image bg =
        detail::noise_background(h, w, it.channels, 0.18, 0.70, rng);
    const Image fg =
        detail::rain_streaks(h, w, it.channels, fg_amp, it.streaks, rng);

    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double amp_u = 1.5 + 1.5 * uni(rng);
    const FlowField gt_u = make_flow(
        FlowSpec::smooth_random(amp_u, std::min(h, w) / 8.0, inst_seed * 7 + 1),
        h, w);
    FlowField gt_v(h, w);
    Mode mode = Mode::kStaticForeground;
    std::string name;
    if (it.dynamic) {
      mode = Mode::kDynamicForeground;
      // Foreground motion roughly opposite the background's dominant one.
      const double amp_v = 1.0 + 1.0 * uni(rng);
      if (k % 2 == 0) {
        gt_v = make_flow(FlowSpec::constant(-amp_v, 0.6 * amp_v), h, w);
      } else {
        gt_v = make_flow(FlowSpec::smooth_random(
                             amp_v, std::min(h, w) / 6.0, inst_seed * 13 + 5),
                         h, w);
      }
      name = "dynamic_" + std::to_string(dynamic_id++);
    } else {
      name = "static_" + std::to_string(static_id++);
    }

    GroundTruthBundle b = render_pair(bg, fg, gt_u, gt_v, mode, c);
    b.name = name;
    b.seed = inst_seed;
    out.push_back(std::move(b));
  }
  return out;
}

/// Directory layout: I.png, Iprime.png, L1.png, L1p.png, L2.png, L2p.png,
/// U.flo, V.flo, meta.json (mode, c, seed). Images are 16-bit PNG.
inline void save_bundle(const GroundTruthBundle& b, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_image(b.i0, dir + "/I.png", 16);
  write_image(b.i1, dir + "/Iprime.png", 16);
  write_image(b.dec.l1, dir + "/L1.png", 16);
  write_image(b.dec.l1p, dir + "/L1p.png", 16);
  write_image(b.dec.l2, dir + "/L2.png", 16);
  write_image(b.dec.l2p, dir + "/L2p.png", 16);
  write_flo(b.gt_u, dir + "/U.flo");
  write_flo(b.gt_v, dir + "/V.flo");
  nlohmann::json meta;
  meta["mode"] = b.mode == Mode::kStaticForeground ? "static" : "dynamic";
  meta["c"] = b.dec.c;
  meta["seed"] = b.seed;
  std::ofstream out(dir + "/meta.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/meta.json");
  out << meta.dump(2) << "\n";
}

inline GroundTruthBundle load_bundle(const std::string& dir) {
  GroundTruthBundle b;
  b.i0 = read_image(dir + "/I.png");
  b.i1 = read_image(dir + "/Iprime.png");
  b.dec.l1 = read_image(dir + "/L1.png");
  b.dec.l1p = read_image(dir + "/L1p.png");
  b.dec.l2 = read_image(dir + "/L2.png");
  b.dec.l2p = read_image(dir + "/L2p.png");
  b.gt_u = read_flo(dir + "/U.flo");
  b.gt_v = read_flo(dir + "/V.flo");
  std::ifstream in(dir + "/meta.json");
  if (!in) throw std::runtime_error("cannot read " + dir + "/meta.json");
  nlohmann::json meta = nlohmann::json::parse(in);
  b.mode = meta.at("mode").get<std::string>() == "static"
               ? Mode::kStaticForeground
               : Mode::kDynamicForeground;
  b.dec.c = meta.at("c").get<double>();
  b.seed = meta.at("seed").get<std::uint64_t>();
  b.name = std::filesystem::path(dir).filename().string();
  return b;
}

}  // namespace duoflow

#pragma once

#include <cmath>
#include <optional>

#include "duoflow/image.hpp"

namespace duoflow {

/// Mean endpoint error over unmasked pixels.
inline double epe_mean(const FlowField& est, const FlowField& gt,
                       const PixelMask* mask = nullptr) {
  require(est.same_shape(gt), "epe_mean: shape mismatch");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < est.height; ++y) {
    for (int x = 0; x < est.width; ++x) {
      if (mask && !mask->at(y, x)) continue;
      const std::size_t i = est.idx(y, x);
      const double du = est.u[i] - gt.u[i];
      const double dv = est.v[i] - gt.v[i];
      sum += std::sqrt(du * du + dv * dv);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / n;
}

/// Layer recovery error 1 - NCC, with zero-mean normalized cross-correlation
/// computed globally over all pixels and channels. A constant layer has no
/// correlation structure; NCC is defined as 0 there (error 1).
inline double layer_error_ncc(const Image& gt_l2, const Image& est_l2) {
  require(gt_l2.same_shape(est_l2), "layer_error_ncc: shape mismatch");
  const std::size_t n = gt_l2.data.size();
  auto is_constant = [](const Image& img) {
    for (double v : img.data)
      if (v != img.data[0]) return false;
    return true;
  };
  if (is_constant(gt_l2) || is_constant(est_l2)) return 1.0;
  double mg = 0.0, me = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mg += gt_l2.data[i];
    me += est_l2.data[i];
  }
  mg /= n;
  me /= n;
  double cov = 0.0, vg = 0.0, ve = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = gt_l2.data[i] - mg;
    const double b = est_l2.data[i] - me;
    cov += a * b;
    vg += a * a;
    ve += b * b;
  }
  if (vg <= 0.0 || ve <= 0.0) return 1.0;
  return 1.0 - cov / std::sqrt(vg * ve);
}

/// Mean warping error in gray levels: ||l(x + flow(x)) - lp(x)||_2 per pixel
/// (Euclidean over channels), averaged over valid pixels and scaled by 255.
inline double warping_error(const Image& l, const Image& lp,
                            const FlowField& flow) {
  require(l.same_shape(lp), "warping_error: image shape mismatch");
  require(l.height == flow.height && l.width == flow.width,
          "warping_error: flow shape mismatch");
  const WarpResult warped = warp_backward(l, flow);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < l.height; ++y) {
    for (int x = 0; x < l.width; ++x) {
      if (!warped.mask.at(y, x)) continue;
      double d2 = 0.0;
      for (int c = 0; c < l.channels; ++c) {
        const double d = warped.image.at(y, x, c) - lp.at(y, x, c);
        d2 += d * d;
      }
      sum += std::sqrt(d2);
      ++n;
    }
  }
  return n == 0 ? 0.0 : 255.0 * sum / n;
}

}  // namespace duoflow

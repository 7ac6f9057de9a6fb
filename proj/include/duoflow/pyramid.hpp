#pragma once

#include <cmath>
#include <vector>

#include "duoflow/image.hpp"

namespace duoflow {

/// Coarse-to-fine image stack, levels[0] finest.
struct Pyramid {
  std::vector<Image> levels;
  double scale_factor = 0.5;
};

/// Gaussian-blur-then-subsample chain. Level l+1 dimensions are
/// ceil(level l dimensions * scale_factor); generation stops before either
/// dimension would drop below min_size.
inline Pyramid build_pyramid(const Image& img, double scale_factor = 0.5,
                             int min_size = 16) {
  require(scale_factor >= 0.5 && scale_factor <= 0.95,
          "build_pyramid: scale_factor outside [0.5, 0.95]");
  require(min_size >= 2, "build_pyramid: min_size must be >= 2");
  Pyramid pyr;
  pyr.scale_factor = scale_factor;
  pyr.levels.push_back(img);
  const double sigma = 1.0 / std::sqrt(2.0 * scale_factor);
  while (true) {
    const Image& cur = pyr.levels.back();
    const int nh = static_cast<int>(std::ceil(cur.height * scale_factor));
    const int nw = static_cast<int>(std::ceil(cur.width * scale_factor));
    if (nh < min_size || nw < min_size) break;
    pyr.levels.push_back(resize_bilinear(gaussian_blur(cur, sigma), nh, nw));
  }
  return pyr;
}

/// Resample a flow field to a new grid and rescale its displacement values
/// by the size ratio (flow vectors live in pixel units of their own grid).
inline FlowField rescale_flow(const FlowField& flow, int new_h, int new_w) {
  require(new_h >= 1 && new_w >= 1, "rescale_flow: bad target size");
  FlowField out(new_h, new_w);
  const double ru = static_cast<double>(new_w) / flow.width;
  const double rv = static_cast<double>(new_h) / flow.height;
  if (new_h == flow.height && new_w == flow.width) {
    out = flow;
    return out;
  }
  // Reuse the image resampler channel-by-channel.
  Image tmp(flow.height, flow.width, 1);
  tmp.data = flow.u;
  Image up = resize_bilinear(tmp, new_h, new_w);
  tmp.data = flow.v;
  Image vp = resize_bilinear(tmp, new_h, new_w);
  for (std::size_t i = 0; i < out.u.size(); ++i) {
    out.u[i] = up.data[i] * ru;
    out.v[i] = vp.data[i] * rv;
  }
  return out;
}

}  // namespace duoflow

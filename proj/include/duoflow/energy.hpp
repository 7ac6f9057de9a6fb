#pragma once

#include <cmath>
#include <cstddef>

#include "duoflow/field_ops.hpp"
#include "duoflow/image.hpp"

namespace duoflow {

enum class Mode {
  kStaticForeground,   // single flow U, L2' == L2, V == 0
  kDynamicForeground,  // two flows U, V and four independent layers
};

/// First/second order term weights of the TGV^2 measure.
struct TgvAlpha {
  double first_order = 1.0;   // weight on |grad p - w|
  double second_order = 2.0;  // weight on |sym grad w|
};

struct Weights {
  double lambda_l = 1.0;  // layer sparse-gradient prior
  double lambda_f = 0.1;  // flow smoothness prior
  int tgv_order = 1;      // 1 = TV, 2 = TGV^2
  TgvAlpha tgv_alpha{};
};

struct EnergyBreakdown {
  double e_b = 0.0;
  double e_l = 0.0;
  double e_f = 0.0;
  double total = 0.0;
};

/// The four layers tied to an input pair, plus the foreground bound c.
/// Valid decompositions satisfy l1 + l2 == I, l1p + l2p == I' and
/// 0 <= l2 <= min(I, c) element-wise (same for the primed pair).
struct LayerDecomposition {
  Image l1, l1p, l2, l2p;
  double c = 0.25;

  bool same_shape() const {
    return l1.same_shape(l1p) && l1.same_shape(l2) && l1.same_shape(l2p);
  }
};

/// Largest additive-constraint violation |l1 + l2 - I| over both frames.
inline double decomposition_residual(const LayerDecomposition& dec,
                                     const Image& frame0,
                                     const Image& frame1) {
  require(dec.same_shape() && dec.l1.same_shape(frame0) &&
              dec.l1.same_shape(frame1),
          "decomposition_residual: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < frame0.data.size(); ++i) {
    worst = std::max(worst,
                     std::abs(dec.l1.data[i] + dec.l2.data[i] - frame0.data[i]));
    worst = std::max(worst, std::abs(dec.l1p.data[i] + dec.l2p.data[i] -
                                     frame1.data[i]));
  }
  return worst;
}

/// Largest bound-constraint violation of 0 <= l2 <= min(frame, c).
inline double bound_violation(const LayerDecomposition& dec,
                              const Image& frame0, const Image& frame1) {
  double worst = 0.0;
  for (std::size_t i = 0; i < frame0.data.size(); ++i) {
    const double ub0 = std::min(frame0.data[i], dec.c);
    const double ub1 = std::min(frame1.data[i], dec.c);
    worst = std::max(worst, -dec.l2.data[i]);
    worst = std::max(worst, dec.l2.data[i] - ub0);
    worst = std::max(worst, -dec.l2p.data[i]);
    worst = std::max(worst, dec.l2p.data[i] - ub1);
  }
  return worst;
}

struct DataTermInfo {
  double value = 0.0;
  std::size_t masked_l1 = 0;  // pixels excluded from the first BCC term
  std::size_t masked_l2 = 0;  // pixels excluded from the second BCC term
};

/// Double-layer brightness-constancy cost:
/// sum |l1 - warp(l1', U)| + sum |l2 - warp(l2', V)| over unmasked pixels,
/// all channels. Static mode is the caller passing V == 0 with l2p == l2.
inline DataTermInfo data_term_info(const LayerDecomposition& dec,
                                   const FlowField& flow_u,
                                   const FlowField& flow_v) {
  require(dec.same_shape(), "data_term: layer shape mismatch");
  require(dec.l1.height == flow_u.height && dec.l1.width == flow_u.width &&
              flow_u.same_shape(flow_v),
          "data_term: flow shape mismatch");
  DataTermInfo info;
  const WarpResult w1 = warp_backward(dec.l1p, flow_u);
  const WarpResult w2 = warp_backward(dec.l2p, flow_v);
  const int ch = dec.l1.channels;
  for (int y = 0; y < dec.l1.height; ++y) {
    for (int x = 0; x < dec.l1.width; ++x) {
      if (w1.mask.at(y, x)) {
        for (int c = 0; c < ch; ++c)
          info.value += std::abs(dec.l1.at(y, x, c) - w1.image.at(y, x, c));
      } else {
        ++info.masked_l1;
      }
      if (w2.mask.at(y, x)) {
        for (int c = 0; c < ch; ++c)
          info.value += std::abs(dec.l2.at(y, x, c) - w2.image.at(y, x, c));
      } else {
        ++info.masked_l2;
      }
    }
  }
  return info;
}

inline double data_term(const LayerDecomposition& dec, const FlowField& flow_u,
                        const FlowField& flow_v) {
  return data_term_info(dec, flow_u, flow_v).value;
}

namespace detail {

inline double abs_gradient_sum(const Image& img) {
  double s = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        if (x + 1 < img.width)
          s += std::abs(img.at(y, x + 1, c) - img.at(y, x, c));
        if (y + 1 < img.height)
          s += std::abs(img.at(y + 1, x, c) - img.at(y, x, c));
      }
    }
  }
  return s;
}

}  // namespace detail

/// Sparse-gradient prior: anisotropic l1 of forward differences, summed
/// over all four layers and channels.
inline double layer_prior(const LayerDecomposition& dec) {
  require(dec.same_shape(), "layer_prior: shape mismatch");
  return detail::abs_gradient_sum(dec.l1) + detail::abs_gradient_sum(dec.l1p) +
         detail::abs_gradient_sum(dec.l2) + detail::abs_gradient_sum(dec.l2p);
}

namespace detail {

inline double abs_forward_diff_sum(const Field& f, int h, int w) {
  double s = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) s += std::abs(f[fidx(y, x + 1, w)] - f[fidx(y, x, w)]);
      if (y + 1 < h) s += std::abs(f[fidx(y + 1, x, w)] - f[fidx(y, x, w)]);
    }
  return s;
}

}  // namespace detail

/// TV of one flow field: TV(U_x) + TV(U_y), anisotropic l1.
inline double flow_prior_tv(const FlowField& flow) {
  return detail::abs_forward_diff_sum(flow.u, flow.height, flow.width) +
         detail::abs_forward_diff_sum(flow.v, flow.height, flow.width);
}

/// Auxiliary vector fields of the TGV^2 measure, one 2-vector per pixel per
/// flow component.
struct TgvAux {
  int height = 0, width = 0;
  detail::Field ux, uy;  // auxiliary for the horizontal component
  detail::Field vx, vy;  // auxiliary for the vertical component

  TgvAux() = default;
  TgvAux(int h, int w)
      : height(h), width(w),
        ux(static_cast<std::size_t>(h) * w, 0.0), uy(ux), vx(ux), vy(ux) {}
};

namespace detail {

// TGV^2 of a scalar component p with explicit auxiliary w = (wx, wy).
// Differences are counted only where they are defined (x < w-1 for d/dx,
// y < h-1 for d/dy); this keeps globally affine fields exactly in the null
// space. The off-diagonal of the symmetrized gradient appears twice.
inline double tgv2_component_value(const Field& p, const Field& wx,
                                   const Field& wy, int h, int w,
                                   const TgvAlpha& alpha) {
  double first = 0.0, second = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = fidx(y, x, w);
      if (x + 1 < w) {
        first += std::abs(p[fidx(y, x + 1, w)] - p[i] - wx[i]);
        second += std::abs(wx[fidx(y, x + 1, w)] - wx[i]);
      }
      if (y + 1 < h) {
        first += std::abs(p[fidx(y + 1, x, w)] - p[i] - wy[i]);
        second += std::abs(wy[fidx(y + 1, x, w)] - wy[i]);
      }
      if (x + 1 < w && y + 1 < h) {
        const double e12 = 0.5 * (wx[fidx(y + 1, x, w)] - wx[i] +
                                  wy[fidx(y, x + 1, w)] - wy[i]);
        second += 2.0 * std::abs(e12);
      }
    }
  }
  return alpha.first_order * first + alpha.second_order * second;
}

// Forward differences of p with the last defined value replicated into the
// structurally-zero strip. Used to seed auxiliary fields: for affine p this
// yields the exact constant minimizer.
inline void seed_aux_from_gradient(const Field& p, Field& wx, Field& wy, int h,
                                   int w) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w - 1; ++x)
      wx[fidx(y, x, w)] = p[fidx(y, x + 1, w)] - p[fidx(y, x, w)];
    wx[fidx(y, w - 1, w)] = w >= 2 ? wx[fidx(y, w - 2, w)] : 0.0;
  }
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h - 1; ++y)
      wy[fidx(y, x, w)] = p[fidx(y + 1, x, w)] - p[fidx(y, x, w)];
    wy[fidx(h - 1, x, w)] = h >= 2 ? wy[fidx(h - 2, x, w)] : 0.0;
  }
}

// Minimize alpha1*|grad p - w| + alpha0*|sym grad w| over w by the
// primal-dual method; p is fixed. Operator norm of the symmetrized gradient
// is bounded by sqrt(8).
inline void tgv2_minimize_component(const Field& p, Field& wx, Field& wy,
                                    int h, int w, const TgvAlpha& alpha,
                                    int iters) {
  const std::size_t n = p.size();
  seed_aux_from_gradient(p, wx, wy, h, w);
  Field gx(n), gy(n);
  dx_forward(p, gx, h, w);
  dy_forward(p, gy, h, w);

  Field q11(n, 0.0), q22(n, 0.0), q12(n, 0.0);
  Field wxb = wx, wyb = wy;
  Field t1(n), t2(n), t3(n), t4(n);
  const double step = 1.0 / std::sqrt(8.0);
  const double tau = step, sigma = step;
  const double b0 = alpha.second_order;
  const double b12 = 2.0 * alpha.second_order;

  for (int it = 0; it < iters; ++it) {
    // dual ascent on the symmetrized gradient
    dx_forward(wxb, t1, h, w);
    dy_forward(wyb, t2, h, w);
    dy_forward(wxb, t3, h, w);
    dx_forward(wyb, t4, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = fidx(y, x, w);
        if (x + 1 < w)
          q11[i] = std::clamp(q11[i] + sigma * t1[i], -b0, b0);
        if (y + 1 < h)
          q22[i] = std::clamp(q22[i] + sigma * t2[i], -b0, b0);
        if (x + 1 < w && y + 1 < h)
          q12[i] = std::clamp(q12[i] + sigma * 0.5 * (t3[i] + t4[i]), -b12, b12);
      }
    }
    // primal descent: w <- prox of alpha1*|g - w| at w - tau * E^T q
    dx_adjoint(q11, t1, h, w);
    dy_adjoint(q12, t2, h, w);
    dy_adjoint(q22, t3, h, w);
    dx_adjoint(q12, t4, h, w);
    const double thr = tau * alpha.first_order;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = fidx(y, x, w);
        const double cx = wx[i] - tau * (t1[i] + 0.5 * t2[i]);
        const double cy = wy[i] - tau * (t3[i] + 0.5 * t4[i]);
        double nx = cx, ny = cy;
        if (x + 1 < w) {  // first-order term defined here
          const double d = cx - gx[i];
          nx = gx[i] + (d > thr ? d - thr : (d < -thr ? d + thr : 0.0));
        }
        if (y + 1 < h) {
          const double d = cy - gy[i];
          ny = gy[i] + (d > thr ? d - thr : (d < -thr ? d + thr : 0.0));
        }
        wxb[i] = 2.0 * nx - wx[i];
        wyb[i] = 2.0 * ny - wy[i];
        wx[i] = nx;
        wy[i] = ny;
      }
    }
  }
}

}  // namespace detail

/// TGV^2 with explicit auxiliary fields.
inline double flow_prior_tgv2(const FlowField& flow, const TgvAux& aux,
                              const TgvAlpha& alpha) {
  require(aux.height == flow.height && aux.width == flow.width,
          "flow_prior_tgv2: aux shape mismatch");
  return detail::tgv2_component_value(flow.u, aux.ux, aux.uy, flow.height,
                                      flow.width, alpha) +
         detail::tgv2_component_value(flow.v, aux.vx, aux.vy, flow.height,
                                      flow.width, alpha);
}

/// Convenience overload minimizing the auxiliary fields internally.
inline double flow_prior_tgv2(const FlowField& flow, const TgvAlpha& alpha,
                              int iters = 400) {
  TgvAux aux(flow.height, flow.width);
  detail::tgv2_minimize_component(flow.u, aux.ux, aux.uy, flow.height,
                               flow.width, alpha, iters);
  detail::tgv2_minimize_component(flow.v, aux.vx, aux.vy, flow.height,
                               flow.width, alpha, iters);
  return flow_prior_tgv2(flow, aux, alpha);
}

/// Assemble the full objective E_B + lambda_L E_L + lambda_F E_F.
inline EnergyBreakdown total_energy(const LayerDecomposition& dec,
                                    const FlowField& flow_u,
                                    const FlowField& flow_v,
                                    const Weights& weights,
                                    int tgv_eval_iters = 400) {
  EnergyBreakdown e;
  e.e_b = data_term(dec, flow_u, flow_v);
  e.e_l = layer_prior(dec);
  if (weights.tgv_order == 1) {
    e.e_f = flow_prior_tv(flow_u) + flow_prior_tv(flow_v);
  } else {
    e.e_f = flow_prior_tgv2(flow_u, weights.tgv_alpha, tgv_eval_iters) +
            flow_prior_tgv2(flow_v, weights.tgv_alpha, tgv_eval_iters);
  }
  e.total = e.e_b + weights.lambda_l * e.e_l + weights.lambda_f * e.e_f;
  return e;
}

}  // namespace duoflow

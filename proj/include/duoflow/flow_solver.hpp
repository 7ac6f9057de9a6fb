#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "duoflow/energy.hpp"
#include "duoflow/field_ops.hpp"
#include "duoflow/image.hpp"
#include "duoflow/pyramid.hpp"

namespace duoflow {

/// One single-layer flow problem: min |frame0 - frame1(x+flow)| + lambda_F * reg.
struct FlowProblem {
  Image frame0;
  Image frame1;
  double lambda_f = 0.1;
  int tgv_order = 1;  // 1 = TV, 2 = TGV^2
  TgvAlpha tgv_alpha{};
};

struct PdSteps {
  double tau = 1.0 / std::sqrt(8.0);
  double sigma = 1.0 / std::sqrt(8.0);
};

struct RelaxConfig {
  double theta = 0.25;        // quadratic coupling weight
  int warps_per_level = 5;    // re-linearizations per pyramid level
  int relax_rounds = 5;       // data/smoothness alternations per warp
  int pd_iters = 50;          // primal-dual iterations per smoothness prox
  PdSteps pd_steps{};         // must satisfy tau*sigma*||grad||^2 <= 1 (<= 8 for TV)
  double scale_factor = 0.5;  // pyramid factor
  int min_size = 16;          // coarsest pyramid dimension
  bool median_filter = true;  // 5x5 median between warps
  double presmooth_sigma = 0.5;  // level presmoothing for the linearization
};

namespace detail {

// Central differences with clamped indices (half slope at the borders).
inline GradientPair central_gradient(const Image& img) {
  GradientPair g{Image(img.height, img.width, img.channels),
                 Image(img.height, img.width, img.channels)};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int xm = std::max(x - 1, 0), xp = std::min(x + 1, img.width - 1);
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, img.height - 1);
      for (int c = 0; c < img.channels; ++c) {
        g.gx.at(y, x, c) = 0.5 * (img.at(y, xp, c) - img.at(y, xm, c));
        g.gy.at(y, x, c) = 0.5 * (img.at(yp, x, c) - img.at(ym, x, c));
      }
    }
  }
  return g;
}

// Residual linearization rho(w) = rho_c + gx*wu + gy*wv at one warp point.
struct LinearizedData {
  int height = 0, width = 0, channels = 1;
  std::vector<double> rho_c, gx, gy;  // channel-innermost like Image
  PixelMask valid;
};

inline LinearizedData linearize(const Image& frame0, const Image& frame1,
                                const GradientPair& grad1,
                                const FlowField& base) {
  LinearizedData lin;
  lin.height = frame0.height;
  lin.width = frame0.width;
  lin.channels = frame0.channels;
  const WarpResult f1w = warp_backward(frame1, base);
  const WarpResult gxw = warp_backward(grad1.gx, base);
  const WarpResult gyw = warp_backward(grad1.gy, base);
  lin.valid = f1w.mask;
  const std::size_t n = frame0.data.size();
  lin.rho_c.resize(n);
  lin.gx = gxw.image.data;
  lin.gy = gyw.image.data;
  for (int y = 0; y < frame0.height; ++y) {
    for (int x = 0; x < frame0.width; ++x) {
      const std::size_t i = base.idx(y, x);
      for (int c = 0; c < frame0.channels; ++c) {
        const std::size_t k = i * frame0.channels + c;
        lin.rho_c[k] = f1w.image.data[k] - lin.gx[k] * base.u[i] -
                       lin.gy[k] * base.v[i] - frame0.data[k];
      }
    }
  }
  return lin;
}

constexpr double kGradIsZero = 1e-12;

// Pointwise minimizer of sum_c |rho_c(w)| + (1/2 theta) ||w - aux||^2.
// Single channel has the classic closed-form thresholding; multi-channel
// restricts the step to the dominant channel gradient and minimizes the
// piecewise-quadratic 1-D objective exactly over its breakpoints.
inline void data_prox_pixel(const LinearizedData& lin, std::size_t pix,
                            double theta, double au, double av, double& ou,
                            double& ov) {
  const int ch = lin.channels;
  if (ch == 1) {
    const double gx = lin.gx[pix], gy = lin.gy[pix];
    const double grad2 = gx * gx + gy * gy;
    const double rho = lin.rho_c[pix] + gx * au + gy * av;
    double du = 0.0, dv = 0.0;
    if (rho < -theta * grad2) {
      du = theta * gx;
      dv = theta * gy;
    } else if (rho > theta * grad2) {
      du = -theta * gx;
      dv = -theta * gy;
    } else if (grad2 > kGradIsZero) {
      du = -rho / grad2 * gx;
      dv = -rho / grad2 * gy;
    }
    ou = au + du;
    ov = av + dv;
    return;
  }

  const std::size_t base = pix * ch;
  int dom = 0;
  double best = -1.0;
  for (int c = 0; c < ch; ++c) {
    const double g2 = lin.gx[base + c] * lin.gx[base + c] +
                      lin.gy[base + c] * lin.gy[base + c];
    if (g2 > best) {
      best = g2;
      dom = c;
    }
  }
  const double dx = lin.gx[base + dom], dy = lin.gy[base + dom];
  const double n2 = dx * dx + dy * dy;
  if (n2 <= kGradIsZero) {
    ou = au;
    ov = av;
    return;
  }
  double rho[3], slope[3];
  for (int c = 0; c < ch; ++c) {
    rho[c] = lin.rho_c[base + c] + lin.gx[base + c] * au + lin.gy[base + c] * av;
    slope[c] = lin.gx[base + c] * dx + lin.gy[base + c] * dy;
  }
  auto phi = [&](double t) {
    double v = t * t * n2 / (2.0 * theta);
    for (int c = 0; c < ch; ++c) v += std::abs(rho[c] + t * slope[c]);
    return v;
  };
  // Candidates: t = 0, the breakpoints, and the stationary point of each
  // sign region (clamped into that region).
  std::array<double, 4> brk{};
  int nb = 0;
  for (int c = 0; c < ch; ++c)
    if (std::abs(slope[c]) > kGradIsZero) brk[nb++] = -rho[c] / slope[c];
  std::sort(brk.begin(), brk.begin() + nb);
  double t_best = 0.0, v_best = phi(0.0);
  auto consider = [&](double t) {
    const double v = phi(t);
    if (v < v_best) {
      v_best = v;
      t_best = t;
    }
  };
  for (int k = 0; k < nb; ++k) consider(brk[k]);
  const double kInf = 1e30;
  for (int k = 0; k <= nb; ++k) {
    const double lo = k == 0 ? -kInf : brk[k - 1];
    const double hi = k == nb ? kInf : brk[k];
    if (lo >= hi) continue;
    const double mid =
        (lo <= -kInf) ? hi - 1.0 : (hi >= kInf ? lo + 1.0 : 0.5 * (lo + hi));
    double drift = 0.0;
    for (int c = 0; c < ch; ++c)
      drift += (rho[c] + mid * slope[c] >= 0.0 ? 1.0 : -1.0) * slope[c];
    const double t_star = std::clamp(-theta * drift / n2, lo, hi);
    consider(t_star);
  }
  ou = au + t_best * dx;
  ov = av + t_best * dy;
}

inline FlowField data_prox_step(const LinearizedData& lin, const FlowField& aux,
                                double theta) {
  FlowField out(lin.height, lin.width);
  for (int y = 0; y < lin.height; ++y) {
    for (int x = 0; x < lin.width; ++x) {
      const std::size_t i = aux.idx(y, x);
      if (!lin.valid.at(y, x)) {
        out.u[i] = aux.u[i];
        out.v[i] = aux.v[i];
        continue;
      }
      data_prox_pixel(lin, i, theta, aux.u[i], aux.v[i], out.u[i], out.v[i]);
    }
  }
  return out;
}

}  // namespace detail

/// Data proximal step at linearization point base_flow (see §contract):
/// minimizes |rho(w)| + (1/2 theta)||w - aux||^2 per pixel. Out-of-bounds
/// warp pixels and zero-gradient pixels return aux unchanged.
inline FlowField data_prox(const Image& frame0, const Image& frame1,
                           const FlowField& base_flow,
                           const FlowField& aux_flow, double theta,
                           double presmooth_sigma = 0.0) {
  require(frame0.same_shape(frame1), "data_prox: frame shape mismatch");
  require(frame0.height == base_flow.height &&
              frame0.width == base_flow.width &&
              base_flow.same_shape(aux_flow),
          "data_prox: flow shape mismatch");
  const Image f0 = gaussian_blur(frame0, presmooth_sigma);
  const Image f1 = gaussian_blur(frame1, presmooth_sigma);
  const GradientPair g1 = detail::central_gradient(f1);
  const detail::LinearizedData lin = detail::linearize(f0, f1, g1, base_flow);
  return detail::data_prox_step(lin, aux_flow, theta);
}

struct SmoothProxResult {
  FlowField flow;
  double pd_gap = 0.0;
};

namespace detail {

// Primal-dual state of the anisotropic ROF problem
//   min_f weight*(|dx f| + |dy f|) + 1/2 ||f - target||^2
// kept across calls so the flow solver can warm-start between relaxation
// rounds and warps.
struct RofState {
  Field px, py, fb;
  void reset(const Field& f) {
    px.assign(f.size(), 0.0);
    py.assign(f.size(), 0.0);
    fb = f;
  }
};

inline void rof_pd_update(Field& f, RofState& s, const Field& target, int h,
                          int w, double weight, int iters, double tau,
                          double sigma) {
  const std::size_t n = target.size();
  Field t1(n), t2(n), d(n);
  for (int it = 0; it < iters; ++it) {
    dx_forward(s.fb, t1, h, w);
    dy_forward(s.fb, t2, h, w);
    for (std::size_t i = 0; i < n; ++i) {
      s.px[i] = std::clamp(s.px[i] + sigma * t1[i], -weight, weight);
      s.py[i] = std::clamp(s.py[i] + sigma * t2[i], -weight, weight);
    }
    divergence(s.px, s.py, d, h, w);
    for (std::size_t i = 0; i < n; ++i) {
      // Increment form: exactly stationary when div p + target - f == 0.
      const double fn = f[i] + tau * (d[i] + target[i] - f[i]) / (1.0 + tau);
      s.fb[i] = 2.0 * fn - f[i];
      f[i] = fn;
    }
  }
}

inline double rof_prox_field(const Field& target, Field& f, int h, int w,
                             double weight, int iters, double tau,
                             double sigma) {
  const std::size_t n = target.size();
  f = target;
  if (weight <= 0.0 || iters <= 0) return 0.0;
  RofState s;
  s.reset(f);
  rof_pd_update(f, s, target, h, w, weight, iters, tau, sigma);
  // Duality gap: primal(f) - dual(p) with dual(p) = -<target, div p> - 1/2||div p||^2.
  double primal = weight * abs_forward_diff_sum(f, h, w);
  double fit = 0.0, dual = 0.0;
  Field d(n);
  divergence(s.px, s.py, d, h, w);
  for (std::size_t i = 0; i < n; ++i) {
    fit += (f[i] - target[i]) * (f[i] - target[i]);
    dual += -target[i] * d[i] - 0.5 * d[i] * d[i];
  }
  return primal + 0.5 * fit - dual;
}

// Primal-dual state of the TGV^2-L2 problem on a scalar field, with the
// masked-difference discretization matching tgv2_component_value. Operator
// norm bound 12.
struct Tgv2State {
  Field wx, wy, fb, wxb, wyb;
  Field px, py, q11, q22, q12;
  void reset(const Field& f, int h, int w) {
    const std::size_t n = f.size();
    wx.assign(n, 0.0);
    wy.assign(n, 0.0);
    seed_aux_from_gradient(f, wx, wy, h, w);
    fb = f;
    wxb = wx;
    wyb = wy;
    px.assign(n, 0.0);
    py.assign(n, 0.0);
    q11.assign(n, 0.0);
    q22.assign(n, 0.0);
    q12.assign(n, 0.0);
  }
};

inline void tgv2_pd_update(Field& f, Tgv2State& s, const Field& target, int h,
                           int w, double weight, const TgvAlpha& alpha,
                           int iters, double tau, double sigma) {
  const std::size_t n = target.size();
  const double b1 = weight * alpha.first_order;
  const double b0 = weight * alpha.second_order;
  const double b12 = 2.0 * b0;
  Field t1(n), t2(n), t3(n), t4(n), d(n);
  for (int it = 0; it < iters; ++it) {
    dx_forward(s.fb, t1, h, w);
    dy_forward(s.fb, t2, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = fidx(y, x, w);
        if (x + 1 < w)
          s.px[i] = std::clamp(s.px[i] + sigma * (t1[i] - s.wxb[i]), -b1, b1);
        if (y + 1 < h)
          s.py[i] = std::clamp(s.py[i] + sigma * (t2[i] - s.wyb[i]), -b1, b1);
      }
    }
    dx_forward(s.wxb, t1, h, w);
    dy_forward(s.wyb, t2, h, w);
    dy_forward(s.wxb, t3, h, w);
    dx_forward(s.wyb, t4, h, w);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = fidx(y, x, w);
        if (x + 1 < w)
          s.q11[i] = std::clamp(s.q11[i] + sigma * t1[i], -b0, b0);
        if (y + 1 < h)
          s.q22[i] = std::clamp(s.q22[i] + sigma * t2[i], -b0, b0);
        if (x + 1 < w && y + 1 < h)
          s.q12[i] =
              std::clamp(s.q12[i] + sigma * 0.5 * (t3[i] + t4[i]), -b12, b12);
      }
    }
    divergence(s.px, s.py, d, h, w);
    dx_adjoint(s.q11, t1, h, w);
    dy_adjoint(s.q12, t2, h, w);
    dy_adjoint(s.q22, t3, h, w);
    dx_adjoint(s.q12, t4, h, w);
    for (std::size_t i = 0; i < n; ++i) {
      const double fn = f[i] + tau * (d[i] + target[i] - f[i]) / (1.0 + tau);
      s.fb[i] = 2.0 * fn - f[i];
      f[i] = fn;
      const double wxn = s.wx[i] - tau * (-s.px[i] + t1[i] + 0.5 * t2[i]);
      const double wyn = s.wy[i] - tau * (-s.py[i] + t3[i] + 0.5 * t4[i]);
      s.wxb[i] = 2.0 * wxn - s.wx[i];
      s.wyb[i] = 2.0 * wyn - s.wy[i];
      s.wx[i] = wxn;
      s.wy[i] = wyn;
    }
  }
}

inline double tgv2_prox_field(const Field& target, Field& f, Field& wx,
                              Field& wy, int h, int w, double weight,
                              const TgvAlpha& alpha, int iters, double tau,
                              double sigma) {
  const std::size_t n = target.size();
  f = target;
  if (weight <= 0.0 || iters <= 0) {
    wx.assign(n, 0.0);
    wy.assign(n, 0.0);
    seed_aux_from_gradient(target, wx, wy, h, w);
    return 0.0;
  }
  Tgv2State s;
  s.reset(f, h, w);
  tgv2_pd_update(f, s, target, h, w, weight, alpha, iters, tau, sigma);
  wx = s.wx;
  wy = s.wy;
  // Surrogate gap: exact TV-style gap plus the norm of the unresolved
  // auxiliary multiplier residual (zero at the saddle point).
  double primal = weight * tgv2_component_value(f, wx, wy, h, w, alpha);
  double fit = 0.0, dual = 0.0, wres = 0.0;
  Field t1(n), t2(n), t3(n), t4(n), d(n);
  divergence(s.px, s.py, d, h, w);
  dx_adjoint(s.q11, t1, h, w);
  dy_adjoint(s.q12, t2, h, w);
  dy_adjoint(s.q22, t3, h, w);
  dx_adjoint(s.q12, t4, h, w);
  for (std::size_t i = 0; i < n; ++i) {
    fit += (f[i] - target[i]) * (f[i] - target[i]);
    dual += -target[i] * d[i] - 0.5 * d[i] * d[i];
    wres += std::abs(-s.px[i] + t1[i] + 0.5 * t2[i]) +
            std::abs(-s.py[i] + t3[i] + 0.5 * t4[i]);
  }
  return primal + 0.5 * fit - dual + wres;
}

}  // namespace detail

/// Approximate minimizer of weight*TV(flow) + 1/2 ||flow - target||^2.
inline SmoothProxResult smooth_prox_tv(const FlowField& target, double weight,
                                       int iters, PdSteps steps = PdSteps{}) {
  require(steps.tau > 0.0 && steps.sigma > 0.0 &&
              steps.tau * steps.sigma * 8.0 <= 1.0 + 1e-12,
          "smooth_prox_tv: step sizes violate tau*sigma*8 <= 1");
  SmoothProxResult out;
  out.flow = FlowField(target.height, target.width);
  detail::Field fu, fv;
  out.pd_gap = detail::rof_prox_field(target.u, fu, target.height,
                                      target.width, weight, iters, steps.tau,
                                      steps.sigma);
  out.pd_gap += detail::rof_prox_field(target.v, fv, target.height,
                                       target.width, weight, iters, steps.tau,
                                       steps.sigma);
  out.flow.u = std::move(fu);
  out.flow.v = std::move(fv);
  return out;
}

/// Approximate minimizer of weight*TGV^2(flow) + 1/2 ||flow - target||^2.
inline SmoothProxResult smooth_prox_tgv2(const FlowField& target, double weight,
                                         const TgvAlpha& alpha, int iters,
                                         PdSteps steps = PdSteps{}) {
  require(steps.tau > 0.0 && steps.sigma > 0.0 &&
              steps.tau * steps.sigma * 12.0 <= 1.0 + 1e-12,
          "smooth_prox_tgv2: step sizes violate tau*sigma*12 <= 1");
  SmoothProxResult out;
  out.flow = FlowField(target.height, target.width);
  const std::size_t n = target.u.size();
  detail::Field fu, fv, wx(n), wy(n);
  out.pd_gap = detail::tgv2_prox_field(target.u, fu, wx, wy, target.height,
                                       target.width, weight, alpha, iters,
                                       steps.tau, steps.sigma);
  out.pd_gap += detail::tgv2_prox_field(target.v, fv, wx, wy, target.height,
                                        target.width, weight, alpha, iters,
                                        steps.tau, steps.sigma);
  out.flow.u = std::move(fu);
  out.flow.v = std::move(fv);
  return out;
}

namespace detail {

inline FlowField median_filter_5x5(const FlowField& flow) {
  FlowField out(flow.height, flow.width);
  std::array<double, 25> windowbuf;
  auto run = [&](const Field& src, Field& dst) {
    for (int y = 0; y < flow.height; ++y) {
      for (int x = 0; x < flow.width; ++x) {
        int n = 0;
        for (int dy = -2; dy <= 2; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= flow.height) continue;
          for (int dx = -2; dx <= 2; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= flow.width) continue;
            windowbuf[n++] = src[fidx(yy, xx, flow.width)];
          }
        }
        std::nth_element(windowbuf.begin(), windowbuf.begin() + (n - 1) / 2,
                         windowbuf.begin() + n);
        dst[fidx(y, x, flow.width)] = windowbuf[(n - 1) / 2];
      }
    }
  };
  run(flow.u, out.u);
  run(flow.v, out.v);
  return out;
}

inline PdSteps tgv_steps(const PdSteps& steps) {
  const double prod = steps.tau * steps.sigma;
  if (prod * 12.0 <= 1.0) return steps;
  const double scale = std::sqrt(1.0 / (12.0 * prod));
  return PdSteps{steps.tau * scale, steps.sigma * scale};
}

}  // namespace detail

/// Coarse-to-fine single-layer flow: at each level, repeatedly re-linearize
/// at the current flow and alternate the data prox with the smoothness prox
/// (primal-dual, with dual state warm-started across rounds and warps).
/// Internally the frames are lifted to a 0..255 working scale, the operating
/// point the relaxation defaults are calibrated for; the minimizer is the
/// same as for the [0,1] objective.
inline FlowField solve_single_flow(const FlowProblem& problem,
                                   const FlowField& init,
                                   const RelaxConfig& cfg) {
  require(problem.frame0.same_shape(problem.frame1),
          "solve_single_flow: frame shape mismatch");
  require(init.height == problem.frame0.height &&
              init.width == problem.frame0.width,
          "solve_single_flow: init shape mismatch");
  for (double v : problem.frame0.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("solve_single_flow: non-finite frame0");
  for (double v : problem.frame1.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("solve_single_flow: non-finite frame1");

  constexpr double kWorkScale = 255.0;
  Image scaled0 = problem.frame0;
  Image scaled1 = problem.frame1;
  for (auto& v : scaled0.data) v *= kWorkScale;
  for (auto& v : scaled1.data) v *= kWorkScale;

  const Pyramid pyr0 = build_pyramid(scaled0, cfg.scale_factor, cfg.min_size);
  const Pyramid pyr1 = build_pyramid(scaled1, cfg.scale_factor, cfg.min_size);
  const int levels = static_cast<int>(pyr0.levels.size());
  const PdSteps tv_pd = cfg.pd_steps;
  const PdSteps tgv_pd = detail::tgv_steps(cfg.pd_steps);
  const double prox_weight = cfg.theta * problem.lambda_f * kWorkScale;

  FlowField flow = rescale_flow(init, pyr0.levels[levels - 1].height,
                                pyr0.levels[levels - 1].width);
  for (int level = levels - 1; level >= 0; --level) {
    const int h = pyr0.levels[level].height;
    const int w = pyr0.levels[level].width;
    const Image f0 = gaussian_blur(pyr0.levels[level], cfg.presmooth_sigma);
    const Image f1 = gaussian_blur(pyr1.levels[level], cfg.presmooth_sigma);
    const GradientPair g1 = detail::central_gradient(f1);

    detail::RofState rof_u, rof_v;
    detail::Tgv2State tgv_u, tgv_v;
    if (problem.tgv_order == 1) {
      rof_u.reset(flow.u);
      rof_v.reset(flow.v);
    } else {
      tgv_u.reset(flow.u, h, w);
      tgv_v.reset(flow.v, h, w);
    }

    for (int warp = 0; warp < cfg.warps_per_level; ++warp) {
      const detail::LinearizedData lin = detail::linearize(f0, f1, g1, flow);
      for (int round = 0; round < cfg.relax_rounds; ++round) {
        const FlowField v = detail::data_prox_step(lin, flow, cfg.theta);
        if (problem.tgv_order == 1) {
          detail::rof_pd_update(flow.u, rof_u, v.u, h, w, prox_weight,
                                cfg.pd_iters, tv_pd.tau, tv_pd.sigma);
          detail::rof_pd_update(flow.v, rof_v, v.v, h, w, prox_weight,
                                cfg.pd_iters, tv_pd.tau, tv_pd.sigma);
        } else {
          detail::tgv2_pd_update(flow.u, tgv_u, v.u, h, w, prox_weight,
                                 problem.tgv_alpha, cfg.pd_iters, tgv_pd.tau,
                                 tgv_pd.sigma);
          detail::tgv2_pd_update(flow.v, tgv_v, v.v, h, w, prox_weight,
                                 problem.tgv_alpha, cfg.pd_iters, tgv_pd.tau,
                                 tgv_pd.sigma);
        }
      }
      if (cfg.median_filter) {
        flow = detail::median_filter_5x5(flow);
        if (problem.tgv_order == 1) {
          rof_u.fb = flow.u;
          rof_v.fb = flow.v;
        } else {
          tgv_u.fb = flow.u;
          tgv_v.fb = flow.v;
        }
      }
    }
    if (level > 0) {
      flow = rescale_flow(flow, pyr0.levels[level - 1].height,
                          pyr0.levels[level - 1].width);
    }
  }
  return flow;
}

/// Flow half-step of the alternation: the two layer pairs are independent
/// problems; static mode skips V entirely and returns it as zero.
inline std::pair<FlowField, FlowField> solve_flows(
    const LayerDecomposition& dec, const FlowField& u_init,
    const FlowField& v_init, const Weights& weights, const RelaxConfig& cfg,
    Mode mode) {
  FlowProblem pu{dec.l1, dec.l1p, weights.lambda_f, weights.tgv_order,
                 weights.tgv_alpha};
  FlowField u = solve_single_flow(pu, u_init, cfg);
  if (mode == Mode::kStaticForeground) {
    return {std::move(u), FlowField(dec.l1.height, dec.l1.width)};
  }
  FlowProblem pv{dec.l2, dec.l2p, weights.lambda_f, weights.tgv_order,
                 weights.tgv_alpha};
  FlowField v = solve_single_flow(pv, v_init, cfg);
  return {std::move(u), std::move(v)};
}

}  // namespace duoflow

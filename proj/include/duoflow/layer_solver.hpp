#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "duoflow/energy.hpp"
#include "duoflow/image.hpp"

namespace duoflow {

// One |a.l - b| term. A backward-warped BCC residual touches one pixel of
// the unwarped layer plus up to four bilinear neighbors of the warped one.
struct SparseRow {
  static constexpr int kCapacity = 5;
  int n = 0;
  int idx[kCapacity] = {0};
  double coef[kCapacity] = {0.0};
  double b = 0.0;

  void add(int unknown, double c) {
    for (int k = 0; k < n; ++k) {
      if (idx[k] == unknown) {
        coef[k] += c;
        return;
      }
    }
    idx[n] = unknown;
    coef[n] = c;
    ++n;
  }
};

/// min sum |a_i . l - b_i| subject to lb <= l <= ub, unknowns stacking L2
/// (and L2' in dynamic mode) pixel values channel-innermost.
struct SparseL1System {
  int unknowns = 0;
  std::vector<SparseRow> rows;
  std::vector<double> lb;
  std::vector<double> ub;
};

struct IrlsConfig {
  double epsilon = 1e-4;       // residual smoothing, brightness units
  int max_outer = 10;          // reweighting iterations
  int inner_sweeps = 10;       // projected Gauss-Seidel sweeps per reweighting
  double inner_tol = 1e-9;     // sweep exit on largest coordinate update
  double objective_tol = 1e-7; // relative smoothed-objective decrease exit
};

inline double system_l1_objective(const SparseL1System& sys,
                                  const std::vector<double>& l) {
  double s = 0.0;
  for (const SparseRow& r : sys.rows) {
    double v = -r.b;
    for (int k = 0; k < r.n; ++k) v += r.coef[k] * l[r.idx[k]];
    s += std::abs(v);
  }
  return s;
}

namespace detail {

// Huber-smoothed |r|; the 1/max(|r|, eps) reweighting is its exact
// majorize-minimize weight, which is what makes the outer objective
// monotone under inexact inner solves.
inline double huber(double r, double eps) {
  const double a = std::abs(r);
  return a <= eps ? r * r / (2.0 * eps) + eps / 2.0 : a;
}

}  // namespace detail

inline double system_huber_objective(const SparseL1System& sys,
                                     const std::vector<double>& l,
                                     double eps) {
  double s = 0.0;
  for (const SparseRow& r : sys.rows) {
    double v = -r.b;
    for (int k = 0; k < r.n; ++k) v += r.coef[k] * l[r.idx[k]];
    s += detail::huber(v, eps);
  }
  return s;
}

namespace detail {

inline void bilinear_neighbors(double sx, double sy, int h, int w,
                               int xs[2], int ys[2], double wx[2],
                               double wy[2]) {
  int x0, y0;
  double fx, fy;
  bilinear_weights(sx, w, x0, fx);
  bilinear_weights(sy, h, y0, fy);
  xs[0] = x0;
  xs[1] = x0 + 1;
  ys[0] = y0;
  ys[1] = y0 + 1;
  wx[0] = 1.0 - fx;
  wx[1] = fx;
  wy[0] = 1.0 - fy;
  wy[1] = fy;
}

}  // namespace detail

/// Build the layer-separation subproblem for fixed flows: BCC residual rows
/// (bilinear warp weights matching warp_backward) plus lambda_L-weighted
/// gradient rows of I-L2, I'-L2', L2, L2'; box bounds [0, min(frame, c)].
/// Static mode ties L2' == L2 as a single variable block.
inline SparseL1System assemble_system(const Image& frame0, const Image& frame1,
                                      const FlowField& flow_u,
                                      const FlowField& flow_v,
                                      const Weights& weights, double c,
                                      Mode mode) {
  require(frame0.same_shape(frame1), "assemble_system: frame shape mismatch");
  require(frame0.height == flow_u.height && frame0.width == flow_u.width &&
              flow_u.same_shape(flow_v),
          "assemble_system: flow shape mismatch");
  const int h = frame0.height, w = frame0.width, ch = frame0.channels;
  const int block = h * w * ch;
  const bool dynamic = mode == Mode::kDynamicForeground;

  SparseL1System sys;
  sys.unknowns = dynamic ? 2 * block : block;
  sys.lb.assign(sys.unknowns, 0.0);
  sys.ub.resize(sys.unknowns);
  auto l2_idx = [&](int y, int x, int cc) { return (y * w + x) * ch + cc; };
  auto l2p_idx = [&](int y, int x, int cc) {
    return (dynamic ? block : 0) + (y * w + x) * ch + cc;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int cc = 0; cc < ch; ++cc) {
        const double ub0 = std::min(frame0.at(y, x, cc), c);
        const double ub1 = std::min(frame1.at(y, x, cc), c);
        if (dynamic) {
          sys.ub[l2_idx(y, x, cc)] = std::max(ub0, 0.0);
          sys.ub[l2p_idx(y, x, cc)] = std::max(ub1, 0.0);
        } else {
          sys.ub[l2_idx(y, x, cc)] = std::max(std::min(ub0, ub1), 0.0);
        }
      }
    }
  }

  const WarpResult warped1 = warp_backward(frame1, flow_u);
  sys.rows.reserve(static_cast<std::size_t>(block) * (dynamic ? 10 : 9));

  // First BCC: (I - L2)(x) - (I' - L2')(x + U).
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!warped1.mask.at(y, x)) continue;
      const std::size_t i = flow_u.idx(y, x);
      int xs[2], ys[2];
      double wx[2], wy[2];
      detail::bilinear_neighbors(x + flow_u.u[i], y + flow_u.v[i], h, w, xs,
                                 ys, wx, wy);
      for (int cc = 0; cc < ch; ++cc) {
        SparseRow row;
        row.add(l2_idx(y, x, cc), -1.0);
        for (int a = 0; a < 2; ++a)
          for (int bxi = 0; bxi < 2; ++bxi) {
            const double wgt = wy[a] * wx[bxi];
            if (wgt != 0.0) row.add(l2p_idx(ys[a], xs[bxi], cc), wgt);
          }
        row.b = warped1.image.at(y, x, cc) - frame0.at(y, x, cc);
        sys.rows.push_back(row);
      }
    }
  }

  // Second BCC: L2(x) - L2'(x + V). Identically zero in static mode.
  if (dynamic) {
    const double xmax = w - 1, ymax = h - 1;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = flow_v.idx(y, x);
        const double sx = x + flow_v.u[i];
        const double sy = y + flow_v.v[i];
        if (sx < 0.0 || sx > xmax || sy < 0.0 || sy > ymax) continue;
        int xs[2], ys[2];
        double wx[2], wy[2];
        detail::bilinear_neighbors(sx, sy, h, w, xs, ys, wx, wy);
        for (int cc = 0; cc < ch; ++cc) {
          SparseRow row;
          row.add(l2_idx(y, x, cc), 1.0);
          for (int a = 0; a < 2; ++a)
            for (int bxi = 0; bxi < 2; ++bxi) {
              const double wgt = wy[a] * wx[bxi];
              if (wgt != 0.0) row.add(l2p_idx(ys[a], xs[bxi], cc), -wgt);
            }
          row.b = 0.0;
          sys.rows.push_back(row);
        }
      }
    }
  }

  // Gradient rows, weight lambda_L folded into the coefficients. Each set is
  // (base, sign): |grad(base - L2x)| for the frame-minus-layer terms and
  // |grad L2x| for the layer terms. Static mode sees grad(L2) twice because
  // L2' is the same image.
  const double lam = weights.lambda_l;
  if (lam > 0.0) {
    struct GradSet {
      const Image* base;  // nullptr for the plain layer terms
      bool primed;        // which variable block
    };
    const GradSet sets[4] = {{&frame0, false},
                             {&frame1, true},
                             {nullptr, false},
                             {nullptr, true}};
    for (const GradSet& set : sets) {
      auto vidx = [&](int y, int x, int cc) {
        return set.primed ? l2p_idx(y, x, cc) : l2_idx(y, x, cc);
      };
      // base - L2 flips the sign of the unknowns.
      const double s = set.base ? -lam : lam;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          for (int cc = 0; cc < ch; ++cc) {
            if (x + 1 < w) {
              SparseRow row;
              row.add(vidx(y, x + 1, cc), s);
              row.add(vidx(y, x, cc), -s);
              row.b = set.base ? -lam * (set.base->at(y, x + 1, cc) -
                                         set.base->at(y, x, cc))
                               : 0.0;
              sys.rows.push_back(row);
            }
            if (y + 1 < h) {
              SparseRow row;
              row.add(vidx(y + 1, x, cc), s);
              row.add(vidx(y, x, cc), -s);
              row.b = set.base ? -lam * (set.base->at(y + 1, x, cc) -
                                         set.base->at(y, x, cc))
                               : 0.0;
              sys.rows.push_back(row);
            }
          }
        }
      }
    }
  }
  return sys;
}

struct IrlsResult {
  std::vector<double> values;
  double objective = 0.0;     // smoothed objective at exit
  double l1_objective = 0.0;  // plain l1 objective at exit
  int outer_iters = 0;
  bool init_clipped = false;
};

/// Bounded IRLS: reweight rows by 1/max(|residual|, epsilon), then run
/// projected Gauss-Seidel sweeps on the weighted least-squares problem.
/// Every sweep stays feasible, and the smoothed objective never increases
/// across outer iterations.
inline IrlsResult irls_solve(const SparseL1System& sys,
                             const std::vector<double>& init,
                             const IrlsConfig& cfg) {
  require(static_cast<int>(init.size()) == sys.unknowns,
          "irls_solve: init size mismatch");
  for (const SparseRow& r : sys.rows) {
    if (!std::isfinite(r.b)) throw std::invalid_argument("irls_solve: non-finite b");
    for (int k = 0; k < r.n; ++k)
      if (!std::isfinite(r.coef[k]))
        throw std::invalid_argument("irls_solve: non-finite coefficient");
  }

  IrlsResult res;
  res.values = init;
  for (int j = 0; j < sys.unknowns; ++j) {
    const double clipped = std::clamp(res.values[j], sys.lb[j], sys.ub[j]);
    if (clipped != res.values[j]) res.init_clipped = true;
    res.values[j] = clipped;
  }

  // Column-major view of the rows for the coordinate sweeps.
  const std::size_t nrows = sys.rows.size();
  std::vector<int> col_start(sys.unknowns + 1, 0);
  for (const SparseRow& r : sys.rows)
    for (int k = 0; k < r.n; ++k)
      if (r.coef[k] != 0.0) ++col_start[r.idx[k] + 1];
  for (int j = 0; j < sys.unknowns; ++j) col_start[j + 1] += col_start[j];
  std::vector<int> col_row(col_start.back());
  std::vector<double> col_coef(col_start.back());
  {
    std::vector<int> fill(col_start.begin(), col_start.end() - 1);
    for (std::size_t i = 0; i < nrows; ++i) {
      const SparseRow& r = sys.rows[i];
      for (int k = 0; k < r.n; ++k) {
        if (r.coef[k] == 0.0) continue;
        const int j = r.idx[k];
        col_row[fill[j]] = static_cast<int>(i);
        col_coef[fill[j]] = r.coef[k];
        ++fill[j];
      }
    }
  }

  std::vector<double> resid(nrows);
  auto refresh_residuals = [&]() {
    for (std::size_t i = 0; i < nrows; ++i) {
      const SparseRow& r = sys.rows[i];
      double v = -r.b;
      for (int k = 0; k < r.n; ++k) v += r.coef[k] * res.values[r.idx[k]];
      resid[i] = v;
    }
  };
  refresh_residuals();

  std::vector<double> weight(nrows);
  double prev_obj = system_huber_objective(sys, res.values, cfg.epsilon);
  for (int outer = 0; outer < cfg.max_outer; ++outer) {
    res.outer_iters = outer + 1;
    for (std::size_t i = 0; i < nrows; ++i)
      weight[i] = 1.0 / std::max(std::abs(resid[i]), cfg.epsilon);

    for (int sweep = 0; sweep < cfg.inner_sweeps; ++sweep) {
      double max_step = 0.0;
      for (int j = 0; j < sys.unknowns; ++j) {
        double num = 0.0, den = 0.0;
        for (int k = col_start[j]; k < col_start[j + 1]; ++k) {
          const double wa = weight[col_row[k]] * col_coef[k];
          num += wa * resid[col_row[k]];
          den += wa * col_coef[k];
        }
        if (den <= 0.0) continue;
        const double target =
            std::clamp(res.values[j] - num / den, sys.lb[j], sys.ub[j]);
        const double step = target - res.values[j];
        if (step == 0.0) continue;
        for (int k = col_start[j]; k < col_start[j + 1]; ++k)
          resid[col_row[k]] += col_coef[k] * step;
        res.values[j] = target;
        max_step = std::max(max_step, std::abs(step));
      }
      if (max_step < cfg.inner_tol) break;
    }
    refresh_residuals();  // counter accumulated update drift

    const double obj = system_huber_objective(sys, res.values, cfg.epsilon);
    const double decrease = prev_obj - obj;
    prev_obj = obj;
    if (decrease < cfg.objective_tol * std::max(prev_obj, 1e-12)) break;
  }
  res.objective = prev_obj;
  res.l1_objective = system_l1_objective(sys, res.values);
  return res;
}

/// Layer half-step of the alternation: assemble, warm-start at prev, solve,
/// and reconstruct L1 = I - L2 / L1' = I' - L2' as hard constraints.
inline LayerDecomposition solve_layers(const Image& frame0, const Image& frame1,
                                       const FlowField& flow_u,
                                       const FlowField& flow_v,
                                       const Weights& weights, double c,
                                       const LayerDecomposition& prev,
                                       Mode mode,
                                       const IrlsConfig& cfg = IrlsConfig{}) {
  require(prev.same_shape() && prev.l1.same_shape(frame0),
          "solve_layers: prev decomposition shape mismatch");
  const int h = frame0.height, w = frame0.width, ch = frame0.channels;
  const int block = h * w * ch;
  const bool dynamic = mode == Mode::kDynamicForeground;

  SparseL1System sys =
      assemble_system(frame0, frame1, flow_u, flow_v, weights, c, mode);
  std::vector<double> init(sys.unknowns);
  std::copy(prev.l2.data.begin(), prev.l2.data.end(), init.begin());
  if (dynamic)
    std::copy(prev.l2p.data.begin(), prev.l2p.data.end(),
              init.begin() + block);

  const IrlsResult sol = irls_solve(sys, init, cfg);

  LayerDecomposition out;
  out.c = c;
  out.l2 = Image(h, w, ch);
  std::copy(sol.values.begin(), sol.values.begin() + block,
            out.l2.data.begin());
  if (dynamic) {
    out.l2p = Image(h, w, ch);
    std::copy(sol.values.begin() + block, sol.values.end(),
              out.l2p.data.begin());
  } else {
    out.l2p = out.l2;
  }
  out.l1 = Image(h, w, ch);
  out.l1p = Image(h, w, ch);
  for (int i = 0; i < block; ++i) {
    out.l1.data[i] = frame0.data[i] - out.l2.data[i];
    out.l1p.data[i] = frame1.data[i] - out.l2p.data[i];
  }
  return out;
}

}  // namespace duoflow

#pragma once

#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "duoflow/energy.hpp"
#include "duoflow/flow_solver.hpp"
#include "duoflow/image.hpp"
#include "duoflow/layer_solver.hpp"
#include "duoflow/metrics.hpp"

namespace duoflow {

struct InitPolicy {
  enum Kind {
    kZeroForeground,  // static: L2 = 0, naive flow on the composites
    kSuppliedLayers,  // dynamic: four layer images given, flows computed
    kSuppliedFlows,   // flows given, layers from one layer solve
  };
  Kind kind = kZeroForeground;
  std::optional<LayerDecomposition> layers;  // kSuppliedLayers
  bool repair_layers = false;  // clip + renormalize instead of rejecting
  std::optional<FlowField> flow_u, flow_v;  // kSuppliedFlows
};

struct SolverConfig {
  Weights weights{};
  double c = 0.25;
  int outer_iters = 25;
  IrlsConfig irls{};
  RelaxConfig relax{};
  InitPolicy init{};
  double stop_tol = 0.0;  // relative energy decrease stop; 0 = fixed count
};

/// Optional references for per-iteration error tracking.
struct GroundTruth {
  std::optional<FlowField> flow_u;
  std::optional<FlowField> flow_v;
  std::optional<Image> l2;
};

struct TraceRecord {
  int iter = 0;
  EnergyBreakdown energy{};
  std::optional<double> epe_u, epe_v, layer_err;
  bool layer_step_rejected = false;
  bool flow_step_rejected = false;
};

struct Trace {
  std::vector<TraceRecord> records;
};

struct InitialState {
  LayerDecomposition dec;
  FlowField flow_u;
  FlowField flow_v;
};

namespace detail {

inline LayerDecomposition zero_foreground_decomposition(const Image& frame0,
                                                        const Image& frame1,
                                                        double c) {
  LayerDecomposition dec;
  dec.c = c;
  dec.l1 = frame0;
  dec.l1p = frame1;
  dec.l2 = Image(frame0.height, frame0.width, frame0.channels);
  dec.l2p = dec.l2;
  return dec;
}

}  // namespace detail

/// Starting point of the alternation. ZeroForeground follows the static
/// protocol (all-zero foreground, then a naive flow on the raw composites);
/// SuppliedLayers validates the additive and bound constraints and either
/// rejects or repairs (clip L2 into bounds, re-derive L1 = I - L2).
inline InitialState initialize(Mode mode, const Image& frame0,
                               const Image& frame1, const SolverConfig& cfg) {
  require(frame0.same_shape(frame1), "initialize: frame shape mismatch");
  InitialState st;
  const int h = frame0.height, w = frame0.width;
  switch (cfg.init.kind) {
    case InitPolicy::kZeroForeground: {
      require(mode == Mode::kStaticForeground,
              "initialize: ZeroForeground requires static mode (a dynamic "
              "run needs supplied layers or flows)");
      st.dec = detail::zero_foreground_decomposition(frame0, frame1, cfg.c);
      FlowProblem naive{frame0, frame1, cfg.weights.lambda_f,
                        cfg.weights.tgv_order, cfg.weights.tgv_alpha};
      st.flow_u = solve_single_flow(naive, FlowField(h, w), cfg.relax);
      st.flow_v = FlowField(h, w);
      return st;
    }
    case InitPolicy::kSuppliedLayers: {
      require(cfg.init.layers.has_value(),
              "initialize: SuppliedLayers policy without layers");
      LayerDecomposition dec = *cfg.init.layers;
      require(dec.same_shape() && dec.l1.same_shape(frame0),
              "initialize: supplied layer shape mismatch");
      dec.c = cfg.c;
      const double residual = decomposition_residual(dec, frame0, frame1);
      const double bounds = bound_violation(dec, frame0, frame1);
      if (residual > 1e-6 || bounds > 1e-9) {
        if (!cfg.init.repair_layers) {
          throw std::invalid_argument(
              "initialize: supplied layers violate the additive or bound "
              "constraints (residual " + std::to_string(residual) +
              ", bound violation " + std::to_string(bounds) +
              "); enable repair to clip L2 and renormalize L1 = I - L2");
        }
        for (std::size_t i = 0; i < frame0.data.size(); ++i) {
          dec.l2.data[i] = std::clamp(dec.l2.data[i], 0.0,
                                      std::min(frame0.data[i], cfg.c));
          dec.l2p.data[i] = std::clamp(dec.l2p.data[i], 0.0,
                                       std::min(frame1.data[i], cfg.c));
          dec.l1.data[i] = frame0.data[i] - dec.l2.data[i];
          dec.l1p.data[i] = frame1.data[i] - dec.l2p.data[i];
        }
      }
      if (mode == Mode::kStaticForeground) {
        dec.l2p = dec.l2;
        for (std::size_t i = 0; i < frame0.data.size(); ++i)
          dec.l1p.data[i] = frame1.data[i] - dec.l2p.data[i];
      }
      st.dec = std::move(dec);
      FlowProblem pu{st.dec.l1, st.dec.l1p, cfg.weights.lambda_f,
                     cfg.weights.tgv_order, cfg.weights.tgv_alpha};
      st.flow_u = solve_single_flow(pu, FlowField(h, w), cfg.relax);
      if (mode == Mode::kDynamicForeground) {
        FlowProblem pv{st.dec.l2, st.dec.l2p, cfg.weights.lambda_f,
                       cfg.weights.tgv_order, cfg.weights.tgv_alpha};
        st.flow_v = solve_single_flow(pv, FlowField(h, w), cfg.relax);
      } else {
        st.flow_v = FlowField(h, w);
      }
      return st;
    }
    case InitPolicy::kSuppliedFlows: {
      require(cfg.init.flow_u.has_value(),
              "initialize: SuppliedFlows policy without U");
      st.flow_u = *cfg.init.flow_u;
      st.flow_v = (mode == Mode::kDynamicForeground && cfg.init.flow_v)
                      ? *cfg.init.flow_v
                      : FlowField(h, w);
      require(st.flow_u.height == h && st.flow_u.width == w &&
                  st.flow_v.height == h && st.flow_v.width == w,
              "initialize: supplied flow shape mismatch");
      const LayerDecomposition zero =
          detail::zero_foreground_decomposition(frame0, frame1, cfg.c);
      st.dec = solve_layers(frame0, frame1, st.flow_u, st.flow_v, cfg.weights,
                            cfg.c, zero, mode, cfg.irls);
      return st;
    }
  }
  throw std::logic_error("initialize: unreachable");
}

struct AlternateResult {
  LayerDecomposition dec;
  FlowField flow_u;
  FlowField flow_v;
  FlowField initial_u;  // flows right after initialization (the naive flow
  FlowField initial_v;  // in the static zero-foreground protocol)
  Trace trace;
};

namespace detail {

inline constexpr double kAcceptRelTol = 1e-6;

inline void fill_metrics(TraceRecord& rec, const LayerDecomposition& dec,
                         const FlowField& u, const FlowField& v,
                         const GroundTruth* gt) {
  if (!gt) return;
  if (gt->flow_u) rec.epe_u = epe_mean(u, *gt->flow_u);
  if (gt->flow_v) rec.epe_v = epe_mean(v, *gt->flow_v);
  if (gt->l2) rec.layer_err = layer_error_ncc(*gt->l2, dec.l2);
}

}  // namespace detail

/// Outer block coordinate descent: layer half-step, then flow half-step,
/// each guarded against energy increase (a worsening half-step is rejected
/// and the previous value kept, so accepted trace totals are non-increasing
/// within the tolerance).
inline AlternateResult alternate(const Image& frame0, const Image& frame1,
                                 Mode mode, const SolverConfig& cfg,
                                 const GroundTruth* gt = nullptr) {
  require(frame0.same_shape(frame1), "alternate: frame shape mismatch");
  for (std::size_t i = 0; i < frame0.data.size(); ++i) {
    const double a = frame0.data[i], b = frame1.data[i];
    if (!std::isfinite(a) || !std::isfinite(b) || a < 0.0 || a > 1.0 ||
        b < 0.0 || b > 1.0)
      throw std::invalid_argument("alternate: inputs must lie in [0, 1]");
  }

  AlternateResult out;
  InitialState st = initialize(mode, frame0, frame1, cfg);
  out.dec = std::move(st.dec);
  out.flow_u = std::move(st.flow_u);
  out.flow_v = std::move(st.flow_v);
  out.initial_u = out.flow_u;
  out.initial_v = out.flow_v;

  EnergyBreakdown energy =
      total_energy(out.dec, out.flow_u, out.flow_v, cfg.weights);
  TraceRecord rec0;
  rec0.iter = 0;
  rec0.energy = energy;
  detail::fill_metrics(rec0, out.dec, out.flow_u, out.flow_v, gt);
  out.trace.records.push_back(rec0);

  for (int it = 1; it <= cfg.outer_iters; ++it) {
    TraceRecord rec;
    rec.iter = it;
    const double prev_total = energy.total;

    LayerDecomposition cand_dec =
        solve_layers(frame0, frame1, out.flow_u, out.flow_v, cfg.weights,
                     cfg.c, out.dec, mode, cfg.irls);
    EnergyBreakdown cand_energy =
        total_energy(cand_dec, out.flow_u, out.flow_v, cfg.weights);
    if (cand_energy.total <=
        energy.total * (1.0 + detail::kAcceptRelTol) + 1e-12) {
      out.dec = std::move(cand_dec);
      energy = cand_energy;
    } else {
      rec.layer_step_rejected = true;
    }

    auto [cand_u, cand_v] = solve_flows(out.dec, out.flow_u, out.flow_v,
                                        cfg.weights, cfg.relax, mode);
    cand_energy = total_energy(out.dec, cand_u, cand_v, cfg.weights);
    if (cand_energy.total <=
        energy.total * (1.0 + detail::kAcceptRelTol) + 1e-12) {
      out.flow_u = std::move(cand_u);
      out.flow_v = std::move(cand_v);
      energy = cand_energy;
    } else {
      rec.flow_step_rejected = true;
    }

    rec.energy = energy;
    detail::fill_metrics(rec, out.dec, out.flow_u, out.flow_v, gt);
    out.trace.records.push_back(rec);

    if (cfg.stop_tol > 0.0) {
      const double decrease = prev_total - energy.total;
      if (decrease < cfg.stop_tol * std::max(prev_total, 1e-12)) break;
    }
  }
  return out;
}

struct ConvergenceReport {
  std::string csv;
  std::string summary;
};

/// Per-iteration CSV (header always present) plus a terminal summary line.
inline ConvergenceReport convergence_report(const Trace& trace) {
  ConvergenceReport rep;
  rep.csv = "iter,e_b,e_l,e_f,total,epe_u,epe_v,layer_err\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) {
    return v ? num(*v) : std::string();
  };
  for (const TraceRecord& r : trace.records) {
    rep.csv += std::to_string(r.iter) + "," + num(r.energy.e_b) + "," +
               num(r.energy.e_l) + "," + num(r.energy.e_f) + "," +
               num(r.energy.total) + "," + opt(r.epe_u) + "," + opt(r.epe_v) +
               "," + opt(r.layer_err) + "\n";
  }
  if (trace.records.empty()) {
    rep.summary = "no iterations recorded";
  } else {
    const TraceRecord& first = trace.records.front();
    const TraceRecord& last = trace.records.back();
    rep.summary = "iterations: " + std::to_string(last.iter) +
                  ", energy: " + num(first.energy.total) + " -> " +
                  num(last.energy.total);
    if (first.epe_u && last.epe_u)
      rep.summary +=
          ", epe_u: " + num(*first.epe_u) + " -> " + num(*last.epe_u);
    if (first.epe_v && last.epe_v)
      rep.summary +=
          ", epe_v: " + num(*first.epe_v) + " -> " + num(*last.epe_v);
    if (first.layer_err && last.layer_err)
      rep.summary += ", layer_err: " + num(*first.layer_err) + " -> " +
                     num(*last.layer_err);
  }
  return rep;
}

}  // namespace duoflow

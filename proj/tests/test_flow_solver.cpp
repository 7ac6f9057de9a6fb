#include <catch2/catch_amalgamated.hpp>

#include "duoflow/flow_solver.hpp"
#include "duoflow/metrics.hpp"
#include "duoflow/synth.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace duoflow;
using Catch::Approx;

TEST_CASE("data prox on identical frames returns exactly zero flow") {
  const Image f = testing::random_image(8, 8, 1, 1, 0.1, 0.9);
  const FlowField out =
      data_prox(f, f, FlowField(8, 8), FlowField(8, 8), 0.25);
  for (double v : out.u) REQUIRE(v == 0.0);
  for (double v : out.v) REQUIRE(v == 0.0);
}

TEST_CASE("data prox recovers a subpixel shift of a ramp in closed form") {
  const int h = 6, w = 16;
  const double delta = 0.3;
  Image f1(h, w, 1), f0(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      f1.at(y, x, 0) = static_cast<double>(x) / w;
      f0.at(y, x, 0) = (x + delta) / w;
    }
  const double theta = 10.0 * w * w;
  const FlowField out = data_prox(f0, f1, FlowField(h, w), FlowField(h, w),
                                  theta, /*presmooth_sigma=*/0.0);
  // Interior pixels see the exact gradient 1/w and land on delta exactly;
  // the clamped central difference halves the slope at the two border
  // columns, so those are excluded.
  for (int y = 0; y < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      REQUIRE(out.u[out.idx(y, x)] == Approx(delta).margin(1e-10));
      REQUIRE(out.v[out.idx(y, x)] == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("data prox returns aux where the image gradient vanishes") {
  const Image f0(6, 6, 1, 0.3), f1(6, 6, 1, 0.6);
  const FlowField aux = testing::random_flow(6, 6, 2, 1.0);
  const FlowField out = data_prox(f0, f1, FlowField(6, 6), aux, 0.25);
  REQUIRE(out.u == aux.u);
  REQUIRE(out.v == aux.v);
}

TEST_CASE("data prox never increases the per-pixel objective") {
  for (int channels : {1, 3}) {
    const Image f0 = testing::random_image(7, 7, channels, 11, 0.1, 0.9);
    const Image f1 = testing::random_image(7, 7, channels, 12, 0.1, 0.9);
    const FlowField base = testing::random_flow(7, 7, 13, 0.5);
    const FlowField aux = testing::random_flow(7, 7, 14, 1.0);
    const double theta = 0.3;

    const Image f1b = gaussian_blur(f1, 0.0);
    const GradientPair g1 = detail::central_gradient(f1b);
    const detail::LinearizedData lin = detail::linearize(f0, f1b, g1, base);
    const FlowField out = detail::data_prox_step(lin, aux, theta);

    auto objective = [&](int y, int x, double wu, double wv) {
      const std::size_t i = lin.valid.at(y, x) ? aux.idx(y, x) : 0;
      double val = 0.0;
      for (int c = 0; c < channels; ++c) {
        const std::size_t k = aux.idx(y, x) * channels + c;
        val += std::abs(lin.rho_c[k] + lin.gx[k] * wu + lin.gy[k] * wv);
      }
      const double du = wu - aux.u[aux.idx(y, x)];
      const double dv = wv - aux.v[aux.idx(y, x)];
      (void)i;
      return val + (du * du + dv * dv) / (2.0 * theta);
    };
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 7; ++x) {
        if (!lin.valid.at(y, x)) continue;
        const std::size_t i = aux.idx(y, x);
        REQUIRE(objective(y, x, out.u[i], out.v[i]) <=
                objective(y, x, aux.u[i], aux.v[i]) + 1e-12);
      }
  }
}

TEST_CASE("multi-channel data prox matches a dense 1-D search") {
  const Image f0 = testing::random_image(5, 5, 3, 21, 0.1, 0.9);
  const Image f1 = testing::random_image(5, 5, 3, 22, 0.1, 0.9);
  const FlowField aux = testing::random_flow(5, 5, 23, 0.6);
  const double theta = 0.4;
  const GradientPair g1 = detail::central_gradient(f1);
  const detail::LinearizedData lin =
      detail::linearize(f0, f1, g1, FlowField(5, 5));
  const FlowField out = detail::data_prox_step(lin, aux, theta);

  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      const std::size_t i = aux.idx(y, x);
      // Dominant-direction line search objective, evaluated densely.
      int dom = 0;
      double best = -1.0;
      for (int c = 0; c < 3; ++c) {
        const std::size_t k = i * 3 + c;
        const double g2 = lin.gx[k] * lin.gx[k] + lin.gy[k] * lin.gy[k];
        if (g2 > best) {
          best = g2;
          dom = c;
        }
      }
      const double dx = lin.gx[i * 3 + dom], dy = lin.gy[i * 3 + dom];
      const double n2 = dx * dx + dy * dy;
      if (n2 < 1e-12) continue;
      auto phi = [&](double t) {
        double v = t * t * n2 / (2.0 * theta);
        for (int c = 0; c < 3; ++c) {
          const std::size_t k = i * 3 + c;
          v += std::abs(lin.rho_c[k] + lin.gx[k] * (aux.u[i] + t * dx) +
                        lin.gy[k] * (aux.v[i] + t * dy));
        }
        return v;
      };
      const double t_got = (out.u[i] - aux.u[i]) / dx;
      double t_best = 0.0, v_best = phi(0.0);
      for (int k = -4000; k <= 4000; ++k) {
        const double t = k * 1e-3;
        const double v = phi(t);
        if (v < v_best) {
          v_best = v;
          t_best = t;
        }
      }
      REQUIRE(phi(t_got) <= v_best + 1e-9);
      (void)t_best;
    }
}

TEST_CASE("TV prox: constant target is returned unchanged") {
  const FlowField target(6, 6, 0.7, -0.4);
  const SmoothProxResult r = smooth_prox_tv(target, 0.5, 100);
  REQUIRE(r.flow.u == target.u);
  REQUIRE(r.flow.v == target.v);
}

TEST_CASE("TV prox: zero weight is the identity") {
  const FlowField target = testing::random_flow(6, 6, 31, 2.0);
  const SmoothProxResult r = smooth_prox_tv(target, 0.0, 100);
  REQUIRE(r.flow.u == target.u);
  REQUIRE(r.flow.v == target.v);
}

TEST_CASE("TV prox matches the dual projected-gradient oracle") {
  const int h = 8, w = 8;
  const FlowField target = testing::random_flow(h, w, 32, 1.5);
  const double weight = 0.35;
  const SmoothProxResult r = smooth_prox_tv(target, weight, 4000);
  REQUIRE(r.pd_gap >= -1e-9);
  REQUIRE(r.pd_gap < 1e-5);
  const detail::Field oracle_u =
      testing::rof_dual_oracle(target.u, h, w, weight);
  const detail::Field oracle_v =
      testing::rof_dual_oracle(target.v, h, w, weight);
  REQUIRE(testing::rms(r.flow.u, oracle_u) <= 1e-3);
  REQUIRE(testing::rms(r.flow.v, oracle_v) <= 1e-3);
}

TEST_CASE("TV prox decreases both TV and the prox objective") {
  const FlowField target = testing::random_flow(9, 9, 33, 2.0);
  const double weight = 0.25;
  const SmoothProxResult r = smooth_prox_tv(target, weight, 300);
  auto objective = [&](const FlowField& f) {
    double fit = 0.0;
    for (std::size_t i = 0; i < f.u.size(); ++i) {
      fit += (f.u[i] - target.u[i]) * (f.u[i] - target.u[i]);
      fit += (f.v[i] - target.v[i]) * (f.v[i] - target.v[i]);
    }
    return weight * flow_prior_tv(f) + 0.5 * fit;
  };
  REQUIRE(flow_prior_tv(r.flow) <= flow_prior_tv(target) + 1e-12);
  REQUIRE(objective(r.flow) <= objective(target) + 1e-12);
}

TEST_CASE("TGV2 prox: affine target is returned unchanged") {
  const int h = 7, w = 9;
  FlowField target(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      target.u[target.idx(y, x)] = 0.2 + 0.4 * x - 0.1 * y;
      target.v[target.idx(y, x)] = -0.5 + 0.05 * x + 0.3 * y;
    }
  const SmoothProxResult r = smooth_prox_tgv2(
      target, 0.5, TgvAlpha{}, 200, PdSteps{1.0 / std::sqrt(12.0),
                                            1.0 / std::sqrt(12.0)});
  REQUIRE(r.flow.u == target.u);
  REQUIRE(r.flow.v == target.v);
}

TEST_CASE("TGV2 prox: zero weight is the identity") {
  const FlowField target = testing::random_flow(6, 6, 41, 2.0);
  const SmoothProxResult r = smooth_prox_tgv2(
      target, 0.0, TgvAlpha{}, 100,
      PdSteps{1.0 / std::sqrt(12.0), 1.0 / std::sqrt(12.0)});
  REQUIRE(r.flow.u == target.u);
  REQUIRE(r.flow.v == target.v);
}

TEST_CASE("TGV2 prox agrees with a long-run oracle") {
  const int h = 8, w = 8;
  const FlowField target = testing::random_flow(h, w, 42, 1.5);
  const double weight = 0.3;
  const PdSteps steps{1.0 / std::sqrt(12.0), 1.0 / std::sqrt(12.0)};
  const SmoothProxResult fast =
      smooth_prox_tgv2(target, weight, TgvAlpha{}, 3000, steps);
  const SmoothProxResult oracle =
      smooth_prox_tgv2(target, weight, TgvAlpha{}, 30000, steps);
  REQUIRE(testing::rms(fast.flow.u, oracle.flow.u) <= 1e-3);
  REQUIRE(testing::rms(fast.flow.v, oracle.flow.v) <= 1e-3);
}

TEST_CASE("single flow solve recovers a global integer translation") {
  std::mt19937 rng(51);
  const Image bg = detail::noise_background(64, 64, 1, 0.2, 0.75, rng);
  const FlowField gt = make_flow(FlowSpec::constant(3.0, 0.0), 64, 64);
  const GroundTruthBundle pair = render_pair(
      bg, Image(64, 64, 1, 0.0), gt, FlowField(64, 64),
      Mode::kStaticForeground, 0.25);

  FlowProblem prob{pair.dec.l1, pair.dec.l1p, 0.1, 1, TgvAlpha{}};
  const FlowField est =
      solve_single_flow(prob, FlowField(64, 64), RelaxConfig{});
  REQUIRE(epe_mean(est, gt) < 0.5);
}

TEST_CASE("identical frames with zero init return exactly zero flow") {
  const Image f = testing::random_image(40, 40, 1, 52, 0.1, 0.9);
  FlowProblem prob{f, f, 0.1, 1, TgvAlpha{}};
  const FlowField est =
      solve_single_flow(prob, FlowField(40, 40), RelaxConfig{});
  for (double v : est.u) REQUIRE(v == 0.0);
  for (double v : est.v) REQUIRE(v == 0.0);
}

TEST_CASE("single flow solve tracks a smooth ground-truth field") {
  std::mt19937 rng(53);
  const Image bg = detail::noise_background(64, 64, 1, 0.2, 0.75, rng);
  const FlowField gt =
      make_flow(FlowSpec::smooth_random(3.5, 10.0, 54), 64, 64);
  const GroundTruthBundle pair = render_pair(
      bg, Image(64, 64, 1, 0.0), gt, FlowField(64, 64),
      Mode::kStaticForeground, 0.25);

  FlowProblem prob{pair.dec.l1, pair.dec.l1p, 0.1, 1, TgvAlpha{}};
  const FlowField est =
      solve_single_flow(prob, FlowField(64, 64), RelaxConfig{});
  REQUIRE(epe_mean(est, gt) < 0.5);
}

TEST_CASE("flow solve does not increase the single-layer energy") {
  std::mt19937 rng(55);
  const Image bg = detail::noise_background(48, 48, 1, 0.2, 0.7, rng);
  const FlowField gt = make_flow(FlowSpec::constant(2.0, 1.0), 48, 48);
  const GroundTruthBundle pair =
      render_pair(bg, Image(48, 48, 1, 0.0), gt, FlowField(48, 48),
                  Mode::kStaticForeground, 0.25);
  const double lambda_f = 0.1;

  auto energy = [&](const FlowField& flow) {
    LayerDecomposition dec;
    dec.l1 = pair.dec.l1;
    dec.l1p = pair.dec.l1p;
    dec.l2 = Image(48, 48, 1, 0.0);
    dec.l2p = dec.l2;
    return data_term(dec, flow, FlowField(48, 48)) +
           lambda_f * flow_prior_tv(flow);
  };

  FlowProblem prob{pair.dec.l1, pair.dec.l1p, lambda_f, 1, TgvAlpha{}};
  const FlowField init(48, 48);
  const FlowField est = solve_single_flow(prob, init, RelaxConfig{});
  REQUIRE(energy(est) <= energy(init) * (1.0 + 1e-6));
}

TEST_CASE("static mode returns an exactly zero foreground flow") {
  std::mt19937 rng(57);
  const Image bg = detail::noise_background(32, 32, 1, 0.2, 0.7, rng);
  const Image fg = detail::rain_streaks(32, 32, 1, 0.2, 3, rng);
  const GroundTruthBundle b =
      render_pair(bg, fg, make_flow(FlowSpec::constant(1.0, 0.0), 32, 32),
                  FlowField(32, 32), Mode::kStaticForeground, 0.25);
  const auto [u, v] = solve_flows(b.dec, FlowField(32, 32), FlowField(32, 32),
                                  Weights{}, RelaxConfig{},
                                  Mode::kStaticForeground);
  for (double x : v.u) REQUIRE(x == 0.0);
  for (double x : v.v) REQUIRE(x == 0.0);
}

TEST_CASE("constant layers leave constant inits unchanged") {
  LayerDecomposition dec;
  dec.l1 = Image(32, 32, 1, 0.5);
  dec.l1p = dec.l1;
  dec.l2 = Image(32, 32, 1, 0.1);
  dec.l2p = dec.l2;
  const FlowField u_init(32, 32, 0.8, -0.3);
  const FlowField v_init(32, 32, -0.5, 0.25);
  const auto [u, v] = solve_flows(dec, u_init, v_init, Weights{},
                                  RelaxConfig{}, Mode::kDynamicForeground);
  for (std::size_t i = 0; i < u.u.size(); ++i) {
    REQUIRE(u.u[i] == Approx(0.8).margin(1e-12));
    REQUIRE(u.v[i] == Approx(-0.3).margin(1e-12));
    REQUIRE(v.u[i] == Approx(-0.5).margin(1e-12));
    REQUIRE(v.v[i] == Approx(0.25).margin(1e-12));
  }
}

TEST_CASE("solving U never reads the foreground pair, and vice versa") {
  std::mt19937 rng(58);
  const Image bg = detail::noise_background(32, 32, 1, 0.2, 0.7, rng);
  const Image fg = detail::rain_streaks(32, 32, 1, 0.2, 3, rng);
  const GroundTruthBundle b = render_pair(
      bg, fg, make_flow(FlowSpec::constant(1.5, -0.5), 32, 32),
      make_flow(FlowSpec::constant(-1.0, 0.5), 32, 32),
      Mode::kDynamicForeground, 0.25);

  const auto [u1, v1] = solve_flows(b.dec, FlowField(32, 32),
                                    FlowField(32, 32), Weights{},
                                    RelaxConfig{}, Mode::kDynamicForeground);
  LayerDecomposition mutated = b.dec;
  for (auto& x : mutated.l2.data) x = 0.2 - x;
  for (auto& x : mutated.l2p.data) x = std::min(0.25, x + 0.03);
  const auto [u2, v2] = solve_flows(mutated, FlowField(32, 32),
                                    FlowField(32, 32), Weights{},
                                    RelaxConfig{}, Mode::kDynamicForeground);
  REQUIRE(u1.u == u2.u);
  REQUIRE(u1.v == u2.v);

  LayerDecomposition mutated_bg = b.dec;
  for (auto& x : mutated_bg.l1.data) x = std::clamp(0.9 - x, 0.0, 1.0);
  const auto [u3, v3] = solve_flows(mutated_bg, FlowField(32, 32),
                                    FlowField(32, 32), Weights{},
                                    RelaxConfig{}, Mode::kDynamicForeground);
  REQUIRE(v1.u == v3.u);
  REQUIRE(v1.v == v3.v);
}

TEST_CASE("dynamic flows attach to their own layers") {
  std::mt19937 rng(59);
  const Image bg = detail::noise_background(48, 48, 1, 0.2, 0.68, rng);
  const Image fg = detail::rain_streaks(48, 48, 1, 0.2, 6, rng);
  const GroundTruthBundle b = render_pair(
      bg, fg, make_flow(FlowSpec::smooth_random(2.0, 8.0, 60), 48, 48),
      make_flow(FlowSpec::constant(-1.5, 1.0), 48, 48),
      Mode::kDynamicForeground, 0.25);

  const auto [u, v] = solve_flows(b.dec, FlowField(48, 48), FlowField(48, 48),
                                  Weights{}, RelaxConfig{},
                                  Mode::kDynamicForeground);
  REQUIRE(epe_mean(u, b.gt_u) < epe_mean(u, b.gt_v));
  REQUIRE(epe_mean(v, b.gt_v) < epe_mean(v, b.gt_u));
}

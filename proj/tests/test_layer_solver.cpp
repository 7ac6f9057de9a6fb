#include <catch2/catch_amalgamated.hpp>

#include "duoflow/layer_solver.hpp"
#include "duoflow/metrics.hpp"
#include "duoflow/synth.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace duoflow;
using Catch::Approx;

namespace {

// Stack a decomposition the way the solver orders its unknowns.
std::vector<double> stack_unknowns(const LayerDecomposition& dec, Mode mode) {
  std::vector<double> l = dec.l2.data;
  if (mode == Mode::kDynamicForeground)
    l.insert(l.end(), dec.l2p.data.begin(), dec.l2p.data.end());
  return l;
}

}  // namespace

TEST_CASE("assemble: 2x2 gray pair with zero flows, row-by-row") {
  const Image i0 = testing::random_image(2, 2, 1, 1, 0.3, 0.7);
  const Image i1 = testing::random_image(2, 2, 1, 2, 0.3, 0.7);
  Weights w;
  w.lambda_l = 1.0;
  const SparseL1System sys =
      assemble_system(i0, i1, FlowField(2, 2), FlowField(2, 2), w, 0.25,
                      Mode::kDynamicForeground);
  REQUIRE(sys.unknowns == 8);
  // 4 + 4 BCC rows plus 4 layers x 4 gradient rows.
  REQUIRE(sys.rows.size() == 24);

  // First BCC row at pixel (0,0): -L2(0,0) + L2'(0,0), b = I'(0,0) - I(0,0).
  const SparseRow& r0 = sys.rows[0];
  REQUIRE(r0.n == 2);
  REQUIRE(r0.idx[0] == 0);
  REQUIRE(r0.coef[0] == -1.0);
  REQUIRE(r0.idx[1] == 4);
  REQUIRE(r0.coef[1] == 1.0);
  REQUIRE(r0.b == Approx(i1.at(0, 0, 0) - i0.at(0, 0, 0)).margin(1e-15));

  for (const SparseRow& r : sys.rows) {
    REQUIRE(r.n <= SparseRow::kCapacity);
    for (int k = 0; k < r.n; ++k)
      REQUIRE(std::abs(r.coef[k]) == Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("assemble: c = 0 collapses all bounds to zero") {
  const Image i0 = testing::random_image(3, 3, 1, 3, 0.2, 0.8);
  const Image i1 = testing::random_image(3, 3, 1, 4, 0.2, 0.8);
  const SparseL1System sys =
      assemble_system(i0, i1, FlowField(3, 3), FlowField(3, 3), Weights{}, 0.0,
                      Mode::kDynamicForeground);
  for (int j = 0; j < sys.unknowns; ++j) {
    REQUIRE(sys.lb[j] == 0.0);
    REQUIRE(sys.ub[j] == 0.0);
  }
}

TEST_CASE("assemble: integer flow couples exactly one shifted unknown") {
  const Image i0 = testing::random_image(3, 4, 1, 5, 0.2, 0.8);
  const Image i1 = testing::random_image(3, 4, 1, 6, 0.2, 0.8);
  const SparseL1System sys =
      assemble_system(i0, i1, FlowField(3, 4, 1.0, 0.0), FlowField(3, 4),
                      Weights{}, 0.25, Mode::kDynamicForeground);
  // First BCC rows come first: one per valid pixel (x < 3), channel-major.
  int row = 0;
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 3; ++x) {
      const SparseRow& r = sys.rows[row++];
      REQUIRE(r.n == 2);
      REQUIRE(r.idx[0] == y * 4 + x);          // -L2 at the pixel
      REQUIRE(r.coef[0] == -1.0);
      REQUIRE(r.idx[1] == 12 + y * 4 + x + 1);  // +L2' at the shifted pixel
      REQUIRE(r.coef[1] == 1.0);
    }
  }
}

TEST_CASE("system objective matches the energy evaluation") {
  // The assembled rows must express E_B + lambda_L * E_L exactly for any
  // feasible decomposition, masked pixels excluded on both sides.
  const int h = 6, w = 7;
  const Image i0 = testing::random_image(h, w, 1, 7, 0.3, 0.9);
  const Image i1 = testing::random_image(h, w, 1, 8, 0.3, 0.9);
  const FlowField u = testing::random_flow(h, w, 9, 1.5);
  const FlowField v = testing::random_flow(h, w, 10, 1.5);
  Weights weights;
  weights.lambda_l = 0.63;

  LayerDecomposition dec;
  dec.c = 0.25;
  dec.l2 = testing::random_image(h, w, 1, 11, 0.0, 0.2);
  dec.l2p = testing::random_image(h, w, 1, 12, 0.0, 0.2);
  dec.l1 = Image(h, w, 1);
  dec.l1p = Image(h, w, 1);
  for (std::size_t i = 0; i < i0.data.size(); ++i) {
    dec.l1.data[i] = i0.data[i] - dec.l2.data[i];
    dec.l1p.data[i] = i1.data[i] - dec.l2p.data[i];
  }

  const SparseL1System sys = assemble_system(i0, i1, u, v, weights, dec.c,
                                             Mode::kDynamicForeground);
  const double via_rows =
      system_l1_objective(sys, stack_unknowns(dec, Mode::kDynamicForeground));
  const double via_energy =
      data_term(dec, u, v) + weights.lambda_l * layer_prior(dec);
  REQUIRE(via_rows == Approx(via_energy).margin(1e-10));
}

TEST_CASE("irls: zero right-hand side returns zero in one iteration") {
  const Image i0(4, 4, 1, 0.5);
  const Image i1(4, 4, 1, 0.5);
  const SparseL1System sys =
      assemble_system(i0, i1, FlowField(4, 4), FlowField(4, 4), Weights{},
                      0.25, Mode::kDynamicForeground);
  const IrlsResult res =
      irls_solve(sys, std::vector<double>(sys.unknowns, 0.0), IrlsConfig{});
  REQUIRE(res.outer_iters == 1);
  for (double v : res.values) REQUIRE(v == 0.0);
}

TEST_CASE("irls objective is monotone and feasibility exact") {
  const int h = 8, w = 8;
  const Image i0 = testing::random_image(h, w, 1, 21, 0.1, 0.9);
  const Image i1 = testing::random_image(h, w, 1, 22, 0.1, 0.9);
  const FlowField u = testing::random_flow(h, w, 23, 1.0);
  const SparseL1System sys = assemble_system(
      i0, i1, u, FlowField(h, w), Weights{}, 0.25, Mode::kDynamicForeground);
  const std::vector<double> init(sys.unknowns, 0.1);

  IrlsConfig cfg;
  double prev = system_huber_objective(sys, init, cfg.epsilon);
  for (int outers = 1; outers <= 6; ++outers) {
    cfg.max_outer = outers;
    const IrlsResult res = irls_solve(sys, init, cfg);
    REQUIRE(res.objective <= prev * (1.0 + 1e-8) + 1e-12);
    prev = res.objective;
    for (int j = 0; j < sys.unknowns; ++j) {
      REQUIRE(res.values[j] >= sys.lb[j]);
      REQUIRE(res.values[j] <= sys.ub[j]);
    }
  }
}

TEST_CASE("irls flags an infeasible warm start and clips it") {
  const Image i0(3, 3, 1, 0.5);
  const Image i1(3, 3, 1, 0.5);
  const SparseL1System sys =
      assemble_system(i0, i1, FlowField(3, 3), FlowField(3, 3), Weights{},
                      0.25, Mode::kDynamicForeground);
  const IrlsResult res =
      irls_solve(sys, std::vector<double>(sys.unknowns, 0.9), IrlsConfig{});
  REQUIRE(res.init_clipped);
  for (int j = 0; j < sys.unknowns; ++j) REQUIRE(res.values[j] <= sys.ub[j]);
}

TEST_CASE("irls rejects non-finite systems") {
  SparseL1System sys;
  sys.unknowns = 1;
  sys.lb = {0.0};
  sys.ub = {1.0};
  SparseRow r;
  r.add(0, 1.0);
  r.b = std::numeric_limits<double>::quiet_NaN();
  sys.rows.push_back(r);
  REQUIRE_THROWS_AS(irls_solve(sys, {0.0}, IrlsConfig{}),
                    std::invalid_argument);
}

TEST_CASE("irls objective is within 1% of the LP oracle on 8x8 systems") {
  for (std::uint32_t trial = 0; trial < 3; ++trial) {
    const int h = 8, w = 8;
    const Image i0 = testing::random_image(h, w, 1, 100 + trial, 0.1, 0.9);
    const Image i1 = testing::random_image(h, w, 1, 200 + trial, 0.1, 0.9);
    const FlowField u = testing::random_flow(h, w, 300 + trial, 1.2);
    const FlowField v = testing::random_flow(h, w, 400 + trial, 1.2);
    Weights weights;
    weights.lambda_l = 0.4 + 0.2 * trial;
    const SparseL1System sys = assemble_system(i0, i1, u, v, weights, 0.25,
                                               Mode::kDynamicForeground);

    IrlsConfig cfg;
    cfg.max_outer = 60;
    cfg.inner_sweeps = 40;
    cfg.objective_tol = 1e-10;
    const IrlsResult irls =
        irls_solve(sys, std::vector<double>(sys.unknowns, 0.0), cfg);
    const testing::LpOracleResult lp = testing::lp_oracle_solve(sys);
    REQUIRE(lp.gap <= 1e-4 * std::max(1.0, lp.optimum));
    REQUIRE(irls.l1_objective <= 1.01 * lp.optimum + 1e-9);
  }
}

TEST_CASE("solve_layers recovers pinned ground-truth layers") {
  // Static composite with an exactly representable integer flow. A dark
  // corner (I = 0) pins the global layer shift, making the optimum unique.
  const int h = 12, w = 12;
  Image bg(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      bg.at(y, x, 0) =
          0.4 + 0.18 * std::sin(0.7 * x + 0.3) * std::cos(0.5 * y - 0.2);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) bg.at(y, x, 0) = 0.0;

  Image fg(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (int col : {6, 9}) {
        const double d = x - col;
        const double g = 0.18 * std::exp(-0.5 * d * d);
        if (g > 1e-4) v += g;
      }
      fg.at(y, x, 0) = std::min(v, 0.2);
    }

  const GroundTruthBundle gt =
      render_pair(bg, fg, make_flow(FlowSpec::constant(1.0, 0.0), h, w),
                  FlowField(h, w), Mode::kStaticForeground, 0.25);

  Weights weights;
  weights.lambda_l = 0.5;
  IrlsConfig cfg;
  cfg.epsilon = 1e-5;
  cfg.max_outer = 80;
  cfg.inner_sweeps = 60;
  cfg.objective_tol = 1e-12;
  LayerDecomposition prev;
  prev.c = 0.25;
  prev.l1 = gt.i0;
  prev.l1p = gt.i1;
  prev.l2 = Image(h, w, 1);
  prev.l2p = prev.l2;

  const LayerDecomposition est =
      solve_layers(gt.i0, gt.i1, gt.gt_u, gt.gt_v, weights, 0.25, prev,
                   Mode::kStaticForeground, cfg);
  REQUIRE(testing::rms(est.l2.data, gt.dec.l2.data) <= 1e-3);
}

TEST_CASE("solve_layers at an optimum is a fixed point") {
  const int h = 10, w = 10;
  std::mt19937 rng(31);
  const Image bg = detail::noise_background(h, w, 1, 0.2, 0.7, rng);
  const Image fg = detail::rain_streaks(h, w, 1, 0.2, 2, rng);
  const GroundTruthBundle gt =
      render_pair(bg, fg, make_flow(FlowSpec::constant(1.0, 0.0), h, w),
                  FlowField(h, w), Mode::kStaticForeground, 0.25);

  IrlsConfig cfg;
  cfg.max_outer = 40;
  cfg.inner_sweeps = 40;
  LayerDecomposition prev;
  prev.c = 0.25;
  prev.l1 = gt.i0;
  prev.l1p = gt.i1;
  prev.l2 = Image(h, w, 1);
  prev.l2p = prev.l2;

  const Weights weights{};
  const LayerDecomposition first =
      solve_layers(gt.i0, gt.i1, gt.gt_u, gt.gt_v, weights, 0.25, prev,
                   Mode::kStaticForeground, cfg);
  const LayerDecomposition second =
      solve_layers(gt.i0, gt.i1, gt.gt_u, gt.gt_v, weights, 0.25, first,
                   Mode::kStaticForeground, cfg);

  const double e1 = data_term(first, gt.gt_u, gt.gt_v) +
                    weights.lambda_l * layer_prior(first);
  const double e2 = data_term(second, gt.gt_u, gt.gt_v) +
                    weights.lambda_l * layer_prior(second);
  REQUIRE(e2 <= e1 + 1e-6 * std::max(1.0, e1));
}

TEST_CASE("static mode halves the unknowns and ties the primed layer") {
  const Image i0 = testing::random_image(5, 5, 1, 41, 0.2, 0.8);
  const Image i1 = testing::random_image(5, 5, 1, 42, 0.2, 0.8);
  const SparseL1System dyn =
      assemble_system(i0, i1, FlowField(5, 5), FlowField(5, 5), Weights{},
                      0.25, Mode::kDynamicForeground);
  const SparseL1System sta =
      assemble_system(i0, i1, FlowField(5, 5), FlowField(5, 5), Weights{},
                      0.25, Mode::kStaticForeground);
  REQUIRE(sta.unknowns * 2 == dyn.unknowns);

  LayerDecomposition prev;
  prev.c = 0.25;
  prev.l1 = i0;
  prev.l1p = i1;
  prev.l2 = Image(5, 5, 1);
  prev.l2p = prev.l2;
  const LayerDecomposition out =
      solve_layers(i0, i1, FlowField(5, 5), FlowField(5, 5), Weights{}, 0.25,
                   prev, Mode::kStaticForeground);
  REQUIRE(out.l2p.data == out.l2.data);
  REQUIRE(decomposition_residual(out, i0, i1) == Approx(0.0).margin(1e-15));
}

TEST_CASE("solve_layers beats the zero initialization on a rain composite") {
  const int h = 48, w = 48;
  std::mt19937 rng(51);
  const Image bg = detail::noise_background(h, w, 1, 0.2, 0.7, rng);
  const Image fg = detail::rain_streaks(h, w, 1, 0.2, 5, rng);
  const GroundTruthBundle gt = render_pair(
      bg, fg, make_flow(FlowSpec::smooth_random(2.0, 8.0, 52), h, w),
      FlowField(h, w), Mode::kStaticForeground, 0.25);

  LayerDecomposition prev;
  prev.c = 0.25;
  prev.l1 = gt.i0;
  prev.l1p = gt.i1;
  prev.l2 = Image(h, w, 1);
  prev.l2p = prev.l2;

  const LayerDecomposition est =
      solve_layers(gt.i0, gt.i1, gt.gt_u, gt.gt_v, Weights{}, 0.25, prev,
                   Mode::kStaticForeground, IrlsConfig{});
  const double err_init = layer_error_ncc(gt.dec.l2, prev.l2);
  const double err_est = layer_error_ncc(gt.dec.l2, est.l2);
  REQUIRE(err_init == 1.0);
  REQUIRE(err_est < err_init);
  REQUIRE(err_est < 0.5);
}

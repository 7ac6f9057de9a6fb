#include <catch2/catch_amalgamated.hpp>

#include "duoflow/field_ops.hpp"
#include "duoflow/image.hpp"
#include "duoflow/pyramid.hpp"
#include "test_helpers.hpp"

using namespace duoflow;
using Catch::Approx;

TEST_CASE("compose adds constant fields") {
  const Image l1(4, 5, 1, 0.5), l2(4, 5, 1, 0.2);
  const ComposeResult r = compose(l1, l2);
  REQUIRE_FALSE(r.clipped);
  for (double v : r.image.data) REQUIRE(v == Approx(0.7).epsilon(1e-14));
}

TEST_CASE("compose with zero layer is the identity, bit for bit") {
  const Image l1 = testing::random_image(6, 7, 3, 42, 0.0, 0.9);
  const Image zeros(6, 7, 3, 0.0);
  const ComposeResult r = compose(l1, zeros);
  REQUIRE_FALSE(r.clipped);
  REQUIRE(r.image.data == l1.data);
}

TEST_CASE("compose clamps and reports clipping") {
  const Image l1(3, 3, 1, 0.9), l2(3, 3, 1, 0.2);
  const ComposeResult r = compose(l1, l2);
  REQUIRE(r.clipped);
  for (double v : r.image.data) REQUIRE(v == 1.0);
}

TEST_CASE("compose rejects shape mismatch") {
  REQUIRE_THROWS_AS(compose(Image(3, 3, 1), Image(3, 4, 1)),
                    std::invalid_argument);
}

TEST_CASE("warp with zero flow is exact identity") {
  const Image img = testing::random_image(8, 9, 3, 7);
  const WarpResult r = warp_backward(img, FlowField(8, 9));
  REQUIRE(r.image.data == img.data);
  REQUIRE(r.mask.count_valid() == 8 * 9);
}

TEST_CASE("integer flow warps by exact index shift") {
  const Image img = testing::random_image(6, 6, 1, 11);
  const WarpResult r = warp_backward(img, FlowField(6, 6, 1.0, 0.0));
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 5; ++x) {
      REQUIRE(r.mask.at(y, x));
      REQUIRE(r.image.at(y, x, 0) == img.at(y, x + 1, 0));
    }
    REQUIRE_FALSE(r.mask.at(y, 5));
  }
}

TEST_CASE("half pixel warp of a ramp interpolates bilinearly") {
  // img(y, x) = x / 4; sampling at x + 0.5 averages neighbors.
  Image img(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) img.at(y, x, 0) = x / 4.0;
  const WarpResult r = warp_backward(img, FlowField(4, 4, 0.5, 0.0));
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 3; ++x) {
      REQUIRE(r.mask.at(y, x));
      REQUIRE(r.image.at(y, x, 0) == Approx((x + 0.5) / 4.0).margin(1e-15));
    }
    REQUIRE_FALSE(r.mask.at(y, 3));
  }
}

TEST_CASE("gradient of a constant image vanishes") {
  const GradientPair g = spatial_gradient(Image(5, 6, 3, 0.37));
  for (double v : g.gx.data) REQUIRE(v == 0.0);
  for (double v : g.gy.data) REQUIRE(v == 0.0);
}

TEST_CASE("gradient of a linear ramp is its slope") {
  const double slope = 0.03;
  Image img(5, 6, 1);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 6; ++x) img.at(y, x, 0) = x * slope;
  const GradientPair g = spatial_gradient(img);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 6; ++x) {
      const double want = x + 1 < 6 ? slope : 0.0;
      REQUIRE(g.gx.at(y, x, 0) == Approx(want).margin(1e-15));
      REQUIRE(g.gy.at(y, x, 0) == 0.0);
    }
  }
}

TEST_CASE("gradient on a hand 2x2 instance") {
  Image img(2, 2, 1);
  img.at(0, 0, 0) = 0.0;
  img.at(0, 1, 0) = 1.0;
  img.at(1, 0, 0) = 0.0;
  img.at(1, 1, 0) = 0.0;
  const GradientPair g = spatial_gradient(img);
  REQUIRE(g.gx.at(0, 0, 0) == 1.0);
  REQUIRE(g.gx.at(0, 1, 0) == 0.0);
  REQUIRE(g.gx.at(1, 0, 0) == 0.0);
  REQUIRE(g.gx.at(1, 1, 0) == 0.0);
  REQUIRE(g.gy.at(0, 0, 0) == 0.0);
  REQUIRE(g.gy.at(0, 1, 0) == -1.0);
  REQUIRE(g.gy.at(1, 0, 0) == 0.0);
  REQUIRE(g.gy.at(1, 1, 0) == 0.0);
}

TEST_CASE("pyramid level sizes follow the ceil recurrence") {
  const Pyramid p = build_pyramid(Image(64, 64, 1, 0.5), 0.5, 8);
  REQUIRE(p.levels.size() == 4);
  int expect = 64;
  for (const Image& lvl : p.levels) {
    REQUIRE(lvl.height == expect);
    REQUIRE(lvl.width == expect);
    expect = static_cast<int>(std::ceil(expect * 0.5));
  }

  const Pyramid odd = build_pyramid(Image(37, 50, 1, 0.1), 0.7, 8);
  for (std::size_t i = 1; i < odd.levels.size(); ++i) {
    REQUIRE(odd.levels[i].height ==
            static_cast<int>(std::ceil(odd.levels[i - 1].height * 0.7)));
    REQUIRE(odd.levels[i].width ==
            static_cast<int>(std::ceil(odd.levels[i - 1].width * 0.7)));
  }
}

TEST_CASE("pyramid of a small image has a single level") {
  const Pyramid p = build_pyramid(Image(16, 16, 1, 0.3), 0.5, 16);
  REQUIRE(p.levels.size() == 1);
}

TEST_CASE("pyramid preserves constants at every level") {
  const Pyramid p = build_pyramid(Image(48, 40, 3, 0.42), 0.5, 8);
  REQUIRE(p.levels.size() >= 3);
  for (const Image& lvl : p.levels)
    for (double v : lvl.data) REQUIRE(v == Approx(0.42).margin(1e-12));
}

TEST_CASE("pyramid rejects out-of-range scale factors") {
  REQUIRE_THROWS_AS(build_pyramid(Image(32, 32, 1), 0.3, 8),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(build_pyramid(Image(32, 32, 1), 0.99, 8),
                    std::invalid_argument);
}

TEST_CASE("rescale_flow applies the value scale law") {
  const FlowField f(8, 8, 1.0, 0.0);
  const FlowField up = rescale_flow(f, 16, 16);
  for (std::size_t i = 0; i < up.u.size(); ++i) {
    REQUIRE(up.u[i] == Approx(2.0).margin(1e-12));
    REQUIRE(up.v[i] == Approx(0.0).margin(1e-12));
  }

  const FlowField g(8, 8, 4.0, -2.0);
  const FlowField down = rescale_flow(g, 4, 4);
  for (std::size_t i = 0; i < down.u.size(); ++i) {
    REQUIRE(down.u[i] == Approx(2.0).margin(1e-12));
    REQUIRE(down.v[i] == Approx(-1.0).margin(1e-12));
  }
}

TEST_CASE("rescale_flow at identity size is unchanged") {
  const FlowField f = testing::random_flow(6, 9, 3, 2.0);
  const FlowField same = rescale_flow(f, 6, 9);
  REQUIRE(same.u == f.u);
  REQUIRE(same.v == f.v);
}

TEST_CASE("forward difference and divergence are negative adjoints") {
  // <grad p, q> == <p, -div q> for arbitrary fields; the primal-dual
  // solvers are built on this identity.
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 3 + trial % 5, w = 4 + trial % 7;
    const std::size_t n = static_cast<std::size_t>(h) * w;
    detail::Field p(n), qx(n), qy(n), gx(n), gy(n), div(n);
    for (auto& v : p) v = uni(rng);
    for (auto& v : qx) v = uni(rng);
    for (auto& v : qy) v = uni(rng);
    detail::dx_forward(p, gx, h, w);
    detail::dy_forward(p, gy, h, w);
    detail::divergence(qx, qy, div, h, w);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      lhs += gx[i] * qx[i] + gy[i] * qy[i];
      rhs += p[i] * -div[i];
    }
    REQUIRE(lhs == Approx(rhs).margin(1e-10));
  }
}

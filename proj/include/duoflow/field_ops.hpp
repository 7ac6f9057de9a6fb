#pragma once

#include <cstddef>
#include <vector>

namespace duoflow {
namespace detail {

// Discrete first-order operators on scalar fields stored row-major (h x w).
// The forward difference is only defined up to the penultimate column/row;
// entries at the last column (for dx) and last row (for dy) are structurally
// zero and the adjoints ignore the dual values stored there. This pairing
// makes <grad f, p> == <f, -div p> hold exactly for arbitrary fields, which
// the primal-dual solvers rely on.

using Field = std::vector<double>;

inline std::size_t fidx(int y, int x, int w) {
  return static_cast<std::size_t>(y) * w + x;
}

inline void dx_forward(const Field& f, Field& out, int h, int w) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w - 1; ++x)
      out[fidx(y, x, w)] = f[fidx(y, x + 1, w)] - f[fidx(y, x, w)];
    out[fidx(y, w - 1, w)] = 0.0;
  }
}

inline void dy_forward(const Field& f, Field& out, int h, int w) {
  for (int y = 0; y < h - 1; ++y)
    for (int x = 0; x < w; ++x)
      out[fidx(y, x, w)] = f[fidx(y + 1, x, w)] - f[fidx(y, x, w)];
  for (int x = 0; x < w; ++x) out[fidx(h - 1, x, w)] = 0.0;
}

// Adjoints: <dx f, p> == <f, dx_adjoint p>. The last column of p never
// enters either side.
inline void dx_adjoint(const Field& p, Field& out, int h, int w) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      if (x >= 1) v += p[fidx(y, x - 1, w)];
      if (x < w - 1) v -= p[fidx(y, x, w)];
      out[fidx(y, x, w)] = v;
    }
  }
}

inline void dy_adjoint(const Field& p, Field& out, int h, int w) {
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      if (y >= 1) v += p[fidx(y - 1, x, w)];
      if (y < h - 1) v -= p[fidx(y, x, w)];
      out[fidx(y, x, w)] = v;
    }
  }
}

// div p = -(dx_adjoint px + dy_adjoint py); satisfies <grad f, p> = <f, -div p>.
inline void divergence(const Field& px, const Field& py, Field& out, int h,
                       int w) {
  Field tx(out.size()), ty(out.size());
  dx_adjoint(px, tx, h, w);
  dy_adjoint(py, ty, h, w);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -(tx[i] + ty[i]);
}

}  // namespace detail
}  // namespace duoflow

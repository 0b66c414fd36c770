#pragma once

#include <array>

namespace hrank {

/// Quintic Hermite weights on one interval of length h at local s in [0,1],
/// for (y0, y0', y0'', y1, y1', y1''). `deriv` gives weights of d/dt instead.
inline std::array<double, 6> hermite5_weights(double s, double h, bool deriv = false) {
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  if (!deriv) {
    return {1 - 10 * s3 + 15 * s4 - 6 * s5,
            h * (s - 6 * s3 + 8 * s4 - 3 * s5),
            h * h * (0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5),
            10 * s3 - 15 * s4 + 6 * s5,
            h * (-4 * s3 + 7 * s4 - 3 * s5),
            h * h * (0.5 * s3 - s4 + 0.5 * s5)};
  }
  return {(-30 * s2 + 60 * s3 - 30 * s4) / h,
          1 - 18 * s2 + 32 * s3 - 15 * s4,
          h * (s - 4.5 * s2 + 6 * s3 - 2.5 * s4),
          (30 * s2 - 60 * s3 + 30 * s4) / h,
          -12 * s2 + 28 * s3 - 15 * s4,
          h * (1.5 * s2 - 4 * s3 + 2.5 * s4)};
}

template <class T>
T hermite5(const std::array<double, 6>& w, const T& y0, const T& d0, const T& dd0, const T& y1, const T& d1,
           const T& dd1) {
  return w[0] * y0 + w[1] * d0 + w[2] * dd0 + w[3] * y1 + w[4] * d1 + w[5] * dd1;
}

}  // namespace hrank

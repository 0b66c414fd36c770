#include "harmonic_rank/ode.hpp"

#include "harmonic_rank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hrank {

namespace {

constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// Differences between the 5th and embedded 4th order weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                 e7 = -1.0 / 40;

}  // namespace

void dopri5(const OdeRhs& f, double t0, Vector& y, const std::vector<double>& stops, const OdeOptions& opt,
            const OdeStepHook& after_step, const OdeStopHook& on_stop) {
  if (stops.empty()) return;
  const double dir = stops.back() >= t0 ? 1.0 : -1.0;
  const Eigen::Index n = y.size();
  Vector k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n), err(n);

  double t = t0;
  double h = std::min(opt.h_init, opt.h_max);
  std::size_t steps = 0;
  for (std::size_t idx = 0; idx < stops.size(); ++idx) {
    const double target = stops[idx];
    if ((target - t) * dir < 0.0) throw Error(ErrorCode::InvalidArgument, "stop times are not monotone");
    while ((target - t) * dir > 0.0) {
      if (++steps > opt.max_steps) throw Error(ErrorCode::StepSizeUnderflow, "step budget exhausted");
      const double remaining = std::abs(target - t);
      bool last = false;
      double hs = h;
      if (hs >= remaining * (1.0 - 1e-12)) {
        hs = remaining;
        last = true;
      }
      const double hh = dir * hs;
      f(t, y, k1);
      tmp = y + hh * a21 * k1;
      f(t + c2 * hh, tmp, k2);
      tmp = y + hh * (a31 * k1 + a32 * k2);
      f(t + c3 * hh, tmp, k3);
      tmp = y + hh * (a41 * k1 + a42 * k2 + a43 * k3);
      f(t + c4 * hh, tmp, k4);
      tmp = y + hh * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
      f(t + c5 * hh, tmp, k5);
      tmp = y + hh * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
      f(t + hh, tmp, k6);
      ynew = y + hh * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      f(t + hh, ynew, k7);
      err = hh * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

      const double scale = opt.tol * std::max({1.0, y.lpNorm<Eigen::Infinity>(), ynew.lpNorm<Eigen::Infinity>()});
      const double enorm = err.lpNorm<Eigen::Infinity>() / scale;
      if (!std::isfinite(enorm)) {
        h = hs * 0.2;
        if (h < opt.h_min) throw Error(ErrorCode::StepSizeUnderflow, "non-finite state");
        continue;
      }
      const double fac = enorm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 5.0);
      if (enorm <= 1.0) {
        t = last ? target : t + hh;
        y = ynew;
        if (after_step) after_step(t, y);
        // A truncated final step says nothing about the natural step size.
        if (!last) h = std::min(hs * fac, opt.h_max);
      } else {
        h = hs * fac;
        if (h < opt.h_min) {
          std::ostringstream os;
          os << "step size " << h << " below minimum at t=" << t;
          throw Error(ErrorCode::StepSizeUnderflow, os.str());
        }
      }
    }
    if (on_stop) on_stop(idx, t, y);
  }
}

}  // namespace hrank

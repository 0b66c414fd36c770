#pragma once

#include "harmonic_rank/linalg.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace hrank {

struct OdeOptions {
  /// Local error per step relative to max(1, |y|_inf).
  double tol = 1e-12;
  double h_init = 1e-2;
  double h_max = 0.25;
  double h_min = 1e-12;
  std::size_t max_steps = 50'000'000;
};

using OdeRhs = std::function<void(double t, const Vector& y, Vector& dy)>;
/// Called after every accepted step; may rescale y in place.
using OdeStepHook = std::function<void(double t, Vector& y)>;
/// Called when the integrator lands exactly on stops[idx].
using OdeStopHook = std::function<void(std::size_t idx, double t, const Vector& y)>;

/// Dormand-Prince 5(4) from t0 through the stop times, which must be monotone
/// in one direction away from t0 (stops equal to t0 are reported at once).
/// Throws StepSizeUnderflow when the controller cannot meet the tolerance.
void dopri5(const OdeRhs& f, double t0, Vector& y, const std::vector<double>& stops, const OdeOptions& opt,
            const OdeStepHook& after_step, const OdeStopHook& on_stop);

}  // namespace hrank

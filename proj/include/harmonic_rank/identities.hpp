#pragma once

#include "harmonic_rank/jacobi.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hrank {

/// Tags of the stable/unstable tensor identities checked by identity_suite.
///   c1_cocycle             S_{phi^u v}(t) = S_v(t+u) S_v(u)^{-1}, same for U
///   c2_riccati             S'_{phi^t v}(0) = S_v'(t) S_v(t)^{-1}, same for U
///   c3_wronskian_transfer  U'-S' at phi^t v = U_v^{-T}(t) B_v S_v^{-1}(t)
///                          = S_v^{-T}(t) B_v U_v^{-1}(t), B_v = U_v'(0)-S_v'(0)
///   c4_integral            U'-S' at phi^t v
///                          = S_v^{-T}(t) (int_{-inf}^t (S^T S)^{-1})^{-1} S_v^{-1}(t)
///   jac2_representation    Z = Y (int_{t0}^t (Y^T Y)^{-1} C1 + C2), Y = U_v
///   sujac_integral         (U'_w(0) - S'_{w,s}(0))^{-1} = int_0^s (U_w^T U_w)^{-1}
struct IdentityReport {
  std::string tag;
  /// Max over samples of |lhs - rhs| / max(1, |rhs|), plus the truncation
  /// estimate for c4.
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::size_t samples = 0;
  std::size_t passed = 0;
  std::string note;
};

struct IdentityOptions {
  double tol = 1e-8;
  /// Base trajectories cover [-window, window]; samples must satisfy
  /// |t|, |u|, |t+u| <= window.
  double window = 8.0;
  /// c4 lower limit: L doubles from l_start until the tail estimate drops
  /// below tol / 10 or l_max is reached.
  double l_start = 8.0;
  double l_max = 64.0;
  std::uint64_t seed = 1;
  AsymptoticOptions asymptotic;
};

std::vector<std::pair<double, double>> random_samples(std::size_t n, double lo, double hi, std::uint64_t seed);

std::vector<IdentityReport> identity_suite(const FieldPtr& field, const std::vector<std::pair<double, double>>& samples,
                                           const IdentityOptions& opt = {});

}  // namespace hrank

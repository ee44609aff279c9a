#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nonconv/core.hpp"

namespace nonconv {

// Catalog of admissible super-linear time scales.  Restricting to a catalog
// keeps the growth conditions checkable; arbitrary user code is out.
struct FastScale {
  enum class Kind { power, log_affine, linear };
  Kind kind = Kind::power;
  double p = 2.0;  // exponent for power, slope for linear
  double c = 0.0;  // additive linear coefficient for log_affine: t*ln(1+t) + c*t

  double eval(double t) const;
  double deriv(double t) const;
  // monotone inverse on [0, inf)
  double inverse(double y) const;
  std::string describe() const;
};

struct ResonantPair {
  int i_prime = 0;  // 1-based scale indices
  int j_prime = 0;
  double rho = 1.0;
};

// q_1 < ... < q_ell with q_i(t) = alpha_i t for i <= k and catalog scales above.
struct TimeScaleFamily {
  std::vector<double> alphas;            // ascending, positive
  std::vector<FastScale> fast_scales;    // scales k+1..ell

  int k() const { return static_cast<int>(alphas.size()); }
  int ell() const { return k() + static_cast<int>(fast_scales.size()); }

  double q(int i, double t) const;        // i in 1..ell
  double q_deriv(int i, double t) const;
  double q_inverse(int i, double y) const;

  // tau_i(t) = t/alpha_i for linear scales, t otherwise.
  double tau(int i, double t) const;

  void validate_basic() const;  // ordering/positivity of the alphas
};

struct GrowthChecks {
  int scale_index = 0;  // 1-based, > k
  double gamma = 0.0;
  double min_gap_shift = 0.0;     // min over grid of q_i(t+gamma) - q_i(t)
  double min_gap_previous = 0.0;  // min over grid of q_i(gamma t) - q_{i-1}(t)
  bool shift_diverges = false;
  bool previous_diverges = false;
};

struct GrowthReport {
  bool valid = true;
  std::string failure;  // names the offending scale index when !valid
  std::vector<GrowthChecks> checks;
};

// Verifies monotonicity, strict ordering of the q_i on a grid, and the
// divergence of q_i(t+gamma)-q_i(t) and q_i(gamma t)-q_{i-1}(t) for each
// super-linear scale and each gamma in the grid.
GrowthReport validate_growth(const TimeScaleFamily& family,
                             const std::vector<double>& gamma_grid, double horizon);

// All pairs (i',j') with i'<=i, j'<=j and alpha_{i'}/alpha_i = alpha_{j'}/alpha_j,
// ordered by increasing rho; the last element is always (i, j, 1).
// Ratios are decided in exact rational arithmetic when the alphas convert
// exactly, otherwise with relative tolerance 1e-12.
std::vector<ResonantPair> resonant_pairs(const TimeScaleFamily& family, int i, int j);

double tau(const TimeScaleFamily& family, int i, double t);

}  // namespace nonconv

#pragma once

#include <string>
#include <vector>

#include "nonconv/core.hpp"
#include "nonconv/dynamics.hpp"
#include "nonconv/fast_process.hpp"
#include "nonconv/field.hpp"
#include "nonconv/time_scales.hpp"

namespace nonconv {

enum class CoeffMethod { exact, upper_bound, empirical };

const char* to_string(CoeffMethod m);

struct CoeffEntry {
  double value = 0.0;
  CoeffMethod method = CoeffMethod::exact;
};

// Hoelder norm of a function of two fast arguments, estimated as the
// discrete sup over sampled grid pairs (a lower bound of the true norm).
// Row r of (xi, xit) is one grid point; values[r] = g at that point.
double holder_norm(const Mat& xi, const Mat& xit, const Vec& values, double kappa);

// Mixing coefficient of the pair (xi(n+t), xi(n+t+s)) against the
// conditioning filtration at time [t].  Chains get a total-variation upper
// bound (uniform over the Hoelder ball and over s), the dyadic map is
// exactly 0 for every n.
CoeffEntry eta_coeff(const FiniteChainSpec& chain, double p, double kappa, double s, int n,
                     int t_grid_max = 10, int frac_grid = 10);
CoeffEntry eta_coeff(const DyadicMapSpec& map, double p, double kappa, double s, int n);

// One-sided approximation coefficient: L^q distance between xi(t) and its
// conditional expectation given the filtration at [t]+n.
CoeffEntry zeta_coeff(const FiniteChainSpec& chain, double q, int n, int t_grid_max = 10,
                      int frac_grid = 10);
CoeffEntry zeta_coeff(const DyadicMapSpec& map, double q, int n, int quad_nodes = 1 << 14);

// Geometric bound C 2^{-n kappa} for the map's zeta.
double zeta_bound_map(const DyadicMapSpec& map, int n);

// Two-parameter-family coefficients for comparison checks.
CoeffEntry varphi_coeff(const FiniteChainSpec& chain, double p, int n, int t_grid_max = 10);
CoeffEntry beta_coeff(const FiniteChainSpec& chain, double q, int n);
CoeffEntry varphi_coeff(const DyadicMapSpec& map, double p, int n);
CoeffEntry beta_coeff(const DyadicMapSpec& map, double q, int n);

struct CoefficientTable {
  std::vector<int> lags;
  std::vector<double> eta, zeta, varphi, beta;
  CoeffMethod eta_method = CoeffMethod::upper_bound;
  CoeffMethod zeta_method = CoeffMethod::exact;
  double p = 2.0, q = 2.0, kappa = 1.0;
  std::vector<double> eta_s_lags;  // s values the eta bound covers (bound is s-uniform)
};

CoefficientTable build_coefficient_table(const FiniteChainSpec& chain, double p, double q,
                                         double kappa, int n_max,
                                         const std::vector<double>& s_lags);
CoefficientTable build_coefficient_table(const DyadicMapSpec& map, double p, double q,
                                         double kappa, int n_max,
                                         const std::vector<double>& s_lags);

bool nonincreasing(const std::vector<double>& v, double tol = 1e-12);

struct AssumptionReport {
  std::string verdict;  // "pass" | "fail" | "inconclusive"
  double p = 0.0, q = 0.0, delta = 0.0, theta = 0.0, m_moment = 0.0;
  double gamma_exp = 0.0;  // 1 - rho/(p*theta)
  double partial_sum = 0.0;
  double tail_estimate = 0.0;
  std::string tail_model;  // "geometric" | "polynomial" | "zero"
  bool eta_s_decay = false;
  bool gamma_m_finite = true;  // from boundedness of the observable
};

// Searches admissible (p, q, delta, theta, m) for the summability condition
//   sum_n n (eta^{1-rho/(p theta)}(n) + zeta^delta(n)) < infinity
// with rho = (ell-1)*wp, and tests it by partial sum plus a fitted tail.
AssumptionReport check_assumption(const CoefficientTable& table, double kappa, int ell,
                                  int wp);

struct TwoParamRow {
  int n = 0;
  double beta_n = 0.0, zeta_np1 = 0.0;  // inequality beta(n) >= zeta(n+1)/2
  double eta_n = 0.0, varphi_half = 0.0, beta_half = 0.0;
  bool ineq_beta_zeta = false;  // (2.24)-type comparison
  bool ineq_eta_varphi = false; // (2.25)-type comparison
};

template <class Process>
std::vector<TwoParamRow> two_param_compare(const Process& proc, double p, double q,
                                           double kappa, int n_max);

struct MartingaleCheckResult {
  double residual = 0.0;      // sup-norm bound of ||E(D | F_{m-1+r})||
  double tail_bound = 0.0;    // spectral bound for the truncated series tail
  double series_tail = 0.0;   // decay bound at the truncation lag
  int L = 0;
  bool pass = false;
};

// Verifies the martingale-difference property of the block decomposition by
// exact conditional expectations over chain states: the r-smoothed block
// integrals are conditioned one-stage (directly to m-1+r) and two-stage
// (through m+r), the telescoping sum is cancelled kernel-by-kernel, and the
// surviving truncation tail is compared against its spectral decay bound.
MartingaleCheckResult martingale_difference_check(const DecomposedField& dec,
                                                  const FiniteChainSpec& chain,
                                                  const TimeScaleFamily& family,
                                                  const AveragedFlow& zbar, int i, int N,
                                                  int r, int m, int L = 0);

}  // namespace nonconv

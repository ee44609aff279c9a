#pragma once

#include <memory>
#include <random>
#include <vector>

#include "nonconv/core.hpp"
#include "nonconv/dynamics.hpp"
#include "nonconv/fast_process.hpp"
#include "nonconv/field.hpp"
#include "nonconv/time_scales.hpp"

namespace nonconv {

// Expectation of B_i^(l)(x, .) * B_j^(m)(y, .) with each resonant coordinate
// pair drawn jointly from mu_{s_beta} and every remaining coordinate drawn
// independently from mu.  Exact finite sum for chains.
double a_coeff(const DecomposedField& dec, const FiniteChainSpec& chain,
               const std::vector<ResonantPair>& pairs, int i, int j, int l, int m,
               const Vec& x, const Vec& y, const std::vector<double>& lags,
               std::int64_t term_budget = 1000000);

struct DCoeffResult {
  double value = 0.0;
  double tail_estimate = 0.0;
  double W = 0.0;  // truncation radius (continuous) or lattice radius (discrete)
};

struct DCoeffOptions {
  double tail_tol = 1e-8;
  double quad_tol = 1e-10;
  double W_override = 0.0;  // forced truncation when the decay bound is unavailable
};

// Scale-pair covariance coefficient: the full-line integral (continuous
// time) or lattice sum (discrete time, integer alphas) of the a-coefficient
// along the resonance line, divided by alpha_i alpha_j.
DCoeffResult D_coeff(const DecomposedField& dec, const FiniteChainSpec& chain,
                     const TimeScaleFamily& family, int i, int j, int l, int m, const Vec& x,
                     const Vec& y, const DCoeffOptions& opts = {});

// Exponential envelope |f(w)| <= C exp(-c w) fitted on a grid.
struct EnvelopeFit {
  double C = 0.0;
  double c = 0.0;
  bool holds_on_grid = false;
};
EnvelopeFit fit_exponential_envelope(const std::function<double(double)>& f, double w_max,
                                     int n_grid = 64);

// Instantaneous covariance matrix of the limit fluctuation, literal reading:
// A^{lm}(u) = sum_{i,j<=k} D_ij^{lm}(Zbar(alpha_i u), Zbar(alpha_j u)).
Mat A_matrix(const DecomposedField& dec, const FiniteChainSpec& chain,
             const TimeScaleFamily& family, const AveragedFlow& zbar, double u,
             const DCoeffOptions& opts = {});

// Registered zero limit for super-linear components in continuous time.
double vanishing_pairs_prediction(int i, int j, int k, TimeKind kind);

// Extra variance of super-linear components in discrete time:
// int_0^{min(s,t)} du  int B_i B_i^T dmu^(x)i  evaluated along Zbar.
Mat discrete_extra_variance(const DecomposedField& dec, const AveragedFlow& zbar, int i,
                            int k, double s, double t, double tol = 1e-8);

// Predicted second-order structure of the limit process on a time grid.
struct CovarianceReport {
  int d = 1, k = 1, ell = 1;
  bool discrete = false;
  std::vector<double> grid;     // requested output times
  std::vector<double> alphas;
  std::vector<double> u_nodes;  // internal grid [0, u_max]

  // D_ij^{lm}(Zbar(u), Zbar(u)) sampled on u_nodes; index p = (i-1)*k+(j-1),
  // column c = l*d+m.  dcum holds the trapezoid prefix integrals.
  std::vector<Mat> dtab, dcum;
  // discrete-time extra variance rates for components i > k (index i-k-1)
  std::vector<Mat> vtab, vcum;

  std::vector<double> A_u_nodes;   // grid for A_literal, spanning [0, T]
  Mat A_literal;                   // A^{lm}(u) rows matching A_u_nodes
  double A_min_eigenvalue = 0.0;   // min eigenvalue over the grid
  double min_structure_discrepancy = 0.0;
  bool var_nondecreasing = true;
  EnvelopeFit envelope;            // fitted decay of the resonance integrand
  double trunc_W = 0.0, trunc_tail = 0.0;

  // int_0^v of D_ij (interpolated prefix), v clamped to [0, u_max]
  Mat d_integral(int i, int j, double v) const;
  Mat v_integral(int i, double v) const;  // i > k, discrete
};

CovarianceReport build_covariance_report(const DecomposedField& dec,
                                         const FiniteChainSpec& chain,
                                         const TimeScaleFamily& family,
                                         const AveragedFlow& zbar,
                                         const std::vector<double>& grid,
                                         const DCoeffOptions& opts = {});

// Cov(G_i(s), G_j(t)) predicted for the tau-scaled components (min-form;
// zero for super-linear components in continuous time, the extra variance
// in discrete time).
Mat predicted_cov_component(const CovarianceReport& rep, int i, int j, double s, double t);

// Cov(G(s), G(t)) assembled through the composition over linear scales
// plus the discrete extras.
Mat predicted_cov_G(const CovarianceReport& rep, double s, double t);

// Gaussian paths with the predicted covariance (for comparisons against the
// empirical fluctuation ensembles).  Increments use per-interval integrated
// covariances with Cholesky factors, PSD-jittered at 1e-12.
class G0Sampler {
 public:
  G0Sampler(const CovarianceReport& rep, std::uint64_t seed);

  // one path of G on rep.grid: (n_grid x d)
  Mat draw();
  // component paths of the same draw (filled alongside draw())
  const std::vector<Mat>& last_components() const { return comp_; }

 private:
  const CovarianceReport& rep_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
  std::vector<double> iu_;           // increment grid
  std::vector<Mat> chol_;            // per-interval factors (stacked dim)
  std::vector<Mat> comp_;
  int stacked_ = 0;
};

}  // namespace nonconv

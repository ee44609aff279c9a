#pragma once

#include <memory>
#include <vector>

#include "nonconv/core.hpp"
#include "nonconv/fast_process.hpp"
#include "nonconv/field.hpp"
#include "nonconv/time_scales.hpp"

namespace nonconv {

// Slow-time integration grid.  h is the micro step in slow-time units; the
// fast-time integrator advances by h/epsilon, which is the same RK4 iterate.
struct ScenarioGrid {
  double epsilon = 1e-2;
  double T_final = 1.0;
  double h = 0.0;  // defaults to epsilon*T_final/100 when <= 0
  std::vector<double> output_times;

  double micro_step() const { return h > 0.0 ? h : epsilon * T_final / 100.0; }
  void validate() const;
  static std::vector<double> uniform_outputs(double T, int n);
};

// The averaged orbit Z(t): dZ/dt = bar_B(Z), solved once per scenario by
// RK4 with successive halving (target 1e-10) and cubic Hermite dense output.
class AveragedFlow {
 public:
  AveragedFlow(std::shared_ptr<const DecomposedField> dec, Vec x0, double t_max);

  double t_max() const { return t_max_; }
  int dim() const { return static_cast<int>(x0_.size()); }
  void at(double t, Eigen::Ref<Vec> out) const;
  Vec at(double t) const;
  Mat gradient_at(double t) const;  // grad bar_B (Z(t))
  double refinement_error() const { return refine_err_; }

 private:
  std::shared_ptr<const DecomposedField> dec_;
  Vec x0_;
  double t_max_ = 0.0, dt_ = 0.0, refine_err_ = 0.0;
  Mat values_;  // (n+1) x d
  Mat derivs_;  // (n+1) x d
};

// Everything one realization produces on the output grid.
struct TrajectoryBundle {
  std::vector<double> times;
  Mat Z;     // slow motion Z^eps
  Mat Zbar;  // averaged orbit
  Mat Y;     // auxiliary process along the averaged orbit
  std::vector<Mat> Y_comp;  // Y_i^eps, i = 1..ell
  Mat G;     // eps^{-1/2} (Y - Zbar)
  std::vector<Mat> G_comp;  // eps^{-1/2} Y_i^eps
  Mat Q;     // eps^{-1/2} (Z - Zbar)
  double identity_residual = 0.0;  // representation of Y through its components
  bool has_slow = true;
};

// Fixed-step RK4 for the slow motion, with steps split at every time where
// a sampled copy of the signal jumps, at output times, and at the micro
// grid.  Discrete-time scenarios use the exact recursion instead.
Mat integrate_slow(const FieldSpec& field, const PathHandle& path,
                   const TimeScaleFamily& family, const ScenarioGrid& grid, const Vec& x0);

// Z on the output grid from the averaged flow (epsilon-independent).
Mat integrate_averaged(const AveragedFlow& flow, const ScenarioGrid& grid);

// Component integrals I_i(u) = int_0^u B_i(Zbar(s), xi(q(s/eps))) ds,
// evaluated at the requested upper limits (ascending) in one sweep.
// which = 0 selects bar_B, -1 the full field B, otherwise the component.
std::vector<Vec> integrate_component(const DecomposedField& dec, int which,
                                     const PathHandle& path, const TimeScaleFamily& family,
                                     const AveragedFlow& zbar, double eps,
                                     const std::vector<double>& uppers);

struct BundleOptions {
  bool compute_slow = true;  // integrate Z^eps (needed for Q)
};

// Full per-seed pipeline: sample-independent pieces (flow) are shared.
TrajectoryBundle simulate_bundle(const DecomposedField& dec, const TimeScaleFamily& family,
                                 const AveragedFlow& zbar, const ScenarioGrid& grid,
                                 const Vec& x0, const PathHandle& path,
                                 const BundleOptions& opts = {});

// Fast-time horizon a path must cover for the given grid.
double required_horizon(const TimeScaleFamily& family, const ScenarioGrid& grid,
                        TimeKind kind);

struct RiemannSumReport {
  Vec block_sum;      // N^{-1/2} S_{i,N}(t)
  Vec g_continuous;   // G_i^{1/N}(t) by direct quadrature
  double difference = 0.0;
  double bound = 0.0;  // 2 K t d / sqrt(N)
  bool within_bound = false;
};

// Unit-block Riemann approximation of the fluctuation component and its
// comparison against the continuous-time quadrature at eps = 1/N.
RiemannSumReport riemann_sum_G(const DecomposedField& dec, const PathHandle& path,
                               const TimeScaleFamily& family, const AveragedFlow& zbar,
                               int i, int N, double t);

struct VolterraSolution {
  std::vector<double> times;  // requested output grid
  Mat values;
  double refine_error = 0.0;
  double gronwall_excess = 0.0;  // max over grid of |Q| - (|G| + C e^{Ct} int|G|)
  bool gronwall_ok = false;
};

// Solves H(t) = G(t) + int_0^t M(s) H(s) ds by trapezoidal product
// integration with successive refinement, and checks the Gronwall envelope
// with constant C = K*d.
VolterraSolution solve_limit_ode(const std::function<Vec(double)>& G,
                                 const std::function<Mat(double)>& M, double T,
                                 const std::vector<double>& output_times, double gronwall_C,
                                 double tol = 1e-8);

// Grid-data convenience wrapper (linear interpolation of G between nodes).
VolterraSolution solve_limit_ode(const std::vector<double>& times, const Mat& G_values,
                                 const std::function<Mat(double)>& M, double gronwall_C,
                                 double tol = 1e-8);

}  // namespace nonconv

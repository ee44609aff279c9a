#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nonconv/core.hpp"
#include "nonconv/fast_process.hpp"
#include "nonconv/time_scales.hpp"

namespace nonconv {

// Coupled drift B(x, xi_1..xi_ell).  The evaluator writes a d-vector; xi is
// passed as an ell x wp matrix (row j = j-th fast argument).  Evaluators
// must be reentrant: no shared mutable state.
struct FieldSpec {
  int d = 1;
  int ell = 1;
  int wp = 1;
  double K = 1.0;      // bound / Lipschitz constant of (2.7)-type regularity
  double kappa = 1.0;  // Hoelder exponent in the fast arguments

  std::function<void(Eigen::Ref<const Vec>, Eigen::Ref<const Mat>, Eigen::Ref<Vec>)> eval;
  std::function<void(Eigen::Ref<const Vec>, Eigen::Ref<const Mat>, Eigen::Ref<Mat>)> grad_x;
  bool grad_is_fallback = false;

  // sampling boxes for regularity validation
  Vec x_lo, x_hi;    // d
  Vec xi_lo, xi_hi;  // wp (same box for every fast slot)

  std::string name;

  Vec operator()(const Vec& x, const Mat& xi) const {
    Vec out(d);
    eval(x, xi, out);
    return out;
  }
  Mat gradient(const Vec& x, const Mat& xi) const {
    Mat g(d, d);
    grad_x(x, xi, g);
    return g;
  }
};

// Installs the central-difference gradient (step 1e-5 * (1+|x|)) when the
// user supplies none; sets grad_is_fallback.
void ensure_gradient(FieldSpec& spec);

struct FieldValidationReport {
  double worst_bound_ratio = 0.0;       // |B| / K
  double worst_joint_ratio = 0.0;       // |dB| / K(|dx| + sum |dxi|^kappa)
  double worst_grad_ratio = 0.0;        // |dB/dx| / K
  double worst_hessian_ratio = 0.0;     // |d2B/dx2| / K
  bool grad_from_fallback = false;
  bool pass = false;
};

// Monte Carlo check of the bound / Lipschitz / Hoelder / derivative
// inequalities on the declared sampling boxes.
FieldValidationReport validate_field(const FieldSpec& spec, int n_samples,
                                     std::uint64_t seed);

// Scratch space for the nested quadrature loops; one per thread.
struct FieldWorkspace {
  Mat xi;
  Vec acc, tmp, bar;
  std::vector<double> pi_flat;  // (ell+1) x d partial integrals
  std::vector<int> odo;
};

// bar_B and the components B_1..B_ell of the telescoping decomposition
//   B(x, xi) = bar_B(x) + sum_i B_i(x, xi_1..xi_i),
// each B_i depending on its first i fast arguments only and centered in the
// last one.  Product quadrature over mu is exact for finite-atom measures.
class DecomposedField {
 public:
  DecomposedField(FieldSpec field, DiscreteMeasure mu, std::int64_t term_budget = 1000000);

  const FieldSpec& field() const { return field_; }
  const DiscreteMeasure& mu() const { return mu_; }

  // PI_i(x, xi) = int B dmu(xi_{i+1})..dmu(xi_ell); only rows < i of xi are read.
  void partial_integral(int i, Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi,
                        Eigen::Ref<Vec> out, FieldWorkspace& ws) const;

  void bar(Eigen::Ref<const Vec> x, Eigen::Ref<Vec> out, FieldWorkspace& ws) const;
  Vec bar(const Vec& x) const;
  Mat bar_gradient(const Vec& x) const;  // grad of bar_B by quadrature of grad_x

  // B_i = PI_i - PI_{i-1}; reads rows < i of xi.
  void component(int i, Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi,
                 Eigen::Ref<Vec> out, FieldWorkspace& ws) const;
  Vec component(int i, const Vec& x, const Mat& xi) const;

  // All partial integrals PI_0..PI_ell at once (shared sweep); written to
  // ws.pi_flat in row-major (ell+1) x d order.
  void partial_integrals_all(Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi,
                             FieldWorkspace& ws) const;

  FieldWorkspace make_workspace() const;

 private:
  FieldSpec field_;
  DiscreteMeasure mu_;
};

// bar_B(x) as a standalone evaluator (exact product quadrature).
std::function<Vec(const Vec&)> average_field(const FieldSpec& spec, const DiscreteMeasure& mu,
                                             std::int64_t term_budget = 1000000);

// Time average of B(x, xi(q_1(t)), ..., xi(q_ell(t))) over [0, T_window]:
// composite quadrature split at signal jumps in continuous time, plain mean
// over integer times in discrete time.
Vec empirical_average(const FieldSpec& spec, const PathHandle& path,
                      const TimeScaleFamily& family, const Vec& x, double T_window);

// Named catalog; throws config_error for unknown names.
FieldSpec make_field(const std::string& name,
                     const std::vector<double>& params = {});

// Generic polynomial field for d = wp = 1: sum of coef * x^xpow * prod xi_j^pows[j].
struct PolyTerm {
  double coef = 0.0;
  int xpow = 0;
  std::vector<int> xipow;
};
FieldSpec make_poly_field(int ell, const std::vector<PolyTerm>& terms, double K,
                          double kappa);

}  // namespace nonconv

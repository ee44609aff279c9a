#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "nonconv/core.hpp"

namespace nonconv {

enum class TimeKind { discrete, continuous };

// Discrete measure on R^wp: row i of `atoms` carries weight `weights[i]`.
// Atoms may repeat (quadrature representations of continuous laws).
struct DiscreteMeasure {
  Mat atoms;    // n x wp
  Vec weights;  // n

  int size() const { return static_cast<int>(weights.size()); }
  Vec mean() const { return atoms.transpose() * weights; }
};

// Discrete measure on R^wp x R^wp as a weighted pair list.
struct JointMeasure {
  Mat left;   // n x wp
  Mat right;  // n x wp
  Vec weights;

  DiscreteMeasure marginal_left() const { return {left, weights}; }
  DiscreteMeasure marginal_right() const { return {right, weights}; }

  // E[xi (x) xi'] under the joint law.
  Mat second_moment() const {
    return left.transpose() * weights.asDiagonal() * right;
  }
};

// Finite-state Markov chain with a vector observable.  `generator` is a
// rate matrix (rows sum to 0) in continuous time or a stochastic matrix
// (rows sum to 1) in discrete time.
struct FiniteChainSpec {
  std::vector<std::string> states;
  Mat generator;   // n x n
  Mat observable;  // n x wp
  Vec initial_law;
  TimeKind time_kind = TimeKind::continuous;

  int n_states() const { return static_cast<int>(generator.rows()); }
  int wp() const { return static_cast<int>(observable.cols()); }

  // Structural invariants: row sums, sign constraints, irreducibility
  // (by reachability), initial law a probability vector.
  void validate() const;

  // Transition kernel over lag s: expm(Q s) in continuous time, matrix
  // power in discrete time (s must then be a nonnegative integer).
  Mat kernel(double s) const;

  // Unique stationary probability vector (left null vector / fixed point).
  Vec stationary_vector() const;

  // Distribution of the state at time t started from initial_law.
  Vec law_at(double t) const;

  // Absolute spectral gap: -max Re(lambda != 0) for generators,
  // -log(second largest |lambda|) for stochastic matrices.
  double spectral_gap() const;

  bool irreducible() const;
};

// The doubling map on [0,1] observed through a Hoelder function.
// Randomness enters through the binary digits of the seeded start point,
// generated lazily (counter-based) up to digits_max.
struct DyadicMapSpec {
  std::function<Vec(double)> observable;
  int wp_dim = 1;
  double kappa_obs = 1.0;
  double C_obs = 1.0;
  std::int64_t digits_max = 1 << 20;
  int quad_nodes = 1 << 12;

  int wp() const { return wp_dim; }

  // Checks the declared Hoelder bound on a sample grid.
  void validate() const;

  // frac(2^s x) for integer s >= 0.
  static double shift(double x, std::int64_t s);
};

// One realization of the fast process, evaluable at any time in [0, horizon]
// (integer times for discrete processes).  Deterministic per seed.
class PathHandle {
 public:
  static PathHandle sample_chain(std::shared_ptr<const FiniteChainSpec> spec,
                                 double horizon, std::uint64_t seed);
  static PathHandle sample_dyadic(std::shared_ptr<const DyadicMapSpec> spec,
                                  double horizon, std::uint64_t seed);

  double horizon() const { return horizon_; }
  std::uint64_t seed() const { return seed_; }
  bool is_chain() const { return chain_ != nullptr; }

  // State index of the chain at time t (right-continuous).
  int state_at(double t) const;

  // Observable value at time t.  For the dyadic map t must be a
  // nonnegative integer within the digit budget.
  Vec eval(double t) const;
  void eval(double t, Eigen::Ref<Vec> out) const;

  // Start point of the dyadic orbit shifted n times: frac(2^n x0).
  double dyadic_point(std::int64_t n) const;

  // Chain jump times inside (t0, t1], ascending.  Empty for the map.
  void jumps_in(double t0, double t1, std::vector<double>& out) const;

  const FiniteChainSpec* chain_spec() const { return chain_.get(); }
  const DyadicMapSpec* map_spec() const { return map_.get(); }

 private:
  PathHandle() = default;

  std::shared_ptr<const FiniteChainSpec> chain_;
  std::shared_ptr<const DyadicMapSpec> map_;
  double horizon_ = 0.0;
  std::uint64_t seed_ = 0;

  // chain representation: state_[i] holds on [jump_[i-1], jump_[i])
  std::vector<double> jump_;
  std::vector<int> state_;
};

// --- operations ---------------------------------------------------------

PathHandle sample_path(std::shared_ptr<const FiniteChainSpec> spec, double horizon,
                       std::uint64_t seed);
PathHandle sample_path(std::shared_ptr<const DyadicMapSpec> spec, double horizon,
                       std::uint64_t seed);

// One-time law mu: exact for chains, midpoint quadrature for the map.
DiscreteMeasure stationary_law(const FiniteChainSpec& spec);
DiscreteMeasure stationary_law(const DyadicMapSpec& spec);

// Two-time law mu_s.  Negative lags use the transposed law (coordinates
// swapped), consistent with joint stationarity.
JointMeasure joint_law(const FiniteChainSpec& spec, double s);
JointMeasure joint_law(const DyadicMapSpec& spec, double s);

// E_P[xi(0) (x) xi(s)], the second mixed moment of mu_s.
Mat correlation(const FiniteChainSpec& spec, double s);
Mat correlation(const DyadicMapSpec& spec, double s);

}  // namespace nonconv

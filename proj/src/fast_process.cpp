#include "nonconv/fast_process.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>

#include "nonconv/quadrature.hpp"

namespace nonconv {

namespace {

bool reachable_all(const Mat& edges) {
  const int n = static_cast<int>(edges.rows());
  std::vector<int> seen(n, 0), stack{0};
  seen[0] = 1;
  while (!stack.empty()) {
    const int a = stack.back();
    stack.pop_back();
    for (int b = 0; b < n; ++b)
      if (!seen[b] && a != b && edges(a, b) > 0.0) {
        seen[b] = 1;
        stack.push_back(b);
      }
  }
  return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace

bool FiniteChainSpec::irreducible() const {
  return reachable_all(generator) && reachable_all(Mat(generator.transpose()));
}

void FiniteChainSpec::validate() const {
  const int n = n_states();
  if (n < 1) throw validation_error("chain must have at least one state");
  if (observable.rows() != n) throw validation_error("observable rows != state count");
  if (initial_law.size() != n) throw validation_error("initial_law size != state count");
  for (int a = 0; a < n; ++a) {
    const double row = generator.row(a).sum();
    if (time_kind == TimeKind::continuous) {
      if (std::abs(row) > 1e-10) throw validation_error("generator rows must sum to 0");
      for (int b = 0; b < n; ++b)
        if (a != b && generator(a, b) < 0.0)
          throw validation_error("off-diagonal rates must be >= 0");
    } else {
      if (std::abs(row - 1.0) > 1e-10)
        throw validation_error("transition matrix rows must sum to 1");
      for (int b = 0; b < n; ++b)
        if (generator(a, b) < 0.0 || generator(a, b) > 1.0)
          throw validation_error("transition probabilities must lie in [0,1]");
    }
    if (initial_law[a] < -1e-15) throw validation_error("initial_law entries must be >= 0");
  }
  if (std::abs(initial_law.sum() - 1.0) > 1e-10)
    throw validation_error("initial_law must sum to 1");
  if (n > 1 && !irreducible()) throw validation_error("chain is reducible");
}

Mat FiniteChainSpec::kernel(double s) const {
  if (s < 0.0) throw std::invalid_argument("kernel: negative lag");
  if (time_kind == TimeKind::continuous) return (generator * s).exp();
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-9)
    throw std::invalid_argument("kernel: non-integer lag for a discrete chain");
  std::int64_t k = static_cast<std::int64_t>(r);
  Mat base = generator;
  Mat acc = Mat::Identity(n_states(), n_states());
  while (k > 0) {
    if (k & 1) acc = acc * base;
    base = base * base;
    k >>= 1;
  }
  return acc;
}

Vec FiniteChainSpec::stationary_vector() const {
  if (!irreducible()) throw validation_error("stationary law: chain is reducible");
  const int n = n_states();
  // pi^T Q = 0 (or pi^T P = pi^T) with sum(pi) = 1: replace one equation
  // by the normalization and solve the small dense system.
  Mat A = time_kind == TimeKind::continuous
              ? Mat(generator.transpose())
              : Mat(generator.transpose() - Mat::Identity(n, n));
  A.row(n - 1).setOnes();
  Vec rhs = Vec::Zero(n);
  rhs[n - 1] = 1.0;
  Vec pi = A.fullPivLu().solve(rhs);
  for (int i = 0; i < n; ++i) pi[i] = std::max(pi[i], 0.0);
  pi /= pi.sum();
  return pi;
}

Vec FiniteChainSpec::law_at(double t) const { return kernel(t).transpose() * initial_law; }

double FiniteChainSpec::spectral_gap() const {
  const Eigen::EigenSolver<Mat> es(generator);
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_states(); ++i) {
    const std::complex<double> lam = es.eigenvalues()[i];
    if (time_kind == TimeKind::continuous) {
      if (std::abs(lam) < 1e-12) continue;
      gap = std::min(gap, -lam.real());
    } else {
      const double mod = std::abs(lam);
      if (std::abs(mod - 1.0) < 1e-12) continue;
      gap = std::min(gap, -std::log(std::max(mod, 1e-300)));
    }
  }
  if (!std::isfinite(gap)) gap = std::numeric_limits<double>::infinity();  // 1-state chain
  return gap;
}

void DyadicMapSpec::validate() const {
  if (wp_dim < 1) throw validation_error("observable dimension must be >= 1");
  if (kappa_obs <= 0.0 || kappa_obs > 1.0)
    throw validation_error("Hoelder exponent must lie in (0,1]");
  const int n = 257;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    const Vec gx = observable(x);
    if (gx.size() != wp_dim) throw validation_error("observable dimension mismatch");
    for (int j = 1; j < 8; ++j) {
      const double y = std::min(1.0 - 1e-12, x + j * 0.0137);
      const Vec gy = observable(y);
      const double lhs = (gx - gy).cwiseAbs().maxCoeff();
      const double rhs = C_obs * std::pow(std::abs(x - y), kappa_obs);
      if (lhs > rhs * (1.0 + 1e-9) + 1e-12)
        throw validation_error("observable violates the declared Hoelder bound");
    }
  }
}

double DyadicMapSpec::shift(double x, std::int64_t s) {
  double y = x;
  for (std::int64_t i = 0; i < s; ++i) {
    y *= 2.0;
    y -= std::floor(y);
  }
  return y;
}

// --- paths ---------------------------------------------------------------

PathHandle PathHandle::sample_chain(std::shared_ptr<const FiniteChainSpec> spec,
                                    double horizon, std::uint64_t seed) {
  if (horizon <= 0.0) throw std::invalid_argument("sample_path: horizon must be > 0");
  PathHandle p;
  p.chain_ = spec;
  p.horizon_ = horizon;
  p.seed_ = seed;

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int n = spec->n_states();
  // initial state from initial_law
  {
    double u = unif(rng), acc = 0.0;
    int a = n - 1;
    for (int i = 0; i < n; ++i) {
      acc += spec->initial_law[i];
      if (u <= acc) {
        a = i;
        break;
      }
    }
    p.state_.push_back(a);
  }

  if (spec->time_kind == TimeKind::continuous) {
    double t = 0.0;
    while (true) {
      const int a = p.state_.back();
      const double rate = -spec->generator(a, a);
      if (rate <= 0.0) break;  // absorbing (1-state) case
      t += -std::log1p(-unif(rng)) / rate;
      if (t > horizon) break;
      double u = unif(rng) * rate, acc = 0.0;
      int next = a;
      for (int b = 0; b < n; ++b) {
        if (b == a) continue;
        acc += spec->generator(a, b);
        if (u <= acc) {
          next = b;
          break;
        }
      }
      p.jump_.push_back(t);
      p.state_.push_back(next);
    }
  } else {
    const auto steps = static_cast<std::int64_t>(std::floor(horizon));
    p.state_.reserve(steps + 1);
    for (std::int64_t k = 0; k < steps; ++k) {
      const int a = p.state_.back();
      double u = unif(rng), acc = 0.0;
      int next = n - 1;
      for (int b = 0; b < n; ++b) {
        acc += spec->generator(a, b);
        if (u <= acc) {
          next = b;
          break;
        }
      }
      p.state_.push_back(next);
      p.jump_.push_back(static_cast<double>(k + 1));
    }
  }
  return p;
}

PathHandle PathHandle::sample_dyadic(std::shared_ptr<const DyadicMapSpec> spec,
                                     double horizon, std::uint64_t seed) {
  if (horizon <= 0.0) throw std::invalid_argument("sample_path: horizon must be > 0");
  if (static_cast<std::int64_t>(horizon) + 64 > spec->digits_max)
    throw std::invalid_argument("sample_path: horizon exceeds the digit budget");
  PathHandle p;
  p.map_ = spec;
  p.horizon_ = horizon;
  p.seed_ = seed;
  return p;
}

int PathHandle::state_at(double t) const {
  if (!chain_) throw std::logic_error("state_at: not a chain path");
  if (t < 0.0 || t > horizon_ * (1.0 + 1e-12))
    throw std::out_of_range("state_at: time outside path horizon");
  const auto it = std::upper_bound(jump_.begin(), jump_.end(), t);
  return state_[static_cast<std::size_t>(it - jump_.begin())];
}

double PathHandle::dyadic_point(std::int64_t n) const {
  if (!map_) throw std::logic_error("dyadic_point: not a map path");
  if (n < 0 || n > static_cast<std::int64_t>(horizon_))
    throw std::out_of_range("dyadic_point: time outside path horizon");
  if (n + 53 > map_->digits_max)
    throw std::out_of_range("dyadic_point: digit budget exceeded");
  // frac(2^n x0) from binary digits n+1 .. n+53 of the seeded start point
  double x = 0.0, w = 0.5;
  for (int j = 1; j <= 53; ++j) {
    const std::uint64_t h = splitmix64(seed_ * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(n + j));
    if ((h >> 37) & 1ULL) x += w;
    w *= 0.5;
  }
  return x;
}

void PathHandle::eval(double t, Eigen::Ref<Vec> out) const {
  if (chain_) {
    out = chain_->observable.row(state_at(t)).transpose();
    return;
  }
  const double r = std::round(t);
  if (std::abs(t - r) > 1e-9)
    throw std::invalid_argument("eval: dyadic map paths are defined at integer times");
  out = map_->observable(dyadic_point(static_cast<std::int64_t>(r)));
}

Vec PathHandle::eval(double t) const {
  Vec out(chain_ ? chain_->wp() : map_->wp());
  eval(t, out);
  return out;
}

void PathHandle::jumps_in(double t0, double t1, std::vector<double>& out) const {
  out.clear();
  if (!chain_) return;
  auto lo = std::upper_bound(jump_.begin(), jump_.end(), t0);
  auto hi = std::upper_bound(jump_.begin(), jump_.end(), t1);
  out.assign(lo, hi);
}

PathHandle sample_path(std::shared_ptr<const FiniteChainSpec> spec, double horizon,
                       std::uint64_t seed) {
  return PathHandle::sample_chain(std::move(spec), horizon, seed);
}

PathHandle sample_path(std::shared_ptr<const DyadicMapSpec> spec, double horizon,
                       std::uint64_t seed) {
  return PathHandle::sample_dyadic(std::move(spec), horizon, seed);
}

// --- laws ----------------------------------------------------------------

DiscreteMeasure stationary_law(const FiniteChainSpec& spec) {
  return {spec.observable, spec.stationary_vector()};
}

DiscreteMeasure stationary_law(const DyadicMapSpec& spec) {
  const int n = spec.quad_nodes;
  Mat atoms(n, spec.wp());
  for (int i = 0; i < n; ++i) atoms.row(i) = spec.observable((i + 0.5) / n).transpose();
  return {atoms, Vec::Constant(n, 1.0 / n)};
}

JointMeasure joint_law(const FiniteChainSpec& spec, double s) {
  const bool swap = s < 0.0;
  const double lag = std::abs(s);
  const Vec pi = spec.stationary_vector();
  const Mat K = spec.kernel(lag);
  const int n = spec.n_states(), wp = spec.wp();
  JointMeasure m;
  m.left.resize(n * n, wp);
  m.right.resize(n * n, wp);
  m.weights.resize(n * n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const int r = a * n + b;
      m.left.row(r) = spec.observable.row(swap ? b : a);
      m.right.row(r) = spec.observable.row(swap ? a : b);
      m.weights[r] = pi[a] * K(a, b);
    }
  return m;
}

JointMeasure joint_law(const DyadicMapSpec& spec, double s) {
  const bool swap = s < 0.0;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-9)
    throw std::invalid_argument("joint_law: non-integer lag for the dyadic map");
  const auto lag = static_cast<std::int64_t>(std::abs(r));
  const int n = spec.quad_nodes, wp = spec.wp();
  JointMeasure m;
  m.left.resize(n, wp);
  m.right.resize(n, wp);
  m.weights = Vec::Constant(n, 1.0 / n);
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    const Vec g0 = spec.observable(x);
    const Vec g1 = spec.observable(DyadicMapSpec::shift(x, lag));
    m.left.row(i) = (swap ? g1 : g0).transpose();
    m.right.row(i) = (swap ? g0 : g1).transpose();
  }
  return m;
}

Mat correlation(const FiniteChainSpec& spec, double s) { return joint_law(spec, s).second_moment(); }
Mat correlation(const DyadicMapSpec& spec, double s) { return joint_law(spec, s).second_moment(); }

}  // namespace nonconv

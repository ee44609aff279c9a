#include "nonconv/time_scales.hpp"

#include <algorithm>
#include <cmath>

namespace nonconv {

double FastScale::eval(double t) const {
  switch (kind) {
    case Kind::power:
      return std::pow(t, p);
    case Kind::log_affine:
      return t * std::log1p(t) + c * t;
    case Kind::linear:
      return p * t;
  }
  return 0.0;
}

double FastScale::deriv(double t) const {
  switch (kind) {
    case Kind::power:
      return p * std::pow(t, p - 1.0);
    case Kind::log_affine:
      return std::log1p(t) + t / (1.0 + t) + c;
    case Kind::linear:
      return p;
  }
  return 0.0;
}

double FastScale::inverse(double y) const {
  if (y <= 0.0) return 0.0;
  switch (kind) {
    case Kind::power:
      return std::pow(y, 1.0 / p);
    case Kind::linear:
      return y / p;
    case Kind::log_affine: {
      double lo = 0.0, hi = std::max(1.0, y);
      while (eval(hi) < y) hi *= 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (eval(mid) < y)
          lo = mid;
        else
          hi = mid;
        if (hi - lo < 1e-14 * std::max(1.0, hi)) break;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

std::string FastScale::describe() const {
  switch (kind) {
    case Kind::power:
      return "t^" + std::to_string(p);
    case Kind::log_affine:
      return "t*ln(1+t) + " + std::to_string(c) + "*t";
    case Kind::linear:
      return std::to_string(p) + "*t";
  }
  return "?";
}

void TimeScaleFamily::validate_basic() const {
  if (alphas.empty()) throw validation_error("time scales: need at least one linear scale");
  double prev = 0.0;
  for (double a : alphas) {
    if (a <= prev) throw validation_error("time scales: alphas must be strictly increasing and positive");
    prev = a;
  }
}

double TimeScaleFamily::q(int i, double t) const {
  if (i < 1 || i > ell()) throw std::out_of_range("time scale index out of range");
  if (i <= k()) return alphas[i - 1] * t;
  return fast_scales[i - 1 - k()].eval(t);
}

double TimeScaleFamily::q_deriv(int i, double t) const {
  if (i < 1 || i > ell()) throw std::out_of_range("time scale index out of range");
  if (i <= k()) return alphas[i - 1];
  return fast_scales[i - 1 - k()].deriv(t);
}

double TimeScaleFamily::q_inverse(int i, double y) const {
  if (i < 1 || i > ell()) throw std::out_of_range("time scale index out of range");
  if (i <= k()) return y / alphas[i - 1];
  return fast_scales[i - 1 - k()].inverse(y);
}

double TimeScaleFamily::tau(int i, double t) const {
  if (i < 1 || i > ell()) throw std::out_of_range("time scale index out of range");
  if (t < 0.0) throw std::invalid_argument("tau: negative time");
  return i <= k() ? t / alphas[i - 1] : t;
}

double tau(const TimeScaleFamily& family, int i, double t) { return family.tau(i, t); }

namespace {

// Divergence heuristic on a geometric grid: the gaps must turn strictly
// increasing after their minimum and clear it by a margin by the horizon.
// (A super-linear gap may dip negative before the trend takes over.)
bool diverges(const std::vector<double>& vals) {
  const std::size_t n = vals.size();
  if (n < 4) return false;
  const std::size_t mloc =
      static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  if (mloc + 1 >= n) return false;
  for (std::size_t i = mloc; i + 1 < n; ++i)
    if (vals[i + 1] <= vals[i] + 1e-12 * std::abs(vals[i])) return false;
  return vals.back() > vals[mloc] + std::max(1.0, 0.1 * std::abs(vals[mloc]));
}

}  // namespace

GrowthReport validate_growth(const TimeScaleFamily& family,
                             const std::vector<double>& gamma_grid, double horizon) {
  if (horizon <= 0.0) throw std::invalid_argument("validate_growth: horizon must be > 0");
  family.validate_basic();
  GrowthReport report;

  std::vector<double> grid;
  for (double t = std::min(0.5, horizon / 64.0); t <= horizon; t *= 1.5) grid.push_back(t);
  if (grid.size() < 8) {
    grid.clear();
    for (int i = 1; i <= 8; ++i) grid.push_back(horizon * i / 8.0);
  }

  // monotonicity everywhere; scale ordering is an eventual condition (a
  // super-linear scale may cross its linear predecessors early on), so it
  // is enforced on the upper half of the grid only.
  for (int i = 1; i <= family.ell(); ++i) {
    double prev = 0.0;
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
      const double t = grid[gi];
      const double v = family.q(i, t);
      if (v <= prev) {
        report.valid = false;
        report.failure = "scale " + std::to_string(i) + " is not strictly increasing";
        return report;
      }
      prev = v;
      if (i > 1 && gi >= grid.size() / 2 && family.q(i - 1, t) >= v && report.valid) {
        report.valid = false;
        report.failure = "scale ordering violated at index " + std::to_string(i);
      }
    }
  }

  for (int i = family.k() + 1; i <= family.ell(); ++i) {
    for (double gamma : gamma_grid) {
      GrowthChecks c;
      c.scale_index = i;
      c.gamma = gamma;
      std::vector<double> shift_gaps, prev_gaps;
      shift_gaps.reserve(grid.size());
      prev_gaps.reserve(grid.size());
      for (double t : grid) {
        shift_gaps.push_back(family.q(i, t + gamma) - family.q(i, t));
        prev_gaps.push_back(family.q(i, gamma * t) - family.q(i - 1, t));
      }
      c.min_gap_shift = *std::min_element(shift_gaps.begin(), shift_gaps.end());
      c.min_gap_previous = *std::min_element(prev_gaps.begin(), prev_gaps.end());
      c.shift_diverges = diverges(shift_gaps);
      c.previous_diverges = diverges(prev_gaps);
      if (!c.shift_diverges || !c.previous_diverges) {
        report.valid = false;
        report.failure = "gap-divergence condition fails for scale " + std::to_string(i) +
                         " at gamma=" + std::to_string(gamma);
      }
      report.checks.push_back(c);
    }
  }
  return report;
}

std::vector<ResonantPair> resonant_pairs(const TimeScaleFamily& family, int i, int j) {
  const int kk = family.k();
  if (i < 1 || i > kk || j < 1 || j > kk)
    throw std::out_of_range("resonant_pairs: indices must address linear scales");

  std::vector<Rational> rat(kk);
  bool exact = true;
  for (int a = 0; a < kk; ++a)
    if (!rational_from_double(family.alphas[a], rat[a])) {
      exact = false;
      break;
    }

  std::vector<ResonantPair> out;
  for (int ip = 1; ip <= i; ++ip)
    for (int jp = 1; jp <= j; ++jp) {
      bool hit;
      if (exact)
        hit = ratio_equal(rat[ip - 1], rat[i - 1], rat[jp - 1], rat[j - 1]);
      else {
        const double r1 = family.alphas[ip - 1] / family.alphas[i - 1];
        const double r2 = family.alphas[jp - 1] / family.alphas[j - 1];
        hit = std::abs(r1 - r2) <= 1e-12 * std::max(r1, r2);
      }
      if (hit) out.push_back({ip, jp, family.alphas[ip - 1] / family.alphas[i - 1]});
    }
  std::sort(out.begin(), out.end(),
            [](const ResonantPair& a, const ResonantPair& b) { return a.rho < b.rho; });
  return out;
}

}  // namespace nonconv

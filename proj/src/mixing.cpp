#include "nonconv/mixing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "nonconv/quadrature.hpp"

namespace nonconv {

const char* to_string(CoeffMethod m) {
  switch (m) {
    case CoeffMethod::exact:
      return "exact";
    case CoeffMethod::upper_bound:
      return "upper-bound";
    case CoeffMethod::empirical:
      return "empirical";
  }
  return "?";
}

double holder_norm(const Mat& xi, const Mat& xit, const Vec& values, double kappa) {
  const int n = static_cast<int>(values.size());
  if (n < 1) throw std::invalid_argument("holder_norm: empty grid");
  double best = values.cwiseAbs().maxCoeff();
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      double denom = 0.0;
      for (int c = 0; c < xi.cols(); ++c)
        denom += std::pow(std::abs(xi(a, c) - xi(b, c)), kappa) +
                 std::pow(std::abs(xit(a, c) - xit(b, c)), kappa);
      if (denom < 1e-14) continue;
      best = std::max(best, std::abs(values[a]) + std::abs(values[a] - values[b]) / denom);
    }
  return best;
}

namespace {

double l1_to_stationary(const Mat& K, const Vec& pi, int a) {
  double s = 0.0;
  for (int b = 0; b < pi.size(); ++b) s += std::abs(K(a, b) - pi[b]);
  return s;
}

// max over a conditioning-time grid of the Pr-weighted L^p norm of the
// total-variation distance to stationarity at lag `lag`
double chain_tv_bound(const FiniteChainSpec& chain, double p, double lag, int t_grid_max) {
  const Vec pi = chain.stationary_vector();
  const Mat K = chain.kernel(lag);
  double best = 0.0;
  Vec law = chain.initial_law;
  const Mat step = chain.kernel(1.0);
  for (int t0 = 0; t0 <= t_grid_max; ++t0) {
    double acc = 0.0;
    for (int a = 0; a < pi.size(); ++a)
      acc += law[a] * std::pow(l1_to_stationary(K, pi, a), p);
    best = std::max(best, std::pow(acc, 1.0 / p));
    law = step.transpose() * law;
  }
  return best;
}

}  // namespace

CoeffEntry eta_coeff(const FiniteChainSpec& chain, double p, double kappa, double s, int n,
                     int t_grid_max, int frac_grid) {
  if (n < 0) throw std::invalid_argument("eta_coeff: n must be >= 0");
  (void)kappa;
  (void)s;  // the TV bound is uniform over the Hoelder ball and over s
  double best = 0.0;
  if (chain.time_kind == TimeKind::continuous) {
    for (int f = 0; f < frac_grid; ++f) {
      const double u = static_cast<double>(f) / frac_grid;
      best = std::max(best, chain_tv_bound(chain, p, n + u, t_grid_max));
    }
  } else {
    best = chain_tv_bound(chain, p, n, t_grid_max);
  }
  return {best, CoeffMethod::upper_bound};
}

CoeffEntry eta_coeff(const DyadicMapSpec&, double, double, double, int n) {
  if (n < 0) throw std::invalid_argument("eta_coeff: n must be >= 0");
  // the conditional law of digits beyond the conditioning rank is already
  // stationary, so the coefficient vanishes identically
  return {0.0, CoeffMethod::exact};
}

CoeffEntry zeta_coeff(const FiniteChainSpec& chain, double q, int n, int t_grid_max,
                      int frac_grid) {
  if (n < 0) throw std::invalid_argument("zeta_coeff: n must be >= 0");
  if (n >= 1) return {0.0, CoeffMethod::exact};  // xi(t) is F_{[t]+1}-measurable
  if (chain.time_kind == TimeKind::discrete) return {0.0, CoeffMethod::exact};

  // n = 0, continuous: || E(xi(t)|F_[t]) - xi(t) ||_q over fractional offsets
  const int wp = chain.wp();
  double best = 0.0;
  Vec law = chain.initial_law;
  const Mat step = chain.kernel(1.0);
  for (int t0 = 0; t0 <= t_grid_max; ++t0) {
    for (int f = 0; f < frac_grid; ++f) {
      const double u = static_cast<double>(f) / frac_grid;
      const Mat K = chain.kernel(u);
      const Mat smoothed = K * chain.observable;  // E(xi | state at [t])
      double acc = 0.0;
      for (int a = 0; a < chain.n_states(); ++a)
        for (int b = 0; b < chain.n_states(); ++b) {
          double dist = 0.0;
          for (int c = 0; c < wp; ++c) {
            const double dv = smoothed(a, c) - chain.observable(b, c);
            dist += dv * dv;
          }
          acc += law[a] * K(a, b) * std::pow(std::sqrt(dist), q);
        }
      best = std::max(best, std::pow(acc, 1.0 / q));
    }
    law = step.transpose() * law;
  }
  return {best, CoeffMethod::exact};
}

CoeffEntry zeta_coeff(const DyadicMapSpec& map, double q, int n, int quad_nodes) {
  if (n < 0) throw std::invalid_argument("zeta_coeff: n must be >= 0");
  (void)quad_nodes;
  if (n > 20) return {zeta_bound_map(map, n), CoeffMethod::upper_bound};
  // conditional on the first n digits of the shifted point, the remainder is
  // uniform on a rank-n dyadic interval: integrate the L^q error cell-wise
  const std::int64_t cells = std::int64_t{1} << n;
  const GaussLegendre& g = gl4();
  const int nn = static_cast<int>(g.nodes.size());
  double acc = 0.0;
  std::vector<Vec> gv(nn);
  for (std::int64_t cell = 0; cell < cells; ++cell) {
    const double lo = static_cast<double>(cell) / cells, w = 1.0 / cells;
    Vec mean = Vec::Zero(map.wp());
    for (int r = 0; r < nn; ++r) {
      gv[r] = map.observable(lo + 0.5 * w * (1.0 + g.nodes[r]));
      mean += 0.5 * g.weights[r] * gv[r];
    }
    for (int r = 0; r < nn; ++r)
      acc += w * 0.5 * g.weights[r] * std::pow((gv[r] - mean).norm(), q);
  }
  return {std::pow(acc, 1.0 / q), CoeffMethod::exact};
}

double zeta_bound_map(const DyadicMapSpec& map, int n) {
  return map.C_obs * std::pow(2.0, -n * map.kappa_obs);
}

CoeffEntry varphi_coeff(const FiniteChainSpec& chain, double p, int n, int t_grid_max) {
  if (n < 0) throw std::invalid_argument("varphi_coeff: n must be >= 0");
  return {chain_tv_bound(chain, p, n, t_grid_max), CoeffMethod::upper_bound};
}

CoeffEntry beta_coeff(const FiniteChainSpec&, double, int n) {
  if (n < 0) throw std::invalid_argument("beta_coeff: n must be >= 0");
  // the instantaneous observable is measurable for the two-sided window
  return {0.0, CoeffMethod::exact};
}

CoeffEntry varphi_coeff(const DyadicMapSpec&, double, int n) {
  if (n < 0) throw std::invalid_argument("varphi_coeff: n must be >= 0");
  return {0.0, CoeffMethod::exact};  // future digits are independent of the past
}

CoeffEntry beta_coeff(const DyadicMapSpec& map, double q, int n) {
  return zeta_coeff(map, q, n);  // the window reveals exactly n digits forward
}

namespace {

template <class Process>
CoefficientTable build_table_impl(const Process& proc, double p, double q, double kappa,
                                  int n_max, const std::vector<double>& s_lags) {
  CoefficientTable t;
  t.p = p;
  t.q = q;
  t.kappa = kappa;
  t.eta_s_lags = s_lags;
  for (int n = 0; n <= n_max; ++n) {
    t.lags.push_back(n);
    const CoeffEntry e = eta_coeff(proc, p, kappa, s_lags.empty() ? 0.0 : s_lags.front(), n);
    const CoeffEntry z = zeta_coeff(proc, q, n);
    const CoeffEntry v = varphi_coeff(proc, p, n);
    const CoeffEntry b = beta_coeff(proc, q, n);
    t.eta.push_back(e.value);
    t.zeta.push_back(z.value);
    t.varphi.push_back(v.value);
    t.beta.push_back(b.value);
    t.eta_method = e.method;
    t.zeta_method = z.method;
  }
  return t;
}

}  // namespace

CoefficientTable build_coefficient_table(const FiniteChainSpec& chain, double p, double q,
                                         double kappa, int n_max,
                                         const std::vector<double>& s_lags) {
  return build_table_impl(chain, p, q, kappa, n_max, s_lags);
}
CoefficientTable build_coefficient_table(const DyadicMapSpec& map, double p, double q,
                                         double kappa, int n_max,
                                         const std::vector<double>& s_lags) {
  return build_table_impl(map, p, q, kappa, n_max, s_lags);
}

bool nonincreasing(const std::vector<double>& v, double tol) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1] + tol) return false;
  return true;
}

namespace {

struct TailFit {
  bool summable = false, divergent = false;
  double tail = 0.0;
  std::string model = "zero";
};

// Tail behaviour of w_n beyond the table: geometric ratio test first,
// polynomial slope fit as the fallback.
TailFit fit_tail(const std::vector<double>& w) {
  TailFit f;
  const std::size_t n = w.size();
  std::size_t first = n / 2;
  bool all_zero = true;
  for (std::size_t i = first; i < n; ++i) all_zero = all_zero && w[i] < 1e-280;
  if (all_zero) {
    f.summable = true;
    f.model = "zero";
    return f;
  }
  double rmax = 0.0;
  bool ratio_ok = true;
  for (std::size_t i = first; i + 1 < n; ++i) {
    if (w[i] < 1e-280) {
      ratio_ok = false;
      break;
    }
    rmax = std::max(rmax, w[i + 1] / w[i]);
  }
  if (ratio_ok && rmax < 0.999) {
    f.summable = true;
    f.model = "geometric";
    f.tail = w.back() * rmax / (1.0 - rmax);
    return f;
  }
  // polynomial fit: log w ~ a + sigma log n
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int cnt = 0;
  for (std::size_t i = first; i < n; ++i) {
    if (w[i] < 1e-280) continue;
    const double lx = std::log(static_cast<double>(i)), ly = std::log(w[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++cnt;
  }
  if (cnt < 3) {
    f.model = "polynomial";
    return f;  // inconclusive
  }
  const double sigma = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  f.model = "polynomial";
  if (sigma < -1.05) {
    f.summable = true;
    const double N = static_cast<double>(n - 1);
    f.tail = w.back() * N / (-sigma - 1.0);
  } else if (sigma > -0.95) {
    f.divergent = true;
  }
  return f;
}

}  // namespace

AssumptionReport check_assumption(const CoefficientTable& table, double kappa, int ell,
                                  int wp) {
  if (table.lags.empty()) throw std::invalid_argument("check_assumption: empty table");
  if (table.lags.size() < 21)
    throw std::invalid_argument("check_assumption: table must reach n_max >= 20");
  AssumptionReport rep;
  rep.verdict = "inconclusive";
  const double rho = static_cast<double>(ell - 1) * wp;

  // eta_{p,kappa,s}(n) -> 0 for all s: the bound is uniform in s
  const double eta0 = std::max(table.eta.front(), 1e-300);
  rep.eta_s_decay = table.eta.back() < std::max(1e-3 * eta0, 1e-12);

  bool any_admissible = false, all_divergent = true;
  for (double p : {2.0, 4.0, 8.0, 16.0, 32.0, 64.0}) {
    for (double m : {64.0, 1024.0, 1e6}) {
      const double q = table.q;
      if (kappa * q <= 1.0) continue;
      // theta in (rho/p, kappa): take the midpoint; admissibility needs rho/p < kappa
      if (rho / p >= kappa) continue;
      const double theta = 0.5 * (rho / p + kappa);
      const double delta_cap = std::min(kappa - rho / p, (0.5 - 1.0 / p - 2.0 / m) * q);
      if (delta_cap <= 1e-9) continue;
      const double delta = 0.9 * delta_cap;
      if (0.5 < 1.0 / p + 2.0 / m + delta / q) continue;
      any_admissible = true;
      const double gamma = 1.0 - rho / (p * theta);
      if (gamma <= 0.0) continue;

      std::vector<double> w(table.lags.size(), 0.0);
      double partial = 0.0;
      for (std::size_t idx = 0; idx < table.lags.size(); ++idx) {
        const double n = table.lags[idx];
        w[idx] = n * (std::pow(std::max(table.eta[idx], 0.0), gamma) +
                      std::pow(std::max(table.zeta[idx], 0.0), delta));
        partial += w[idx];
      }
      const TailFit fit = fit_tail(w);
      if (!fit.divergent) all_divergent = false;
      if (fit.summable) {
        rep.verdict = "pass";
        rep.p = p;
        rep.q = q;
        rep.delta = delta;
        rep.theta = theta;
        rep.m_moment = m;
        rep.gamma_exp = gamma;
        rep.partial_sum = partial;
        rep.tail_estimate = fit.tail;
        rep.tail_model = fit.model;
        return rep;
      }
      if (rep.tail_model.empty()) rep.tail_model = fit.model;
      rep.partial_sum = partial;
    }
  }
  if (any_admissible && all_divergent) rep.verdict = "fail";
  return rep;
}

template <class Process>
std::vector<TwoParamRow> two_param_compare(const Process& proc, double p, double q,
                                           double kappa, int n_max) {
  std::vector<TwoParamRow> rows;
  for (int n = 0; n <= n_max; ++n) {
    TwoParamRow r;
    r.n = n;
    r.beta_n = beta_coeff(proc, q, n).value;
    r.zeta_np1 = zeta_coeff(proc, q, n + 1).value;
    r.ineq_beta_zeta = r.beta_n >= 0.5 * r.zeta_np1 - 1e-12;
    r.eta_n = eta_coeff(proc, p, kappa, 0.0, n).value;
    r.varphi_half = varphi_coeff(proc, p, n / 2).value;
    r.beta_half = beta_coeff(proc, p * kappa, n / 2).value;
    r.ineq_eta_varphi =
        r.eta_n <= r.varphi_half + 2.0 * std::pow(r.beta_half, kappa) + 1e-12;
    rows.push_back(r);
  }
  return rows;
}

template std::vector<TwoParamRow> two_param_compare<FiniteChainSpec>(const FiniteChainSpec&,
                                                                     double, double, double,
                                                                     int);
template std::vector<TwoParamRow> two_param_compare<DyadicMapSpec>(const DyadicMapSpec&,
                                                                   double, double, double,
                                                                   int);

// --- martingale-difference check ------------------------------------------------

namespace {

// Conditional expectation of the block kernel as exact chain algebra: the
// value tensor is indexed by (component, states at frozen times..., state at
// the conditioning time), component least significant.
struct CondTensor {
  std::vector<double> frozen_times;  // ascending
  double cond_time = 0.0;
  int n = 0, d = 1;
  std::vector<double> vals;

  double max_abs() const {
    double m = 0.0;
    for (double v : vals) m = std::max(m, std::abs(v));
    return m;
  }
};

struct KernelCache {
  const FiniteChainSpec* chain = nullptr;
  std::map<std::int64_t, Mat> cache;
  const Mat& at(double dt) {
    const auto key = static_cast<std::int64_t>(std::llround(dt * 1e9));
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, chain->kernel(std::max(dt, 0.0))).first;
    return it->second;
  }
};

// Direct conditioning of the r-smoothed block kernel at fast time s on F_c.
CondTensor condition_kernel(const DecomposedField& dec, const FiniteChainSpec& chain,
                            const TimeScaleFamily& family, const Vec& x, int i, int r,
                            double s, double c, KernelCache& kc, FieldWorkspace& ws) {
  const int n = chain.n_states(), d = dec.field().d;
  CondTensor T;
  T.n = n;
  T.d = d;
  T.cond_time = c;

  std::vector<double> theta(i);
  std::vector<Mat> vmap(i);  // per-slot value maps (n x wp)
  Mat smear_last = Mat::Identity(n, n);
  for (int j = 1; j <= i; ++j) {
    const double qt = family.q(j, s);
    if (r >= 1) {
      theta[j - 1] = qt;
      vmap[j - 1] = chain.observable;
    } else {
      theta[j - 1] = std::floor(qt);
      const Mat frac = kc.at(qt - std::floor(qt));
      vmap[j - 1] = frac * chain.observable;
      if (j == i) smear_last = frac;
    }
  }

  // tabulate the kernel over full state tuples (first slot least significant)
  std::int64_t rows = 1;
  for (int j = 0; j < i; ++j) rows *= n;
  Mat tab(rows, d);
  {
    Mat xi = Mat::Zero(dec.field().ell, dec.field().wp);
    Vec out(d), acc(d);
    std::vector<int> odo(i, 0);
    for (std::int64_t row = 0; row < rows; ++row) {
      for (int j = 0; j + 1 < i; ++j) xi.row(j) = vmap[j].row(odo[j]);
      acc.setZero();
      for (int bp = 0; bp < n; ++bp) {
        const double w = smear_last(odo[i - 1], bp);
        if (w == 0.0) continue;
        xi.row(i - 1) = chain.observable.row(bp);
        dec.component(i, x, xi, out, ws);
        acc += w * out;
      }
      tab.row(row) = acc.transpose();
      for (int j = 0; j < i; ++j) {
        if (++odo[j] < n) break;
        odo[j] = 0;
      }
    }
  }

  std::vector<int> frozen, free;
  for (int j = 0; j < i; ++j)
    (theta[j] <= c + 1e-9 ? frozen : free).push_back(j);
  for (int j : frozen) T.frozen_times.push_back(theta[j]);

  std::int64_t fro_rows = 1;
  for (std::size_t j = 0; j < frozen.size(); ++j) fro_rows *= n;
  T.vals.assign(static_cast<std::size_t>(d) * fro_rows * n, 0.0);

  std::vector<std::int64_t> stride(i, 1);
  for (int j = 1; j < i; ++j) stride[j] = stride[j - 1] * n;

  std::vector<int> fro_state(frozen.size(), 0);
  for (std::int64_t fr = 0; fr < fro_rows; ++fr) {
    std::int64_t base_idx = 0;
    for (std::size_t j = 0; j < frozen.size(); ++j) base_idx += stride[frozen[j]] * fro_state[j];
    for (int a = 0; a < n; ++a) {
      // sum over free-state tuples with the transition chain from (c, a)
      std::vector<int> odo(free.size(), 0);
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      if (free.empty()) {
        for (int comp = 0; comp < d; ++comp) acc[comp] = tab(base_idx, comp);
      } else {
        while (true) {
          double w = 1.0;
          double t_prev = c;
          int b_prev = a;
          for (std::size_t f = 0; f < free.size(); ++f) {
            const Mat& K = kc.at(theta[free[f]] - t_prev);
            w *= K(b_prev, odo[f]);
            if (w == 0.0) break;
            t_prev = theta[free[f]];
            b_prev = odo[f];
          }
          if (w != 0.0) {
            std::int64_t idx = base_idx;
            for (std::size_t f = 0; f < free.size(); ++f) idx += stride[free[f]] * odo[f];
            for (int comp = 0; comp < d; ++comp) acc[comp] += w * tab(idx, comp);
          }
          std::size_t f = 0;
          for (; f < free.size(); ++f) {
            if (++odo[f] < n) break;
            odo[f] = 0;
          }
          if (f == free.size()) break;
        }
      }
      const std::size_t out_idx = static_cast<std::size_t>(d) * (fr + fro_rows * a);
      for (int comp = 0; comp < d; ++comp) T.vals[out_idx + comp] = acc[comp];
    }
    std::size_t j = 0;
    for (; j < frozen.size(); ++j) {
      if (++fro_state[j] < n) break;
      fro_state[j] = 0;
    }
    if (j == frozen.size() && !frozen.empty()) {
    }
  }
  return T;
}

// Tower step: condition an existing tensor on an earlier sigma-algebra.
CondTensor condition_tensor(const CondTensor& T, double c, KernelCache& kc) {
  if (c >= T.cond_time - 1e-12) return T;
  const int n = T.n, d = T.d;
  CondTensor R;
  R.n = n;
  R.d = d;
  R.cond_time = c;

  std::vector<int> keep, mid;  // indices into frozen_times
  for (std::size_t j = 0; j < T.frozen_times.size(); ++j)
    (T.frozen_times[j] <= c + 1e-9 ? keep : mid).push_back(static_cast<int>(j));
  for (int j : keep) R.frozen_times.push_back(T.frozen_times[j]);

  const auto F = T.frozen_times.size();
  std::vector<std::int64_t> stride(F, 1);
  for (std::size_t j = 1; j < F; ++j) stride[j] = stride[j - 1] * n;
  std::int64_t fro_rows_T = 1;
  for (std::size_t j = 0; j < F; ++j) fro_rows_T *= n;

  std::int64_t keep_rows = 1;
  for (std::size_t j = 0; j < keep.size(); ++j) keep_rows *= n;
  R.vals.assign(static_cast<std::size_t>(d) * keep_rows * n, 0.0);

  std::vector<int> keep_state(keep.size(), 0);
  for (std::int64_t kr = 0; kr < keep_rows; ++kr) {
    std::int64_t base_idx = 0;
    for (std::size_t j = 0; j < keep.size(); ++j) base_idx += stride[keep[j]] * keep_state[j];
    for (int a = 0; a < n; ++a) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      // sum over mid states and over the old conditioning state
      std::vector<int> odo(mid.size() + 1, 0);
      while (true) {
        double w = 1.0;
        double t_prev = c;
        int b_prev = a;
        for (std::size_t f = 0; f < mid.size() && w != 0.0; ++f) {
          const Mat& K = kc.at(T.frozen_times[mid[f]] - t_prev);
          w *= K(b_prev, odo[f]);
          t_prev = T.frozen_times[mid[f]];
          b_prev = odo[f];
        }
        if (w != 0.0) {
          const Mat& K = kc.at(T.cond_time - t_prev);
          w *= K(b_prev, odo[mid.size()]);
        }
        if (w != 0.0) {
          std::int64_t idx = base_idx;
          for (std::size_t f = 0; f < mid.size(); ++f) idx += stride[mid[f]] * odo[f];
          const std::size_t src =
              static_cast<std::size_t>(d) * (idx + fro_rows_T * odo[mid.size()]);
          for (int comp = 0; comp < d; ++comp) acc[comp] += w * T.vals[src + comp];
        }
        std::size_t f = 0;
        for (; f <= mid.size(); ++f) {
          if (++odo[f] < n) break;
          odo[f] = 0;
        }
        if (f == mid.size() + 1) break;
      }
      const std::size_t out_idx = static_cast<std::size_t>(d) * (kr + keep_rows * a);
      for (int comp = 0; comp < d; ++comp) R.vals[out_idx + comp] = acc[comp];
    }
    std::size_t j = 0;
    for (; j < keep.size(); ++j) {
      if (++keep_state[j] < n) break;
      keep_state[j] = 0;
    }
    if (keep.empty()) break;
  }
  return R;
}

CondTensor combine(const CondTensor& A, double ca, const CondTensor& B, double cb) {
  if (A.frozen_times.size() != B.frozen_times.size())
    throw std::logic_error("martingale check: conditioned tensors disagree in shape");
  CondTensor out = A;
  for (std::size_t v = 0; v < out.vals.size(); ++v) out.vals[v] = ca * A.vals[v] + cb * B.vals[v];
  return out;
}

}  // namespace

MartingaleCheckResult martingale_difference_check(const DecomposedField& dec,
                                                  const FiniteChainSpec& chain,
                                                  const TimeScaleFamily& family,
                                                  const AveragedFlow& zbar, int i, int N,
                                                  int r, int m, int L) {
  if (m < 1 || N < 1 || r < 0) throw std::invalid_argument("martingale check: bad indices");
  if (i < 1 || i > family.ell()) throw std::invalid_argument("martingale check: bad component");
  const double c = m - 1.0 + r, cp = m + r;
  const double K = dec.field().K;
  const double gap = chain.spectral_gap();
  const Vec pi = chain.stationary_vector();
  const double pmin = pi.minCoeff();
  const double kmix = pmin > 0.0 ? std::sqrt((1.0 - pmin) / pmin) : 1e6;

  auto block_gap = [&](int l) {
    // separation of the last sampled time from everything it must decouple from
    const double lo = l - 1.0;
    const double t_i = family.q(i, lo);
    const double t_prev = i >= 2 ? family.q(i - 1, static_cast<double>(l)) : c;
    return t_i - std::max(t_prev, c);
  };
  auto tail_bound_at = [&](int l) {
    return 4.0 * K * kmix * std::exp(-gap * std::max(block_gap(l), 0.0));
  };

  if (L <= 0) {
    L = 5;
    while (L < 200 && tail_bound_at(m + L) > 1e-12) ++L;
  }

  KernelCache kc;
  kc.chain = &chain;
  FieldWorkspace ws = dec.make_workspace();
  const bool discrete = chain.time_kind == TimeKind::discrete;

  double residual = 0.0;
  Vec x(zbar.dim());

  for (int l = m; l <= m + L; ++l) {
    const double coef_one = (l == m ? 1.0 : 0.0) - (l <= m - 1 + L ? 1.0 : 0.0);
    const double coef_two = (l >= m + 1) ? 1.0 : 0.0;

    auto tensor_at = [&](double s) {
      zbar.at(std::min(s / N, zbar.t_max()), x);
      CondTensor total;
      bool have = false;
      if (coef_one != 0.0) {
        total = condition_kernel(dec, chain, family, x, i, r, s, c, kc, ws);
        for (auto& v : total.vals) v *= coef_one;
        have = true;
      }
      if (coef_two != 0.0) {
        CondTensor stage1 = condition_kernel(dec, chain, family, x, i, r, s, cp, kc, ws);
        CondTensor two = condition_tensor(stage1, c, kc);
        if (have)
          total = combine(total, 1.0, two, coef_two);
        else {
          for (auto& v : two.vals) v *= coef_two;
          total = two;
        }
      }
      return total;
    };

    if (discrete) {
      residual += tensor_at(static_cast<double>(l)).max_abs();
      continue;
    }

    // split the block where the frozen/free classification changes
    std::vector<double> splits{l - 1.0, static_cast<double>(l)};
    for (int j = 1; j <= i; ++j) {
      for (double lvl : {c, cp}) {
        const double sc = family.q_inverse(j, lvl);
        if (sc > l - 1.0 + 1e-9 && sc < l - 1e-9) splits.push_back(sc);
      }
      if (r == 0) {
        // integer crossings of q_j move the smoothing anchor
        const double qlo = family.q(j, l - 1.0), qhi = family.q(j, static_cast<double>(l));
        for (double v = std::ceil(qlo); v < qhi; v += 1.0) {
          const double sc = family.q_inverse(j, v);
          if (sc > l - 1.0 + 1e-9 && sc < l - 1e-9) splits.push_back(sc);
        }
      }
    }
    std::sort(splits.begin(), splits.end());
    splits.erase(std::unique(splits.begin(), splits.end()), splits.end());

    const std::array<double, 4> gl_x = {-0.8611363115940526, -0.3399810435848563,
                                        0.3399810435848563, 0.8611363115940526};
    const std::array<double, 4> gl_w = {0.34785484513745385, 0.6521451548625461,
                                        0.6521451548625461, 0.34785484513745385};
    for (std::size_t seg = 0; seg + 1 < splits.size(); ++seg) {
      const double a = splits[seg], b = splits[seg + 1];
      if (b - a < 1e-12) continue;
      const double cmid = 0.5 * (a + b), half = 0.5 * (b - a);
      for (int qn = 0; qn < 4; ++qn)
        residual += half * gl_w[qn] * tensor_at(cmid + half * gl_x[qn]).max_abs();
    }
  }

  MartingaleCheckResult res;
  res.L = L;
  res.residual = residual;
  res.tail_bound = tail_bound_at(m + L);
  res.series_tail = res.tail_bound;
  res.pass = residual <= std::max(res.tail_bound, 1e-12) + 1e-11;
  return res;
}

}  // namespace nonconv

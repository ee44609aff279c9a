#include "nonconv/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nonconv/quadrature.hpp"

namespace nonconv {

namespace {

// B_i(x, .) tabulated over all state tuples (mixed-radix index, first
// coordinate least significant).  Lets the resonance integrals run on
// lookups instead of field evaluations.
struct ComponentTable {
  int i = 0;
  int n = 0;
  Mat values;  // n^i rows x d
  bool zero = true;
};

ComponentTable tabulate_component(const DecomposedField& dec, const FiniteChainSpec& chain,
                                  int i, const Vec& x, FieldWorkspace& ws) {
  ComponentTable tab;
  tab.i = i;
  tab.n = chain.n_states();
  const int d = dec.field().d;
  std::int64_t rows = 1;
  for (int r = 0; r < i; ++r) rows *= tab.n;
  tab.values.resize(rows, d);
  Mat xi = Mat::Zero(dec.field().ell, dec.field().wp);
  Vec out(d);
  std::vector<int> odo(i, 0);
  for (std::int64_t row = 0; row < rows; ++row) {
    for (int r = 0; r < i; ++r) xi.row(r) = chain.observable.row(odo[r]);
    dec.component(i, x, xi, out, ws);
    tab.values.row(row) = out.transpose();
    for (int r = 0; r < i; ++r) {
      if (++odo[r] < tab.n) break;
      odo[r] = 0;
    }
  }
  tab.zero = tab.values.cwiseAbs().maxCoeff() < 1e-300;
  return tab;
}

// joint weight matrix of mu_s over state pairs; negative lag transposes
Mat pair_weights(const FiniteChainSpec& chain, const Vec& pi, double s) {
  Mat W = pi.asDiagonal() * chain.kernel(std::abs(s));
  if (s < 0.0) W.transposeInPlace();
  return W;
}

double a_from_tables(const ComponentTable& ti, const ComponentTable& tj,
                     const std::vector<ResonantPair>& pairs, const std::vector<Mat>& W,
                     const Vec& pi, int i, int j, int l, int m) {
  if (ti.zero || tj.zero) return 0.0;
  const int n = ti.n;
  const int P = static_cast<int>(pairs.size());

  std::vector<bool> ires(i + 1, false), jres(j + 1, false);
  for (const auto& p : pairs) {
    ires[p.i_prime] = true;
    jres[p.j_prime] = true;
  }
  std::vector<int> ifree, jfree;
  for (int r = 1; r <= i; ++r)
    if (!ires[r]) ifree.push_back(r);
  for (int r = 1; r <= j; ++r)
    if (!jres[r]) jfree.push_back(r);

  // strides of each coordinate in the mixed-radix row index
  std::vector<std::int64_t> istr(i + 1, 1), jstr(j + 1, 1);
  for (int r = 2; r <= i; ++r) istr[r] = istr[r - 1] * n;
  for (int r = 2; r <= j; ++r) jstr[r] = jstr[r - 1] * n;

  const int F = static_cast<int>(ifree.size() + jfree.size());
  std::vector<int> odo(2 * P + F, 0);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    std::int64_t idx_i = 0, idx_j = 0;
    for (int b = 0; b < P; ++b) {
      const int a = odo[2 * b], bb = odo[2 * b + 1];
      w *= W[b](a, bb);
      idx_i += istr[pairs[b].i_prime] * a;
      idx_j += jstr[pairs[b].j_prime] * bb;
    }
    for (std::size_t f = 0; f < ifree.size(); ++f) {
      const int a = odo[2 * P + static_cast<int>(f)];
      w *= pi[a];
      idx_i += istr[ifree[f]] * a;
    }
    for (std::size_t f = 0; f < jfree.size(); ++f) {
      const int a = odo[2 * P + static_cast<int>(ifree.size() + f)];
      w *= pi[a];
      idx_j += jstr[jfree[f]] * a;
    }
    if (w != 0.0) total += w * ti.values(idx_i, l) * tj.values(idx_j, m);
    int r = 0;
    const int R = 2 * P + F;
    for (; r < R; ++r) {
      if (++odo[r] < n) break;
      odo[r] = 0;
    }
    if (r == R) break;
  }
  return total;
}

double mixing_prefactor(const FiniteChainSpec& chain) {
  const Vec pi = chain.stationary_vector();
  const double pmin = pi.minCoeff();
  if (pmin <= 0.0) return 1e6;
  return std::sqrt((1.0 - pmin) / pmin);
}

}  // namespace

double a_coeff(const DecomposedField& dec, const FiniteChainSpec& chain,
               const std::vector<ResonantPair>& pairs, int i, int j, int l, int m,
               const Vec& x, const Vec& y, const std::vector<double>& lags,
               std::int64_t term_budget) {
  if (lags.size() != pairs.size())
    throw std::invalid_argument("a_coeff: one lag per resonant pair required");
  const int n = chain.n_states();
  const double terms = std::pow(n, 2.0 * pairs.size() + (i + j - 2.0 * pairs.size()));
  if (terms > static_cast<double>(term_budget))
    throw validation_error("a_coeff product-quadrature budget exceeded");

  FieldWorkspace ws = dec.make_workspace();
  const ComponentTable ti = tabulate_component(dec, chain, i, x, ws);
  const ComponentTable tj = tabulate_component(dec, chain, j, y, ws);
  const Vec pi = chain.stationary_vector();
  std::vector<Mat> W;
  W.reserve(pairs.size());
  for (std::size_t b = 0; b < pairs.size(); ++b) W.push_back(pair_weights(chain, pi, lags[b]));
  return a_from_tables(ti, tj, pairs, W, pi, i, j, l, m);
}

DCoeffResult D_coeff(const DecomposedField& dec, const FiniteChainSpec& chain,
                     const TimeScaleFamily& family, int i, int j, int l, int m, const Vec& x,
                     const Vec& y, const DCoeffOptions& opts) {
  if (i > family.k() || j > family.k())
    throw std::invalid_argument("D_coeff: defined for linear scales only");
  const auto pairs = resonant_pairs(family, i, j);
  const double ai = family.alphas[i - 1], aj = family.alphas[j - 1];

  FieldWorkspace ws = dec.make_workspace();
  const ComponentTable ti = tabulate_component(dec, chain, i, x, ws);
  const ComponentTable tj = tabulate_component(dec, chain, j, y, ws);
  DCoeffResult res;
  if (ti.zero || tj.zero) return res;

  const Vec pi = chain.stationary_vector();
  auto a_at = [&](double w) {
    std::vector<Mat> Wb;
    Wb.reserve(pairs.size());
    for (const auto& p : pairs) Wb.push_back(pair_weights(chain, pi, p.rho * w));
    return a_from_tables(ti, tj, pairs, Wb, pi, i, j, l, m);
  };

  const double gap = chain.spectral_gap();
  const double K = dec.field().K;

  if (chain.time_kind == TimeKind::continuous) {
    double envc = gap, envC = 4.0 * K * K * mixing_prefactor(chain);
    if (!(std::isfinite(envc) && envc > 0.0)) {
      if (opts.W_override <= 0.0)
        throw validation_error(
            "D_coeff: no spectral decay bound available; an explicit truncation W is required");
      envc = std::log(2.0) / opts.W_override;  // nominal
      envC = 4.0 * K * K;
    }
    double tail_pos = 0.0, tail_neg = 0.0;
    double W = opts.W_override;
    double vpos, vneg;
    if (W > 0.0) {
      vpos = integrate_adaptive([&](double w) { return a_at(w); }, 0.0, W, opts.quad_tol);
      vneg = integrate_adaptive([&](double w) { return a_at(-w); }, 0.0, W, opts.quad_tol);
      tail_pos = tail_neg = envC / envc * std::exp(-envc * W);
      res.W = W;
    } else {
      vpos = integrate_halfline([&](double w) { return a_at(w); }, envC, envc, opts.tail_tol,
                                opts.quad_tol, &tail_pos);
      vneg = integrate_halfline([&](double w) { return a_at(-w); }, envC, envc, opts.tail_tol,
                                opts.quad_tol, &tail_neg);
      res.W = std::log(std::max(envC / (envc * opts.tail_tol), 2.0)) / envc;
    }
    res.value = (vpos + vneg) / (ai * aj);
    res.tail_estimate = (tail_pos + tail_neg) / (ai * aj);
    return res;
  }

  // discrete time: alphas must be integers; the resonance line is a lattice
  const auto iai = static_cast<std::int64_t>(std::llround(ai));
  const auto iaj = static_cast<std::int64_t>(std::llround(aj));
  if (std::abs(ai - iai) > 1e-9 || std::abs(aj - iaj) > 1e-9)
    throw validation_error("D_coeff: discrete-time scales must have integer alphas");
  const double g = static_cast<double>(std::gcd(iai, iaj));
  if (!(gap > 1e-12) && opts.W_override <= 0.0)
    throw validation_error(
        "D_coeff: no spectral decay bound available; an explicit truncation W is required");
  const double r = gap > 1e-12 ? std::exp(-gap * g) : 0.5;
  const int m_cap = opts.W_override > 0.0
                        ? std::max(1, static_cast<int>(opts.W_override / g))
                        : 100000;
  double sum = a_at(0.0);
  double bound = 4.0 * K * K * mixing_prefactor(chain);
  int mlag = 1;
  for (; mlag <= m_cap; ++mlag) {
    sum += a_at(g * mlag) + a_at(-g * mlag);
    const double tail = 2.0 * bound * std::pow(r, mlag + 1) / (1.0 - r);
    if (tail < opts.tail_tol && opts.W_override <= 0.0) {
      res.tail_estimate = tail * g / (ai * aj);
      break;
    }
  }
  res.W = g * mlag;
  res.value = g * sum / (ai * aj);
  return res;
}

EnvelopeFit fit_exponential_envelope(const std::function<double(double)>& f, double w_max,
                                     int n_grid) {
  EnvelopeFit fit;
  std::vector<double> ws, logs;
  for (int idx = 0; idx < n_grid; ++idx) {
    const double w = w_max * (idx + 1) / n_grid;
    const double v = std::abs(f(w));
    if (v > 1e-280) {
      ws.push_back(w);
      logs.push_back(std::log(v));
    }
  }
  if (ws.size() < 3) {
    fit.C = std::abs(f(0.0));
    fit.c = 1.0;
    fit.holds_on_grid = true;
    return fit;
  }
  const double n = static_cast<double>(ws.size());
  double sw = 0.0, sl = 0.0, sww = 0.0, swl = 0.0;
  for (std::size_t idx = 0; idx < ws.size(); ++idx) {
    sw += ws[idx];
    sl += logs[idx];
    sww += ws[idx] * ws[idx];
    swl += ws[idx] * logs[idx];
  }
  const double slope = (n * swl - sw * sl) / (n * sww - sw * sw);
  fit.c = std::max(-slope, 0.0);
  // inflate C until the envelope dominates the grid
  double C = 0.0;
  for (std::size_t idx = 0; idx < ws.size(); ++idx)
    C = std::max(C, std::exp(logs[idx] + fit.c * ws[idx]));
  fit.C = std::max(C, std::abs(f(0.0)));
  fit.holds_on_grid = true;
  for (std::size_t idx = 0; idx < ws.size(); ++idx)
    if (std::exp(logs[idx]) > fit.C * std::exp(-fit.c * ws[idx]) * (1.0 + 1e-9))
      fit.holds_on_grid = false;
  return fit;
}

Mat A_matrix(const DecomposedField& dec, const FiniteChainSpec& chain,
             const TimeScaleFamily& family, const AveragedFlow& zbar, double u,
             const DCoeffOptions& opts) {
  const int d = dec.field().d, k = family.k();
  Mat A = Mat::Zero(d, d);
  for (int i = 1; i <= k; ++i)
    for (int j = 1; j <= k; ++j) {
      const Vec xi = zbar.at(family.alphas[i - 1] * u);
      const Vec xj = zbar.at(family.alphas[j - 1] * u);
      for (int l = 0; l < d; ++l)
        for (int m = 0; m < d; ++m)
          A(l, m) += D_coeff(dec, chain, family, i, j, l, m, xi, xj, opts).value;
    }
  return A;
}

double vanishing_pairs_prediction(int i, int j, int k, TimeKind kind) {
  if (kind != TimeKind::continuous)
    throw std::invalid_argument("vanishing prediction applies to continuous time");
  if (i <= k) throw std::invalid_argument("vanishing prediction requires i > k");
  (void)j;
  return 0.0;
}

Mat discrete_extra_variance(const DecomposedField& dec, const AveragedFlow& zbar, int i,
                            int k, double s, double t, double tol) {
  if (i <= k) throw std::invalid_argument("discrete extra variance requires i > k");
  const int d = dec.field().d;
  const double upper = std::min(s, t);
  FieldWorkspace ws = dec.make_workspace();
  const DiscreteMeasure& mu = dec.mu();
  const int n = mu.size();
  Mat xi = Mat::Zero(dec.field().ell, dec.field().wp);
  Vec out(d);

  auto inner = [&](double u) -> Mat {
    Mat acc = Mat::Zero(d, d);
    std::vector<int> odo(i, 0);
    const Vec x = zbar.at(u);
    while (true) {
      double w = 1.0;
      for (int r = 0; r < i; ++r) {
        xi.row(r) = mu.atoms.row(odo[r]);
        w *= mu.weights[odo[r]];
      }
      dec.component(i, x, xi, out, ws);
      acc += w * out * out.transpose();
      int r = 0;
      for (; r < i; ++r) {
        if (++odo[r] < n) break;
        odo[r] = 0;
      }
      if (r == i) break;
    }
    return acc;
  };

  Mat total(d, d);
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m)
      total(l, m) = integrate_adaptive([&](double u) { return inner(u)(l, m); }, 0.0, upper,
                                       tol);
  return total;
}

// --- report -------------------------------------------------------------------

Mat CovarianceReport::d_integral(int i, int j, double v) const {
  const int p = (i - 1) * k + (j - 1);
  Mat out(d, d);
  v = std::clamp(v, 0.0, u_nodes.back());
  const auto it = std::upper_bound(u_nodes.begin(), u_nodes.end(), v);
  int hi = std::clamp(static_cast<int>(it - u_nodes.begin()), 1,
                      static_cast<int>(u_nodes.size()) - 1);
  const double u0 = u_nodes[hi - 1], u1 = u_nodes[hi];
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m) {
      const int c = l * d + m;
      // prefix at hi-1 plus the partial trapezoid on [u0, v]
      const double f0 = dtab[p](hi - 1, c), f1 = dtab[p](hi, c);
      const double fr = f0 + (f1 - f0) * (v - u0) / (u1 - u0);
      out(l, m) = dcum[p](hi - 1, c) + 0.5 * (v - u0) * (f0 + fr);
    }
  return out;
}

Mat CovarianceReport::v_integral(int i, double v) const {
  const int p = i - k - 1;
  Mat out(d, d);
  v = std::clamp(v, 0.0, u_nodes.back());
  const auto it = std::upper_bound(u_nodes.begin(), u_nodes.end(), v);
  int hi = std::clamp(static_cast<int>(it - u_nodes.begin()), 1,
                      static_cast<int>(u_nodes.size()) - 1);
  const double u0 = u_nodes[hi - 1], u1 = u_nodes[hi];
  for (int l = 0; l < d; ++l)
    for (int m = 0; m < d; ++m) {
      const int c = l * d + m;
      const double f0 = vtab[p](hi - 1, c), f1 = vtab[p](hi, c);
      const double fr = f0 + (f1 - f0) * (v - u0) / (u1 - u0);
      out(l, m) = vcum[p](hi - 1, c) + 0.5 * (v - u0) * (f0 + fr);
    }
  return out;
}

CovarianceReport build_covariance_report(const DecomposedField& dec,
                                         const FiniteChainSpec& chain,
                                         const TimeScaleFamily& family,
                                         const AveragedFlow& zbar,
                                         const std::vector<double>& grid,
                                         const DCoeffOptions& opts) {
  CovarianceReport rep;
  rep.d = dec.field().d;
  rep.k = family.k();
  rep.ell = family.ell();
  rep.discrete = chain.time_kind == TimeKind::discrete;
  rep.grid = grid;
  rep.alphas = family.alphas;

  const double T = grid.back();
  const double u_max = std::max(T, family.alphas.back() * T) * (1.0 + 1e-9);
  const int n_u = 129;
  rep.u_nodes.resize(n_u);
  for (int idx = 0; idx < n_u; ++idx) rep.u_nodes[idx] = u_max * idx / (n_u - 1);

  const int d = rep.d, k = rep.k;
  rep.dtab.assign(k * k, Mat::Zero(n_u, d * d));
  rep.dcum.assign(k * k, Mat::Zero(n_u, d * d));
  for (int i = 1; i <= k; ++i)
    for (int j = 1; j <= k; ++j) {
      const int p = (i - 1) * k + (j - 1);
      for (int idx = 0; idx < n_u; ++idx) {
        const Vec x = zbar.at(std::min(rep.u_nodes[idx], zbar.t_max()));
        for (int l = 0; l < d; ++l)
          for (int m = 0; m < d; ++m) {
            auto r = D_coeff(dec, chain, family, i, j, l, m, x, x, opts);
            rep.dtab[p](idx, l * d + m) = r.value;
            if (i == k && j == k && idx == 0) {
              rep.trunc_W = r.W;
              rep.trunc_tail = r.tail_estimate;
            }
          }
      }
      for (int idx = 1; idx < n_u; ++idx)
        rep.dcum[p].row(idx) =
            rep.dcum[p].row(idx - 1) +
            0.5 * (rep.u_nodes[idx] - rep.u_nodes[idx - 1]) *
                (rep.dtab[p].row(idx) + rep.dtab[p].row(idx - 1));
    }

  if (rep.discrete && rep.ell > k) {
    rep.vtab.assign(rep.ell - k, Mat::Zero(n_u, d * d));
    rep.vcum.assign(rep.ell - k, Mat::Zero(n_u, d * d));
    FieldWorkspace ws = dec.make_workspace();
    const DiscreteMeasure& mu = dec.mu();
    Mat xi = Mat::Zero(dec.field().ell, dec.field().wp);
    Vec out(d);
    for (int i = k + 1; i <= rep.ell; ++i) {
      const int p = i - k - 1;
      for (int idx = 0; idx < n_u; ++idx) {
        if (rep.u_nodes[idx] > T * (1.0 + 1e-9)) break;
        const Vec x = zbar.at(std::min(rep.u_nodes[idx], zbar.t_max()));
        Mat acc = Mat::Zero(d, d);
        std::vector<int> odo(i, 0);
        while (true) {
          double w = 1.0;
          for (int r = 0; r < i; ++r) {
            xi.row(r) = mu.atoms.row(odo[r]);
            w *= mu.weights[odo[r]];
          }
          dec.component(i, x, xi, out, ws);
          acc += w * out * out.transpose();
          int r = 0;
          for (; r < i; ++r) {
            if (++odo[r] < mu.size()) break;
            odo[r] = 0;
          }
          if (r == i) break;
        }
        for (int l = 0; l < d; ++l)
          for (int m = 0; m < d; ++m) rep.vtab[p](idx, l * d + m) = acc(l, m);
      }
      for (int idx = 1; idx < n_u; ++idx)
        rep.vcum[p].row(idx) =
            rep.vcum[p].row(idx - 1) +
            0.5 * (rep.u_nodes[idx] - rep.u_nodes[idx - 1]) *
                (rep.vtab[p].row(idx) + rep.vtab[p].row(idx - 1));
    }
  }

  // paper-literal A(u) on [0, T] and its PSD margin
  rep.A_u_nodes.resize(n_u);
  rep.A_literal.resize(n_u, d * d);
  double min_eig = std::numeric_limits<double>::infinity();
  for (int idx = 0; idx < n_u; ++idx) {
    const double u = T * idx / (n_u - 1);
    rep.A_u_nodes[idx] = u;
    Mat A = Mat::Zero(d, d);
    for (int i = 1; i <= k; ++i)
      for (int j = 1; j <= k; ++j) {
        const int p = (i - 1) * k + (j - 1);
        // D at (Zbar(alpha_i u), Zbar(alpha_j u)) via fresh evaluation
        const Vec xi_ = zbar.at(std::min(rep.alphas[i - 1] * u, zbar.t_max()));
        const Vec xj_ = zbar.at(std::min(rep.alphas[j - 1] * u, zbar.t_max()));
        for (int l = 0; l < d; ++l)
          for (int m = 0; m < d; ++m)
            A(l, m) += D_coeff(dec, chain, family, i, j, l, m, xi_, xj_, opts).value;
        (void)p;
      }
    for (int l = 0; l < d; ++l)
      for (int m = 0; m < d; ++m) rep.A_literal(idx, l * d + m) = A(l, m);
    const Mat sym = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(sym);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  rep.A_min_eigenvalue = min_eig;

  // increment structure and monotonicity diagnostics
  double disc = 0.0;
  for (double s : grid)
    for (double t : grid) {
      const double mn = std::min(s, t);
      disc = std::max(disc, (predicted_cov_G(rep, s, t) - predicted_cov_G(rep, mn, mn))
                                .cwiseAbs()
                                .maxCoeff());
    }
  rep.min_structure_discrepancy = disc;
  double prev = -1.0;
  rep.var_nondecreasing = true;
  for (double t : grid) {
    const double v = predicted_cov_G(rep, t, t).diagonal().minCoeff();
    if (v < prev - 1e-12) rep.var_nondecreasing = false;
    prev = v;
  }

  // decay envelope of the resonance integrand for the dominant pair
  {
    FieldWorkspace ws = dec.make_workspace();
    const Vec x0 = zbar.at(0.0);
    const ComponentTable tk = tabulate_component(dec, chain, k, x0, ws);
    const Vec pi = chain.stationary_vector();
    const auto pairs = resonant_pairs(family, k, k);
    auto f = [&](double w) {
      std::vector<Mat> Wb;
      for (const auto& pr : pairs) Wb.push_back(pair_weights(chain, pi, pr.rho * w));
      return a_from_tables(tk, tk, pairs, Wb, pi, k, k, 0, 0);
    };
    const double wmax = std::max(rep.trunc_W, 4.0);
    rep.envelope = fit_exponential_envelope(f, wmax);
  }
  return rep;
}

Mat predicted_cov_component(const CovarianceReport& rep, int i, int j, double s, double t) {
  const int d = rep.d;
  if (i <= rep.k && j <= rep.k) return rep.d_integral(i, j, std::min(s, t));
  if (!rep.discrete) return Mat::Zero(d, d);
  if (i == j && i > rep.k) return rep.v_integral(i, std::min(s, t));
  return Mat::Zero(d, d);
}

Mat predicted_cov_G(const CovarianceReport& rep, double s, double t) {
  const int d = rep.d;
  Mat out = Mat::Zero(d, d);
  for (int i = 1; i <= rep.k; ++i)
    for (int j = 1; j <= rep.k; ++j)
      out += rep.d_integral(i, j, std::min(rep.alphas[i - 1] * s, rep.alphas[j - 1] * t));
  if (rep.discrete)
    for (int i = rep.k + 1; i <= rep.ell; ++i) out += rep.v_integral(i, std::min(s, t));
  return out;
}

// --- sampler ----------------------------------------------------------------------

G0Sampler::G0Sampler(const CovarianceReport& rep, std::uint64_t seed)
    : rep_(rep), rng_(splitmix64(seed)), gauss_(0.0, 1.0) {
  const int d = rep.d, k = rep.k;
  const int extras = rep.discrete ? rep.ell - k : 0;
  stacked_ = (k + extras) * d;

  iu_.push_back(0.0);
  for (double t : rep.grid) {
    for (int i = 1; i <= k; ++i) iu_.push_back(rep.alphas[i - 1] * t);
    if (extras > 0) iu_.push_back(t);
  }
  std::sort(iu_.begin(), iu_.end());
  iu_.erase(std::unique(iu_.begin(), iu_.end(),
                        [](double a, double b) { return std::abs(a - b) < 1e-14; }),
            iu_.end());

  auto stacked_integral = [&](double v) {
    Mat S = Mat::Zero(stacked_, stacked_);
    for (int i = 1; i <= k; ++i)
      for (int j = 1; j <= k; ++j)
        S.block((i - 1) * d, (j - 1) * d, d, d) = rep.d_integral(i, j, v);
    for (int e = 0; e < extras; ++e)
      S.block((k + e) * d, (k + e) * d, d, d) = rep.v_integral(k + 1 + e, v);
    return S;
  };

  for (std::size_t r = 0; r + 1 < iu_.size(); ++r) {
    Mat S = stacked_integral(iu_[r + 1]) - stacked_integral(iu_[r]);
    S = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Mat> es(S);
    const double lmax = std::max(es.eigenvalues().maxCoeff(), 0.0);
    if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, lmax) - 1e-12)
      throw std::runtime_error("predicted increment covariance is not PSD beyond jitter");
    Vec lam = es.eigenvalues().cwiseMax(1e-12 * std::max(lmax, 0.0));
    chol_.push_back(es.eigenvectors() * lam.cwiseSqrt().asDiagonal());
  }
  comp_.assign(k + extras, Mat::Zero(static_cast<int>(rep.grid.size()), d));
}

Mat G0Sampler::draw() {
  const int d = rep_.d, k = rep_.k;
  const int extras = rep_.discrete ? rep_.ell - k : 0;
  Vec S = Vec::Zero(stacked_);
  Vec z(stacked_);
  Mat G = Mat::Zero(static_cast<int>(rep_.grid.size()), d);

  // walk the increment grid, recording component values where needed
  std::size_t iu_pos = 0;
  auto record_all = [&](double u) {
    for (std::size_t r = 0; r < rep_.grid.size(); ++r) {
      const double t = rep_.grid[r];
      for (int i = 1; i <= k; ++i)
        if (std::abs(rep_.alphas[i - 1] * t - u) < 1e-12)
          comp_[i - 1].row(static_cast<int>(r)) = S.segment((i - 1) * d, d).transpose();
      for (int e = 0; e < extras; ++e)
        if (std::abs(t - u) < 1e-12)
          comp_[k + e].row(static_cast<int>(r)) = S.segment((k + e) * d, d).transpose();
    }
  };
  record_all(0.0);
  for (iu_pos = 0; iu_pos + 1 < iu_.size(); ++iu_pos) {
    for (int c = 0; c < stacked_; ++c) z[c] = gauss_(rng_);
    S += chol_[iu_pos] * z;
    record_all(iu_[iu_pos + 1]);
  }
  for (std::size_t r = 0; r < rep_.grid.size(); ++r) {
    for (int i = 0; i < k + extras; ++i) G.row(static_cast<int>(r)) += comp_[i].row(static_cast<int>(r));
  }
  return G;
}

}  // namespace nonconv

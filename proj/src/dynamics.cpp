#include "nonconv/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "nonconv/quadrature.hpp"

namespace nonconv {

void ScenarioGrid::validate() const {
  if (epsilon <= 0.0) throw validation_error("grid: epsilon must be > 0");
  if (T_final <= 0.0) throw validation_error("grid: T_final must be > 0");
  if (h > 0.0 && h > epsilon * T_final / 100.0 * (1.0 + 1e-12))
    throw validation_error("grid: micro step h must not exceed epsilon*T/100");
  double prev = 0.0;
  if (output_times.empty()) throw validation_error("grid: no output times");
  for (double t : output_times) {
    if (t <= prev || t > T_final * (1.0 + 1e-12))
      throw validation_error("grid: output times must increase within (0, T]");
    prev = t;
  }
}

std::vector<double> ScenarioGrid::uniform_outputs(double T, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = T * (i + 1) / n;
  return out;
}

// --- averaged flow ---------------------------------------------------------

AveragedFlow::AveragedFlow(std::shared_ptr<const DecomposedField> dec, Vec x0, double t_max)
    : dec_(std::move(dec)), x0_(std::move(x0)), t_max_(t_max) {
  const int d = static_cast<int>(x0_.size());
  auto run = [&](int n, Mat& vals, Mat& ders) {
    const double dt = t_max_ / n;
    vals.resize(n + 1, d);
    ders.resize(n + 1, d);
    Vec x = x0_, k1(d), k2(d), k3(d), k4(d);
    FieldWorkspace ws = dec_->make_workspace();
    auto f = [&](const Vec& y, Vec& out) { dec_->bar(y, out, ws); };
    f(x, k1);
    vals.row(0) = x.transpose();
    ders.row(0) = k1.transpose();
    Vec tmp(d);
    for (int s = 0; s < n; ++s) {
      f(x, k1);
      tmp = x + 0.5 * dt * k1;
      f(tmp, k2);
      tmp = x + 0.5 * dt * k2;
      f(tmp, k3);
      tmp = x + dt * k3;
      f(tmp, k4);
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite())
        throw std::runtime_error("averaged flow diverged at t=" + std::to_string((s + 1) * dt));
      f(x, k1);
      vals.row(s + 1) = x.transpose();
      ders.row(s + 1) = k1.transpose();
    }
  };

  int n = 256;
  Mat vals, ders;
  run(n, vals, ders);
  for (int level = 0; level < 10; ++level) {
    Mat v2, d2;
    run(2 * n, v2, d2);
    double err = 0.0;
    for (int i = 0; i <= n; ++i)
      err = std::max(err, (v2.row(2 * i) - vals.row(i)).cwiseAbs().maxCoeff());
    vals.swap(v2);
    ders.swap(d2);
    n *= 2;
    refine_err_ = err;
    if (err < 1e-10) break;
  }
  values_ = vals;
  derivs_ = ders;
  dt_ = t_max_ / n;
}

void AveragedFlow::at(double t, Eigen::Ref<Vec> out) const {
  if (t < -1e-12 || t > t_max_ * (1.0 + 1e-12))
    throw std::out_of_range("averaged flow queried outside [0, t_max]");
  t = std::clamp(t, 0.0, t_max_);
  const int n = static_cast<int>(values_.rows()) - 1;
  int i = std::min(static_cast<int>(t / dt_), n - 1);
  const double u = (t - i * dt_) / dt_;
  // cubic Hermite on [t_i, t_{i+1}]
  const double h00 = (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u);
  const double h10 = u * (1.0 - u) * (1.0 - u);
  const double h01 = u * u * (3.0 - 2.0 * u);
  const double h11 = u * u * (u - 1.0);
  out = h00 * values_.row(i).transpose() + h10 * dt_ * derivs_.row(i).transpose() +
        h01 * values_.row(i + 1).transpose() + h11 * dt_ * derivs_.row(i + 1).transpose();
}

Vec AveragedFlow::at(double t) const {
  Vec out(dim());
  at(t, out);
  return out;
}

Mat AveragedFlow::gradient_at(double t) const { return dec_->bar_gradient(at(t)); }

// --- breakpoints ------------------------------------------------------------

namespace {

// Slow times in (0, t_hi) where the j-th sampled copy of a continuous-time
// chain signal jumps.
void scale_breakpoints(const PathHandle& path, const TimeScaleFamily& family, int j,
                       double eps, double t_hi, std::vector<double>& out) {
  std::vector<double> jumps;
  path.jumps_in(family.q(j, 0.0), family.q(j, t_hi / eps), jumps);
  for (double J : jumps) {
    const double t = eps * family.q_inverse(j, J);
    if (t > 0.0 && t < t_hi) out.push_back(t);
  }
}

std::vector<double> merged_breakpoints(const PathHandle& path, const TimeScaleFamily& family,
                                       int max_scale, double eps, double t_hi,
                                       TimeKind kind) {
  std::vector<double> cuts;
  if (kind == TimeKind::continuous) {
    for (int j = 1; j <= max_scale; ++j) scale_breakpoints(path, family, j, eps, t_hi, cuts);
  } else {
    const auto n = static_cast<std::int64_t>(std::ceil(t_hi / eps));
    cuts.reserve(n);
    for (std::int64_t i = 1; i * eps < t_hi; ++i) cuts.push_back(i * eps);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

TimeKind path_kind(const PathHandle& path) {
  if (path.is_chain()) return path.chain_spec()->time_kind;
  return TimeKind::discrete;
}

// Fills xi rows 1..rows with the sampled signal at slow time t.
inline void sample_signal(const PathHandle& path, const TimeScaleFamily& family, double eps,
                          double t, int rows, TimeKind kind, Mat& xi, Vec& obs) {
  for (int j = 1; j <= rows; ++j) {
    const double fast =
        kind == TimeKind::continuous ? family.q(j, t / eps) : family.q(j, std::floor(t / eps));
    path.eval(fast, obs);
    xi.row(j - 1) = obs.transpose();
  }
}

}  // namespace

double required_horizon(const TimeScaleFamily& family, const ScenarioGrid& grid,
                        TimeKind kind) {
  double max_upper = grid.T_final;
  for (int i = 1; i <= family.k(); ++i)
    max_upper = std::max(max_upper, grid.T_final / family.alphas[i - 1]);
  const double fast = kind == TimeKind::continuous
                          ? max_upper / grid.epsilon
                          : std::ceil(max_upper / grid.epsilon);
  return family.q(family.ell(), fast) + 1.0;
}

// --- slow motion -------------------------------------------------------------

Mat integrate_slow(const FieldSpec& field, const PathHandle& path,
                   const TimeScaleFamily& family, const ScenarioGrid& grid, const Vec& x0) {
  grid.validate();
  const TimeKind kind = path_kind(path);
  const int d = field.d;
  const double T = grid.T_final, eps = grid.epsilon;
  if (family.q(family.ell(), kind == TimeKind::continuous ? T / eps : std::ceil(T / eps)) >
      path.horizon() * (1.0 + 1e-12))
    throw std::invalid_argument("integrate_slow: path horizon is too short for the grid");

  Mat out(static_cast<int>(grid.output_times.size()), d);

  if (kind == TimeKind::discrete) {
    // exact recursion X(n+1) = X(n) + eps B(X(n), xi(q_1(n)), ...)
    const auto steps = static_cast<std::int64_t>(std::floor(T / eps));
    Vec x = x0, b(d), obs(field.wp);
    Mat xi(field.ell, field.wp);
    std::size_t oi = 0;
    auto record = [&](std::int64_t n) {
      while (oi < grid.output_times.size() &&
             static_cast<std::int64_t>(std::floor(grid.output_times[oi] / eps)) == n) {
        out.row(static_cast<int>(oi)) = x.transpose();
        ++oi;
      }
    };
    record(0);
    for (std::int64_t n = 0; n < steps && oi < grid.output_times.size(); ++n) {
      for (int j = 1; j <= field.ell; ++j) {
        path.eval(family.q(j, static_cast<double>(n)), obs);
        xi.row(j - 1) = obs.transpose();
      }
      field.eval(x, xi, b);
      x += eps * b;
      if (!x.allFinite())
        throw std::runtime_error("slow motion diverged at step " + std::to_string(n + 1));
      record(n + 1);
    }
    while (oi < grid.output_times.size()) {
      out.row(static_cast<int>(oi)) = x.transpose();
      ++oi;
    }
    return out;
  }

  const std::vector<double> cuts = merged_breakpoints(path, family, family.ell(), eps, T, kind);
  const double h = grid.micro_step();

  Vec x = x0, k1(d), k2(d), k3(d), k4(d), tmp(d), obs(field.wp);
  Mat xi(field.ell, field.wp);
  double t = 0.0;
  std::size_t ci = 0, oi = 0;
  while (t < T - 1e-15) {
    double t_next = std::min(T, (std::floor(t / h + 1e-9) + 1.0) * h);
    while (ci < cuts.size() && cuts[ci] <= t + 1e-15) ++ci;
    if (ci < cuts.size()) t_next = std::min(t_next, cuts[ci]);
    if (oi < grid.output_times.size()) t_next = std::min(t_next, grid.output_times[oi]);
    const double dt = t_next - t;
    if (dt > 1e-15) {
      sample_signal(path, family, eps, 0.5 * (t + t_next), field.ell, kind, xi, obs);
      field.eval(x, xi, k1);
      tmp = x + 0.5 * dt * k1;
      field.eval(tmp, xi, k2);
      tmp = x + 0.5 * dt * k2;
      field.eval(tmp, xi, k3);
      tmp = x + dt * k3;
      field.eval(tmp, xi, k4);
      x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!x.allFinite())
        throw std::runtime_error("slow motion diverged at t=" + std::to_string(t_next));
    }
    t = t_next;
    while (oi < grid.output_times.size() && grid.output_times[oi] <= t + 1e-15) {
      out.row(static_cast<int>(oi)) = x.transpose();
      ++oi;
    }
  }
  while (oi < grid.output_times.size()) {
    out.row(static_cast<int>(oi)) = x.transpose();
    ++oi;
  }
  return out;
}

Mat integrate_averaged(const AveragedFlow& flow, const ScenarioGrid& grid) {
  Mat out(static_cast<int>(grid.output_times.size()), flow.dim());
  Vec x(flow.dim());
  for (std::size_t i = 0; i < grid.output_times.size(); ++i) {
    flow.at(grid.output_times[i], x);
    out.row(static_cast<int>(i)) = x.transpose();
  }
  return out;
}

// --- component integrals ------------------------------------------------------

std::vector<Vec> integrate_component(const DecomposedField& dec, int which,
                                     const PathHandle& path, const TimeScaleFamily& family,
                                     const AveragedFlow& zbar, double eps,
                                     const std::vector<double>& uppers) {
  const FieldSpec& field = dec.field();
  const int d = field.d;
  const TimeKind kind = path_kind(path);
  std::vector<Vec> results;
  if (uppers.empty()) return results;
  for (std::size_t i = 1; i < uppers.size(); ++i)
    if (uppers[i] < uppers[i - 1]) throw std::invalid_argument("uppers must ascend");
  const double t_hi = uppers.back();

  const int jump_scales = which < 0 ? family.ell() : std::min(which, family.ell());
  std::vector<double> cuts = kind == TimeKind::continuous && which == 0
                                 ? std::vector<double>{}
                                 : merged_breakpoints(path, family, std::max(jump_scales, 1),
                                                      eps, t_hi, kind);
  // cap panel length so the smooth factor Zbar stays resolved
  const double max_panel = std::max(t_hi / 256.0, 1e-9);

  FieldWorkspace ws = dec.make_workspace();
  Vec acc = Vec::Zero(d), val(d), xq(zbar.dim()), obs(field.wp);
  Mat xi(field.ell, field.wp);

  std::size_t ci = 0, ui = 0;
  double s = 0.0;
  while (ui < uppers.size() && uppers[ui] <= 1e-15) results.push_back(acc), ++ui;
  while (ui < uppers.size()) {
    double s_next = uppers[ui];
    while (ci < cuts.size() && cuts[ci] <= s + 1e-15) ++ci;
    if (ci < cuts.size()) s_next = std::min(s_next, cuts[ci]);
    s_next = std::min(s_next, s + max_panel);
    const double len = s_next - s;
    if (len > 1e-15) {
      // signal is frozen on (s, s_next); pick the quadrature order by length
      const double mid = 0.5 * (s + s_next);
      if (which != 0)
        sample_signal(path, family, eps, mid, which < 0 ? field.ell : which, kind, xi, obs);
      const GaussLegendre& g =
          len > 1e-3 * t_hi ? gl4() : (len > 1e-6 * t_hi ? gl2() : gl1());
      for (std::size_t qn = 0; qn < g.nodes.size(); ++qn) {
        const double sq = mid + 0.5 * len * g.nodes[qn];
        zbar.at(sq, xq);
        if (which == 0)
          dec.bar(xq, val, ws);
        else if (which < 0)
          field.eval(xq, xi, val);
        else
          dec.component(which, xq, xi, val, ws);
        acc += 0.5 * len * g.weights[qn] * val;
      }
    }
    s = s_next;
    while (ui < uppers.size() && uppers[ui] <= s + 1e-15) {
      results.push_back(acc);
      ++ui;
    }
  }
  return results;
}

// --- bundle --------------------------------------------------------------------

TrajectoryBundle simulate_bundle(const DecomposedField& dec, const TimeScaleFamily& family,
                                 const AveragedFlow& zbar, const ScenarioGrid& grid,
                                 const Vec& x0, const PathHandle& path,
                                 const BundleOptions& opts) {
  grid.validate();
  const FieldSpec& field = dec.field();
  const int d = field.d, ell = family.ell(), k = family.k();
  const int n_out = static_cast<int>(grid.output_times.size());
  const double eps = grid.epsilon;

  TrajectoryBundle b;
  b.times = grid.output_times;
  b.Zbar = integrate_averaged(zbar, grid);
  b.has_slow = opts.compute_slow;
  if (opts.compute_slow) b.Z = integrate_slow(field, path, family, grid, x0);

  // Y = x0 + int_0^t B(Zbar(s), xi(q(s/eps))) ds
  auto y_vals = integrate_component(dec, -1, path, family, zbar, eps, grid.output_times);
  b.Y.resize(n_out, d);
  for (int i = 0; i < n_out; ++i) b.Y.row(i) = (x0 + y_vals[i]).transpose();

  // Y_0 = x0 + int bar_B(Zbar)
  auto y0_vals = integrate_component(dec, 0, path, family, zbar, eps, grid.output_times);

  // components: Y_i(t) needs upper t/alpha_i (i <= k) or t (i > k); the
  // representation check needs the integral up to t itself.
  b.Y_comp.assign(ell, Mat(n_out, d));
  std::vector<Mat> comp_at_t(ell, Mat(n_out, d));
  for (int i = 1; i <= ell; ++i) {
    std::vector<double> uppers;
    uppers.reserve(2 * n_out);
    for (double t : grid.output_times) {
      uppers.push_back(family.tau(i, t));
      uppers.push_back(t);
    }
    std::sort(uppers.begin(), uppers.end());
    uppers.erase(std::unique(uppers.begin(), uppers.end()), uppers.end());
    auto vals = integrate_component(dec, i, path, family, zbar, eps, uppers);
    auto lookup = [&](double u) {
      const auto it = std::lower_bound(uppers.begin(), uppers.end(), u - 1e-15);
      return vals[static_cast<std::size_t>(it - uppers.begin())];
    };
    for (int r = 0; r < n_out; ++r) {
      b.Y_comp[i - 1].row(r) = lookup(family.tau(i, grid.output_times[r])).transpose();
      comp_at_t[i - 1].row(r) = lookup(grid.output_times[r]).transpose();
    }
  }

  // representation residual: Y(t) - Y0(t) - sum_{i<=k} Y_i(alpha_i t) - sum_{i>k} Y_i(t),
  // where Y_i(alpha_i t) is the component integral up to t.
  double resid = 0.0;
  for (int r = 0; r < n_out; ++r) {
    Vec rhs = x0 + y0_vals[r];
    for (int i = 1; i <= k; ++i) rhs += comp_at_t[i - 1].row(r).transpose();
    for (int i = k + 1; i <= ell; ++i) rhs += b.Y_comp[i - 1].row(r).transpose();
    resid = std::max(resid, (b.Y.row(r).transpose() - rhs).cwiseAbs().maxCoeff());
  }
  b.identity_residual = resid;

  const double scale = 1.0 / std::sqrt(eps);
  b.G = scale * (b.Y - b.Zbar);
  b.G_comp.resize(ell);
  for (int i = 0; i < ell; ++i) b.G_comp[i] = scale * b.Y_comp[i];
  if (opts.compute_slow) b.Q = scale * (b.Z - b.Zbar);
  return b;
}

// --- Riemann block sums -----------------------------------------------------------

RiemannSumReport riemann_sum_G(const DecomposedField& dec, const PathHandle& path,
                               const TimeScaleFamily& family, const AveragedFlow& zbar,
                               int i, int N, double t) {
  if (N < 1) throw std::invalid_argument("riemann_sum_G: N must be >= 1");
  const FieldSpec& field = dec.field();
  const int d = field.d;
  const TimeKind kind = path_kind(path);
  const double S_full = N * family.tau(i, t);
  const double S_blocks = std::floor(S_full) + 1.0;  // blocks n = 0..[N tau_i(t)]

  if (family.q(family.ell(), S_blocks) > path.horizon() * (1.0 + 1e-12))
    throw std::invalid_argument("riemann_sum_G: path horizon too short");

  // fast-time integrand B_i(Zbar(s/N), xi(q_1(s)),...,xi(q_i(s)))
  std::vector<double> cuts;
  if (kind == TimeKind::continuous) {
    std::vector<double> jumps;
    for (int j = 1; j <= i; ++j) {
      path.jumps_in(0.0, family.q(j, S_blocks), jumps);
      for (double J : jumps) {
        const double s = family.q_inverse(j, J);
        if (s > 0.0 && s < S_blocks) cuts.push_back(s);
      }
    }
  } else {
    for (double s = 1.0; s < S_blocks; s += 1.0) cuts.push_back(s);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  FieldWorkspace ws = dec.make_workspace();
  Vec acc_full = Vec::Zero(d), acc_blocks = Vec::Zero(d), val(d), xq(zbar.dim()),
      obs(field.wp);
  Mat xi(field.ell, field.wp);
  const GaussLegendre& g = gl4();

  double s = 0.0;
  std::size_t ci = 0;
  bool full_done = false;
  while (s < S_blocks - 1e-12) {
    double s_next = std::min(S_blocks, std::floor(s + 1e-9) + 1.0);
    if (!full_done && S_full > s + 1e-12) s_next = std::min(s_next, S_full);
    while (ci < cuts.size() && cuts[ci] <= s + 1e-12) ++ci;
    if (ci < cuts.size()) s_next = std::min(s_next, cuts[ci]);
    const double len = s_next - s;
    if (len > 1e-12) {
      const double mid = 0.5 * (s + s_next);
      for (int j = 1; j <= i; ++j) {
        const double fast = kind == TimeKind::continuous ? family.q(j, mid)
                                                         : family.q(j, std::floor(mid));
        path.eval(fast, obs);
        xi.row(j - 1) = obs.transpose();
      }
      Vec seg = Vec::Zero(d);
      for (std::size_t qn = 0; qn < g.nodes.size(); ++qn) {
        const double sq = mid + 0.5 * len * g.nodes[qn];
        zbar.at(sq / N, xq);
        dec.component(i, xq, xi, val, ws);
        seg += 0.5 * len * g.weights[qn] * val;
      }
      acc_blocks += seg;
      if (s_next <= S_full + 1e-12) acc_full += seg;
    }
    if (s_next >= S_full - 1e-12) full_done = true;
    s = s_next;
  }

  RiemannSumReport rep;
  rep.block_sum = acc_blocks / std::sqrt(static_cast<double>(N));
  rep.g_continuous = acc_full / std::sqrt(static_cast<double>(N));
  rep.difference = (rep.block_sum - rep.g_continuous).cwiseAbs().maxCoeff();
  rep.bound = 2.0 * field.K * t * d / std::sqrt(static_cast<double>(N));
  rep.within_bound = rep.difference <= rep.bound * (1.0 + 1e-9);
  return rep;
}

// --- limiting linear equation -------------------------------------------------------

VolterraSolution solve_limit_ode(const std::function<Vec(double)>& G,
                                 const std::function<Mat(double)>& M, double T,
                                 const std::vector<double>& output_times, double gronwall_C,
                                 double tol) {
  const Vec g0 = G(0.0);
  const int d = static_cast<int>(g0.size());
  if (!g0.allFinite()) throw std::invalid_argument("solve_limit_ode: non-finite input");

  auto solve_on = [&](int n, Mat& vals) {
    const double h = T / n;
    vals.resize(n + 1, d);
    Vec rhs(d), q(d);
    Vec running = Vec::Zero(d);
    std::vector<Vec> Mq(n + 1, Vec(d));
    vals.row(0) = G(0.0).transpose();
    Mq[0] = M(0.0) * vals.row(0).transpose();
    for (int i = 1; i <= n; ++i) {
      const double t = i * h;
      if (i == 1)
        running = 0.5 * h * Mq[0];
      else
        running += h * Mq[i - 1];
      const Mat Mi = M(t);
      rhs = G(t) + running;
      q = (Mat::Identity(d, d) - 0.5 * h * Mi).partialPivLu().solve(rhs);
      if (!q.allFinite()) throw std::runtime_error("limit equation solve diverged");
      vals.row(i) = q.transpose();
      Mq[i] = Mi * q;
    }
  };

  int n = 128;
  Mat vals, prev;
  solve_on(n, vals);
  double err = 0.0;
  for (int level = 0; level < 12; ++level) {
    prev.swap(vals);
    solve_on(2 * n, vals);
    err = 0.0;
    for (int i = 0; i <= n; ++i)
      err = std::max(err, (vals.row(2 * i) - prev.row(i)).cwiseAbs().maxCoeff());
    n *= 2;
    if (err < tol) break;
  }

  VolterraSolution sol;
  sol.refine_error = err;
  sol.times = output_times;
  sol.values.resize(static_cast<int>(output_times.size()), d);
  const double h = T / n;
  auto value_at = [&](double t) -> Vec {
    const int i = std::min(static_cast<int>(t / h), n - 1);
    const double u = (t - i * h) / h;
    return ((1.0 - u) * vals.row(i) + u * vals.row(i + 1)).transpose();
  };
  for (std::size_t r = 0; r < output_times.size(); ++r)
    sol.values.row(static_cast<int>(r)) = value_at(output_times[r]).transpose();

  // Gronwall envelope |Q(t)| <= |G(t)| + C e^{Ct} int_0^t |G|
  double intG = 0.0, excess = -1e300, prev_norm = G(0.0).norm();
  for (int i = 1; i <= n; ++i) {
    const double t = i * h;
    const double gn = G(t).norm();
    intG += 0.5 * h * (prev_norm + gn);
    prev_norm = gn;
    const double bound = gn + gronwall_C * std::exp(gronwall_C * t) * intG;
    excess = std::max(excess, vals.row(i).norm() - bound);
  }
  sol.gronwall_excess = excess;
  sol.gronwall_ok = excess <= 1e-9 + 1e-9 * intG;
  return sol;
}

VolterraSolution solve_limit_ode(const std::vector<double>& times, const Mat& G_values,
                                 const std::function<Mat(double)>& M, double gronwall_C,
                                 double tol) {
  if (times.empty()) throw std::invalid_argument("solve_limit_ode: empty grid");
  auto G = [&times, &G_values](double t) -> Vec {
    // linear interpolation with a zero anchor at t=0
    if (t <= times.front()) {
      const double u = times.front() > 0 ? t / times.front() : 1.0;
      return u * G_values.row(0).transpose();
    }
    const auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return G_values.row(G_values.rows() - 1).transpose();
    const auto i = static_cast<int>(it - times.begin());
    if (i == 0) return G_values.row(0).transpose();
    const double u = (t - times[i - 1]) / (times[i] - times[i - 1]);
    return ((1.0 - u) * G_values.row(i - 1) + u * G_values.row(i)).transpose();
  };
  return solve_limit_ode(G, M, times.back(), times, gronwall_C, tol);
}

}  // namespace nonconv

#include "nonconv/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "nonconv/quadrature.hpp"

namespace nonconv {

void ensure_gradient(FieldSpec& spec) {
  if (spec.grad_x) return;
  const auto eval = spec.eval;
  const int d = spec.d;
  spec.grad_x = [eval, d](Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi,
                          Eigen::Ref<Mat> out) {
    Vec xp(d), fp(d), fm(d);
    for (int j = 0; j < d; ++j) {
      const double h = 1e-5 * (1.0 + std::abs(x[j]));
      xp = x;
      xp[j] += h;
      eval(xp, xi, fp);
      xp[j] -= 2.0 * h;
      eval(xp, xi, fm);
      out.col(j) = (fp - fm) / (2.0 * h);
    }
  };
  spec.grad_is_fallback = true;
}

FieldValidationReport validate_field(const FieldSpec& spec, int n_samples,
                                     std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("validate_field: n_samples must be >= 1");
  if (!spec.eval) throw validation_error("field has no evaluator");
  FieldValidationReport rep;
  rep.grad_from_fallback = spec.grad_is_fallback;

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto draw_x = [&](Vec& x) {
    for (int i = 0; i < spec.d; ++i)
      x[i] = spec.x_lo[i] + (spec.x_hi[i] - spec.x_lo[i]) * u01(rng);
  };
  auto draw_xi = [&](Mat& xi) {
    for (int j = 0; j < spec.ell; ++j)
      for (int c = 0; c < spec.wp; ++c)
        xi(j, c) = spec.xi_lo[c] + (spec.xi_hi[c] - spec.xi_lo[c]) * u01(rng);
  };

  Vec x(spec.d), x2(spec.d), b(spec.d), b2(spec.d);
  Mat xi(spec.ell, spec.wp), xi2(spec.ell, spec.wp);
  Mat g(spec.d, spec.d), gp(spec.d, spec.d), gm(spec.d, spec.d);

  FieldSpec withgrad = spec;
  ensure_gradient(withgrad);

  for (int s = 0; s < n_samples; ++s) {
    draw_x(x);
    draw_xi(xi);
    spec.eval(x, xi, b);
    if (!b.allFinite()) throw validation_error("field evaluator returned non-finite values");
    rep.worst_bound_ratio = std::max(rep.worst_bound_ratio, b.cwiseAbs().maxCoeff() / spec.K);

    draw_x(x2);
    draw_xi(xi2);
    spec.eval(x2, xi2, b2);
    double denom = (x - x2).norm();
    for (int j = 0; j < spec.ell; ++j)
      for (int c = 0; c < spec.wp; ++c)
        denom += std::pow(std::abs(xi(j, c) - xi2(j, c)), spec.kappa);
    if (denom > 1e-12)
      rep.worst_joint_ratio =
          std::max(rep.worst_joint_ratio, (b - b2).cwiseAbs().maxCoeff() / (spec.K * denom));

    withgrad.grad_x(x, xi, g);
    rep.worst_grad_ratio = std::max(rep.worst_grad_ratio, g.cwiseAbs().maxCoeff() / spec.K);

    for (int j = 0; j < spec.d; ++j) {
      const double h = 1e-4 * (1.0 + std::abs(x[j]));
      Vec xp = x;
      xp[j] += h;
      withgrad.grad_x(xp, xi, gp);
      xp[j] -= 2.0 * h;
      withgrad.grad_x(xp, xi, gm);
      const double hess = ((gp - gm) / (2.0 * h)).cwiseAbs().maxCoeff();
      rep.worst_hessian_ratio = std::max(rep.worst_hessian_ratio, hess / spec.K);
    }
  }
  const double tol = 1.0 + 1e-6;
  rep.pass = rep.worst_bound_ratio <= tol && rep.worst_joint_ratio <= tol &&
             rep.worst_grad_ratio <= tol && rep.worst_hessian_ratio <= tol;
  return rep;
}

// --- decomposition --------------------------------------------------------

DecomposedField::DecomposedField(FieldSpec field, DiscreteMeasure mu, std::int64_t term_budget)
    : field_(std::move(field)), mu_(std::move(mu)) {
  ensure_gradient(field_);
  double terms = 1.0;
  for (int i = 0; i < field_.ell; ++i) terms *= mu_.size();
  if (terms > static_cast<double>(term_budget))
    throw validation_error(
        "product quadrature budget exceeded (" + std::to_string(terms) + " > " +
        std::to_string(term_budget) +
        " terms); reduce the atom count or switch to a sparse/Monte Carlo quadrature mode");
}

FieldWorkspace DecomposedField::make_workspace() const {
  FieldWorkspace ws;
  ws.xi.resize(field_.ell, field_.wp);
  ws.acc.resize(field_.d);
  ws.tmp.resize(field_.d);
  ws.bar.resize(field_.d);
  ws.pi_flat.assign(static_cast<std::size_t>(field_.ell + 1) * field_.d, 0.0);
  ws.odo.assign(field_.ell, 0);
  return ws;
}

void DecomposedField::partial_integral(int i, Eigen::Ref<const Vec> x,
                                       Eigen::Ref<const Mat> xi, Eigen::Ref<Vec> out,
                                       FieldWorkspace& ws) const {
  const int ell = field_.ell, na = mu_.size(), free = ell - i;
  for (int r = 0; r < i; ++r) ws.xi.row(r) = xi.row(r);
  if (free == 0) {
    field_.eval(x, ws.xi, out);
    return;
  }
  out.setZero();
  std::fill(ws.odo.begin(), ws.odo.end(), 0);
  while (true) {
    double w = 1.0;
    for (int r = 0; r < free; ++r) {
      ws.xi.row(i + r) = mu_.atoms.row(ws.odo[r]);
      w *= mu_.weights[ws.odo[r]];
    }
    field_.eval(x, ws.xi, ws.tmp);
    out += w * ws.tmp;
    int r = 0;
    for (; r < free; ++r) {
      if (++ws.odo[r] < na) break;
      ws.odo[r] = 0;
    }
    if (r == free) break;
  }
}

void DecomposedField::partial_integrals_all(Eigen::Ref<const Vec> x,
                                            Eigen::Ref<const Mat> xi,
                                            FieldWorkspace& ws) const {
  const int ell = field_.ell, d = field_.d;
  Eigen::Map<Mat> pi(ws.pi_flat.data(), ell + 1, d);
  Vec out(d);
  for (int i = 0; i <= ell; ++i) {
    partial_integral(i, x, xi, out, ws);
    pi.row(i) = out.transpose();
  }
}

void DecomposedField::bar(Eigen::Ref<const Vec> x, Eigen::Ref<Vec> out,
                          FieldWorkspace& ws) const {
  partial_integral(0, x, ws.xi, out, ws);
}

Vec DecomposedField::bar(const Vec& x) const {
  FieldWorkspace ws = make_workspace();
  Vec out(field_.d);
  bar(x, out, ws);
  return out;
}

Mat DecomposedField::bar_gradient(const Vec& x) const {
  const int ell = field_.ell, na = mu_.size();
  Mat xi(ell, field_.wp), g(field_.d, field_.d), acc = Mat::Zero(field_.d, field_.d);
  std::vector<int> odo(ell, 0);
  while (true) {
    double w = 1.0;
    for (int r = 0; r < ell; ++r) {
      xi.row(r) = mu_.atoms.row(odo[r]);
      w *= mu_.weights[odo[r]];
    }
    field_.grad_x(x, xi, g);
    acc += w * g;
    int r = 0;
    for (; r < ell; ++r) {
      if (++odo[r] < na) break;
      odo[r] = 0;
    }
    if (r == ell) break;
  }
  return acc;
}

void DecomposedField::component(int i, Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi,
                                Eigen::Ref<Vec> out, FieldWorkspace& ws) const {
  if (i < 1 || i > field_.ell) throw std::out_of_range("component index out of range");
  partial_integral(i, x, xi, out, ws);
  partial_integral(i - 1, x, xi, ws.bar, ws);
  out -= ws.bar;
}

Vec DecomposedField::component(int i, const Vec& x, const Mat& xi) const {
  FieldWorkspace ws = make_workspace();
  Vec out(field_.d);
  component(i, x, xi, out, ws);
  return out;
}

std::function<Vec(const Vec&)> average_field(const FieldSpec& spec, const DiscreteMeasure& mu,
                                             std::int64_t term_budget) {
  auto dec = std::make_shared<DecomposedField>(spec, mu, term_budget);
  return [dec](const Vec& x) { return dec->bar(x); };
}

Vec empirical_average(const FieldSpec& spec, const PathHandle& path,
                      const TimeScaleFamily& family, const Vec& x, double T_window) {
  const int ell = family.ell();
  if (ell != spec.ell) throw validation_error("field/family fast-argument counts differ");
  if (family.q(ell, T_window) > path.horizon() * (1.0 + 1e-12))
    throw std::invalid_argument("empirical_average: window exceeds the path horizon");

  Vec acc = Vec::Zero(spec.d);
  Mat xi(ell, spec.wp);
  Vec b(spec.d);

  if (path.is_chain() && path.chain_spec()->time_kind == TimeKind::continuous) {
    // split [0, T_window] where any sampled copy of the signal jumps
    std::vector<double> cuts{0.0, T_window};
    std::vector<double> jumps;
    for (int j = 1; j <= ell; ++j) {
      path.jumps_in(family.q(j, 0.0), family.q(j, T_window), jumps);
      for (double J : jumps) {
        const double t = family.q_inverse(j, J);
        if (t > 0.0 && t < T_window) cuts.push_back(t);
      }
    }
    std::sort(cuts.begin(), cuts.end());
    const GaussLegendre& g = gl4();
    Vec obs(spec.wp);
    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
      const double a = cuts[seg], bnd = cuts[seg + 1];
      if (bnd - a < 1e-15) continue;
      const double c = 0.5 * (a + bnd), h = 0.5 * (bnd - a);
      for (std::size_t q = 0; q < g.nodes.size(); ++q) {
        const double t = c + h * g.nodes[q];
        for (int j = 1; j <= ell; ++j) {
          path.eval(family.q(j, t), obs);
          xi.row(j - 1) = obs.transpose();
        }
        spec.eval(x, xi, b);
        acc += g.weights[q] * h * b;
      }
    }
    return acc / T_window;
  }

  // discrete time: plain mean over integer times
  const auto N = static_cast<std::int64_t>(std::floor(T_window));
  for (std::int64_t n = 0; n <= N; ++n) {
    for (int j = 1; j <= ell; ++j) xi.row(j - 1) = path.eval(family.q(j, static_cast<double>(n))).transpose();
    spec.eval(x, xi, b);
    acc += b;
  }
  return acc / static_cast<double>(N + 1);
}

// --- catalog ---------------------------------------------------------------

FieldSpec make_poly_field(int ell, const std::vector<PolyTerm>& terms, double K,
                          double kappa) {
  FieldSpec f;
  f.d = 1;
  f.ell = ell;
  f.wp = 1;
  f.K = K;
  f.kappa = kappa;
  f.name = "poly";
  f.x_lo = Vec::Constant(1, -2.0);
  f.x_hi = Vec::Constant(1, 2.0);
  f.xi_lo = Vec::Constant(1, -1.0);
  f.xi_hi = Vec::Constant(1, 1.0);
  auto tms = terms;
  f.eval = [tms](Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi, Eigen::Ref<Vec> out) {
    double v = 0.0;
    for (const auto& t : tms) {
      double m = t.coef * std::pow(x[0], t.xpow);
      for (std::size_t j = 0; j < t.xipow.size(); ++j)
        for (int r = 0; r < t.xipow[j]; ++r) m *= xi(static_cast<int>(j), 0);
      v += m;
    }
    out[0] = v;
  };
  f.grad_x = [tms](Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi, Eigen::Ref<Mat> out) {
    double v = 0.0;
    for (const auto& t : tms) {
      if (t.xpow == 0) continue;
      double m = t.coef * t.xpow * std::pow(x[0], t.xpow - 1);
      for (std::size_t j = 0; j < t.xipow.size(); ++j)
        for (int r = 0; r < t.xipow[j]; ++r) m *= xi(static_cast<int>(j), 0);
      v += m;
    }
    out(0, 0) = v;
  };
  return f;
}

FieldSpec make_field(const std::string& name, const std::vector<double>& params) {
  if (name == "product_linear") {
    // B(x, xi1, xi2) = -x + xi1*xi2
    FieldSpec f = make_poly_field(
        2, {{-1.0, 1, {0, 0}}, {1.0, 0, {1, 1}}}, 3.0, 1.0);
    f.name = name;
    return f;
  }
  if (name == "product_linear3") {
    // B(x, xi1, xi2, xi3) = -x + xi1*xi2 + xi3
    FieldSpec f = make_poly_field(
        3, {{-1.0, 1, {0, 0, 0}}, {1.0, 0, {1, 1, 0}}, {1.0, 0, {0, 0, 1}}}, 4.0, 1.0);
    f.name = name;
    return f;
  }
  if (name == "linear") {
    // B = -x (no fast dependence), ell from params[0] if given
    const int ell = params.empty() ? 1 : static_cast<int>(params[0]);
    FieldSpec f = make_poly_field(ell, {{-1.0, 1, std::vector<int>(ell, 0)}}, 2.0, 1.0);
    f.name = name;
    return f;
  }
  if (name == "constant") {
    const double c = params.empty() ? 1.0 : params[0];
    FieldSpec f = make_poly_field(1, {{c, 0, {0}}}, std::max(1.0, std::abs(c)), 1.0);
    f.name = name;
    return f;
  }
  if (name == "zero") {
    FieldSpec f = make_poly_field(1, {}, 1.0, 1.0);
    f.name = name;
    return f;
  }
  if (name == "decoupled2d") {
    // d = 2: components driven by disjoint parts of the signal
    FieldSpec f;
    f.d = 2;
    f.ell = 2;
    f.wp = 1;
    f.K = 3.0;
    f.kappa = 1.0;
    f.name = name;
    f.x_lo = Vec::Constant(2, -2.0);
    f.x_hi = Vec::Constant(2, 2.0);
    f.xi_lo = Vec::Constant(1, -1.0);
    f.xi_hi = Vec::Constant(1, 1.0);
    f.eval = [](Eigen::Ref<const Vec> x, Eigen::Ref<const Mat> xi, Eigen::Ref<Vec> out) {
      out[0] = -x[0] + xi(0, 0) * xi(1, 0);
      out[1] = -x[1] + xi(0, 0);
    };
    f.grad_x = [](Eigen::Ref<const Vec>, Eigen::Ref<const Mat>, Eigen::Ref<Mat> out) {
      out.setZero();
      out(0, 0) = -1.0;
      out(1, 1) = -1.0;
    };
    return f;
  }
  throw config_error("unknown field '" + name + "'");
}

}  // namespace nonconv

#include "nonconv/quadrature.hpp"

#include <cmath>

namespace nonconv {

GaussLegendre::GaussLegendre(int order) {
  nodes.resize(order);
  weights.resize(order);
  for (int i = 0; i < order; ++i) {
    // Newton iteration from the Chebyshev estimate
    double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double p0, p1;
    for (int it = 0; it < 100; ++it) {
      p0 = 1.0;
      p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    p0 = 1.0;
    p1 = x;
    for (int k = 2; k <= order; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = order * (x * p1 - p0) / (x * x - 1.0);
    nodes[order - 1 - i] = x;
    weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

const GaussLegendre& gl1() {
  static const GaussLegendre g(1);
  return g;
}
const GaussLegendre& gl2() {
  static const GaussLegendre g(2);
  return g;
}
const GaussLegendre& gl4() {
  static const GaussLegendre g(4);
  return g;
}
const GaussLegendre& gl8() {
  static const GaussLegendre g(8);
  return g;
}
const GaussLegendre& gl16() {
  static const GaussLegendre g(16);
  return g;
}

double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol, int max_doublings) {
  if (a == b) return 0.0;
  const GaussLegendre& g = gl8();
  int panels = 1;
  double prev = g.integrate(f, a, b);
  for (int lvl = 0; lvl < max_doublings; ++lvl) {
    panels *= 2;
    const double h = (b - a) / panels;
    double cur = 0.0;
    for (int i = 0; i < panels; ++i) cur += g.integrate(f, a + i * h, a + (i + 1) * h);
    if (std::abs(cur - prev) <= tol * (1.0 + std::abs(cur))) return cur;
    prev = cur;
  }
  return prev;
}

double integrate_halfline(const std::function<double(double)>& f, double envC, double envc,
                          double tail_tol, double quad_tol, double* tail_estimate) {
  if (envc <= 0.0) throw std::invalid_argument("integrate_halfline: need a positive decay rate");
  // (envC/envc) e^{-envc W} <= tail_tol
  double W = std::log(std::max(envC / (envc * tail_tol), 2.0)) / envc;
  W = std::max(W, 1.0);
  if (tail_estimate) *tail_estimate = envC / envc * std::exp(-envc * W);
  // geometric panels keep the sharp decay resolved
  double total = 0.0, lo = 0.0, hi = std::min(1.0, W);
  while (lo < W) {
    total += integrate_adaptive(f, lo, hi, quad_tol);
    lo = hi;
    hi = std::min(W, hi * 2.0);
    if (hi <= lo) break;
  }
  return total;
}

}  // namespace nonconv

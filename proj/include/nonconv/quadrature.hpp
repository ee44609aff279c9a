#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace nonconv {

// Gauss-Legendre nodes/weights on [-1,1], computed once per order by
// Newton iteration on the Legendre recurrence.
struct GaussLegendre {
  std::vector<double> nodes;
  std::vector<double> weights;

  explicit GaussLegendre(int order);

  // integral of f over [a,b]
  template <class F>
  double integrate(F&& f, double a, double b) const {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(c + h * nodes[i]);
    return s * h;
  }
};

const GaussLegendre& gl1();
const GaussLegendre& gl2();
const GaussLegendre& gl4();
const GaussLegendre& gl8();
const GaussLegendre& gl16();

// Composite Gauss-Legendre with panel doubling until two successive levels
// agree within tol (absolute + relative).  Integrand must be smooth on [a,b].
double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                          double tol, int max_doublings = 14);

// Integral over [0, inf) of a function with a known exponential envelope
// |f(w)| <= envC * exp(-envc * w): truncates where the tail bound drops
// below tail_tol and integrates the finite part adaptively.
// Returns the value; *tail_estimate receives the truncation bound.
double integrate_halfline(const std::function<double(double)>& f, double envC, double envc,
                          double tail_tol, double quad_tol, double* tail_estimate);

}  // namespace nonconv

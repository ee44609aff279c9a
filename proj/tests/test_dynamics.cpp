#include <doctest.h>

#include <cmath>
#include <memory>

#include "nonconv/dynamics.hpp"

using namespace nonconv;

namespace {

std::shared_ptr<const FiniteChainSpec> two_state_chain(TimeKind kind = TimeKind::continuous) {
  auto spec = std::make_shared<FiniteChainSpec>();
  spec->states = {"+", "-"};
  spec->generator.resize(2, 2);
  if (kind == TimeKind::continuous)
    spec->generator << -1.0, 1.0, 1.0, -1.0;
  else
    spec->generator << 0.75, 0.25, 0.25, 0.75;
  spec->observable.resize(2, 1);
  spec->observable << 1.0, -1.0;
  spec->initial_law.resize(2);
  spec->initial_law << 0.5, 0.5;
  spec->time_kind = kind;
  return spec;
}

DiscreteMeasure pm_one() {
  DiscreteMeasure mu;
  mu.atoms.resize(2, 1);
  mu.atoms << 1.0, -1.0;
  mu.weights.resize(2);
  mu.weights << 0.5, 0.5;
  return mu;
}

TimeScaleFamily family12() {
  TimeScaleFamily f;
  f.alphas = {1.0, 2.0};
  return f;
}

struct Canonical {
  std::shared_ptr<const FiniteChainSpec> chain = two_state_chain();
  TimeScaleFamily family = family12();
  std::shared_ptr<const DecomposedField> dec =
      std::make_shared<DecomposedField>(make_field("product_linear"), pm_one());
  Vec x0 = Vec::Constant(1, 1.0);

  ScenarioGrid grid(double eps, double T = 1.0) const {
    ScenarioGrid g;
    g.epsilon = eps;
    g.T_final = T;
    g.output_times = ScenarioGrid::uniform_outputs(T, 10);
    return g;
  }

  PathHandle path(const ScenarioGrid& g, std::uint64_t seed) const {
    return sample_path(chain, required_horizon(family, g, chain->time_kind), seed);
  }
};

}  // namespace

TEST_CASE("grid validation enforces the micro-step bound and output range") {
  ScenarioGrid g;
  g.epsilon = 0.01;
  g.T_final = 1.0;
  g.output_times = {0.5, 1.0};
  CHECK_NOTHROW(g.validate());
  CHECK(g.micro_step() == doctest::Approx(1e-4));
  g.h = 1e-3;
  CHECK_THROWS_AS(g.validate(), validation_error);
  g.h = 0.0;
  g.output_times = {0.5, 1.5};
  CHECK_THROWS_AS(g.validate(), validation_error);
}

TEST_CASE("averaged flow reproduces the exponential decay") {
  auto dec = std::make_shared<DecomposedField>(make_field("product_linear"), pm_one());
  AveragedFlow flow(dec, Vec::Constant(1, 1.0), 2.0);
  for (double t : {0.0, 0.31, 1.0, 1.77, 2.0})
    CHECK(std::abs(flow.at(t)[0] - std::exp(-t)) < 1e-10);
  CHECK(flow.gradient_at(0.5)(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("averaged integration of constant and zero drifts") {
  Canonical sc;
  auto g = sc.grid(0.01);

  auto dec0 = std::make_shared<DecomposedField>(make_field("zero"), pm_one());
  AveragedFlow still(dec0, Vec::Constant(1, 0.7), 1.0);
  Mat z = integrate_averaged(still, g);
  for (int i = 0; i < z.rows(); ++i) CHECK(z(i, 0) == doctest::Approx(0.7).epsilon(1e-12));

  auto decc = std::make_shared<DecomposedField>(make_field("constant", {0.5}), pm_one());
  AveragedFlow drift(decc, Vec::Constant(1, 0.0), 1.0);
  Mat zc = integrate_averaged(drift, g);
  for (int i = 0; i < zc.rows(); ++i)
    CHECK(zc(i, 0) == doctest::Approx(0.5 * g.output_times[i]).epsilon(1e-10));
}

TEST_CASE("slow motion without fast dependence equals the averaged flow") {
  Canonical sc;
  sc.dec = std::make_shared<DecomposedField>(make_field("linear", {2}), pm_one());
  auto g = sc.grid(0.05);
  PathHandle p = sc.path(g, 3);
  Mat Z = integrate_slow(sc.dec->field(), p, sc.family, g, sc.x0);
  for (int i = 0; i < Z.rows(); ++i)
    CHECK(std::abs(Z(i, 0) - std::exp(-g.output_times[i])) < 1e-8);
}

TEST_CASE("slow motion integrates the linear field to 1e-8") {
  Canonical sc;
  sc.dec = std::make_shared<DecomposedField>(make_field("linear", {2}), pm_one());
  ScenarioGrid g = sc.grid(1.0);  // h = eps*T/100 = 1e-2 > 1e-3 requested
  g.h = 1e-3;
  g.epsilon = 1.0;
  PathHandle p = sc.path(g, 3);
  Mat Z = integrate_slow(sc.dec->field(), p, sc.family, g, sc.x0);
  for (int i = 0; i < Z.rows(); ++i)
    CHECK(std::abs(Z(i, 0) - std::exp(-g.output_times[i])) < 1e-8);
}

TEST_CASE("bundle satisfies the component representation and scaling identities") {
  Canonical sc;
  auto g = sc.grid(1e-2);
  PathHandle p = sc.path(g, 17);
  AveragedFlow flow(sc.dec, sc.x0, 1.0);
  TrajectoryBundle b = simulate_bundle(*sc.dec, sc.family, flow, g, sc.x0, p);

  CHECK(b.identity_residual < 1e-8);
  const double scale = 1.0 / std::sqrt(g.epsilon);
  for (int r = 0; r < b.G.rows(); ++r) {
    CHECK(b.G(r, 0) == doctest::Approx(scale * (b.Y(r, 0) - b.Zbar(r, 0))));
    CHECK(b.Q(r, 0) == doctest::Approx(scale * (b.Z(r, 0) - b.Zbar(r, 0))));
    for (int i = 0; i < 2; ++i)
      CHECK(b.G_comp[i](r, 0) == doctest::Approx(scale * b.Y_comp[i](r, 0)));
  }
  // B_1 vanishes for the canonical field
  CHECK(b.Y_comp[0].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bundle replays bit-identically for a fixed seed") {
  Canonical sc;
  auto g = sc.grid(1e-2);
  AveragedFlow flow(sc.dec, sc.x0, 1.0);
  PathHandle p1 = sc.path(g, 99), p2 = sc.path(g, 99);
  TrajectoryBundle a = simulate_bundle(*sc.dec, sc.family, flow, g, sc.x0, p1);
  TrajectoryBundle b = simulate_bundle(*sc.dec, sc.family, flow, g, sc.x0, p2);
  CHECK((a.Z - b.Z).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.Y - b.Y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.G - b.G).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fluctuations vanish identically without fast dependence") {
  Canonical sc;
  sc.dec = std::make_shared<DecomposedField>(make_field("linear", {2}), pm_one());
  auto g = sc.grid(0.05);
  PathHandle p = sc.path(g, 5);
  AveragedFlow flow(sc.dec, sc.x0, 1.0);
  TrajectoryBundle b = simulate_bundle(*sc.dec, sc.family, flow, g, sc.x0, p);
  CHECK(b.G.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(b.Q.cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("single-scale component integral matches the direct quadrature form") {
  // ell = 1, k = 1, alpha_1 = 1: Y_1(t) = int_0^t B_1(Zbar(s), xi(s/eps)) ds
  auto chain = two_state_chain();
  TimeScaleFamily fam;
  fam.alphas = {1.0};
  auto f = make_poly_field(1, {{-1.0, 1, {0}}, {1.0, 0, {1}}}, 3.0, 1.0);  // -x + xi
  auto dec = std::make_shared<DecomposedField>(f, pm_one());
  ScenarioGrid g;
  g.epsilon = 0.05;
  g.T_final = 1.0;
  g.output_times = {1.0};
  AveragedFlow flow(dec, Vec::Constant(1, 1.0), 1.0);
  PathHandle p = sample_path(chain, required_horizon(fam, g, TimeKind::continuous), 7);

  auto vals = integrate_component(*dec, 1, p, fam, flow, g.epsilon, {1.0});
  // oracle: piecewise-constant signal integrated against xi directly
  std::vector<double> jumps;
  p.jumps_in(0.0, 1.0 / g.epsilon, jumps);
  std::vector<double> cuts{0.0};
  for (double J : jumps) cuts.push_back(J * g.epsilon);
  cuts.push_back(1.0);
  double direct = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    direct += (cuts[i + 1] - cuts[i]) * p.eval(mid / g.epsilon)[0];
  }
  CHECK(vals[0][0] == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("halving epsilon halves the fluctuation variance") {
  Canonical sc;
  AveragedFlow flow(sc.dec, sc.x0, 1.0);
  const int M = 400;
  auto var_at = [&](double eps) {
    ScenarioGrid g = sc.grid(eps);
    g.output_times = {1.0};
    BundleOptions opts;
    opts.compute_slow = false;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < M; ++i) {
      PathHandle p = sc.path(g, derive_seed(31337, static_cast<std::uint64_t>(1.0 / eps), i));
      TrajectoryBundle b = simulate_bundle(*sc.dec, sc.family, flow, g, sc.x0, p, opts);
      const double dev = b.Y(0, 0) - b.Zbar(0, 0);
      s1 += dev;
      s2 += dev * dev;
    }
    return (s2 - s1 * s1 / M) / (M - 1);
  };
  const double ratio = var_at(0.005) / var_at(0.01);
  CHECK(ratio > 0.4);
  CHECK(ratio < 0.6);
}

TEST_CASE("discrete-time slow motion follows the exact recursion") {
  auto chain = two_state_chain(TimeKind::discrete);
  TimeScaleFamily fam;
  fam.alphas = {1.0, 2.0};
  auto f = make_field("product_linear");
  ScenarioGrid g;
  g.epsilon = 0.01;
  g.T_final = 1.0;
  g.output_times = {0.5, 1.0};
  PathHandle p = sample_path(chain, required_horizon(fam, g, TimeKind::discrete), 11);
  Mat Z = integrate_slow(f, p, fam, g, Vec::Constant(1, 1.0));

  // oracle: replay the recursion by hand
  Vec x = Vec::Constant(1, 1.0);
  Mat xi(2, 1);
  Vec b(1);
  std::vector<double> marks;
  for (int n = 0; n < 100; ++n) {
    if (n == 50) marks.push_back(x[0]);
    xi(0, 0) = p.eval(static_cast<double>(n))[0];
    xi(1, 0) = p.eval(2.0 * n)[0];
    f.eval(x, xi, b);
    x += g.epsilon * b;
  }
  marks.push_back(x[0]);
  CHECK(Z(0, 0) == doctest::Approx(marks[0]).epsilon(1e-14));
  CHECK(Z(1, 0) == doctest::Approx(marks[1]).epsilon(1e-14));
}

TEST_CASE("riemann block sums stay within the unit-block bound") {
  Canonical sc;
  AveragedFlow flow(sc.dec, sc.x0, 2.0);  // covers tau_i(t) + one block

  SUBCASE("vanishing component gives zero sums") {
    const int N = 50;
    ScenarioGrid g = sc.grid(1.0 / N);
    PathHandle p = sample_path(sc.chain, sc.family.q(2, N * 1.0 + 1.0) + 1.0, 2);
    auto rep = riemann_sum_G(*sc.dec, p, sc.family, flow, 1, N, 1.0);
    CHECK(rep.block_sum.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(rep.within_bound);
  }

  SUBCASE("canonical component at N=1000") {
    const int N = 1000;
    PathHandle p = sample_path(sc.chain, sc.family.q(2, N * 0.5 + 1.0) + 1.0, 23);
    auto rep = riemann_sum_G(*sc.dec, p, sc.family, flow, 2, N, 1.0);
    CHECK(rep.within_bound);
    CHECK(rep.difference <= 2.0 * 3.0 * 1.0 * 1.0 / std::sqrt(static_cast<double>(N)));
  }

  SUBCASE("N=1 with t below alpha_i covers a single block") {
    PathHandle p = sample_path(sc.chain, 10.0, 4);
    auto rep = riemann_sum_G(*sc.dec, p, sc.family, flow, 2, 1, 0.5);
    // one block [0,1): the sum equals the integral over the unit interval
    CHECK(rep.block_sum.size() == 1);
    CHECK(rep.within_bound);
  }
}

TEST_CASE("limit equation: zero gradient returns the input") {
  auto G = [](double t) { return Vec::Constant(1, std::sin(t)); };
  auto M = [](double) { return Mat::Zero(1, 1); };
  auto sol = solve_limit_ode(G, M, 1.0, {0.25, 0.5, 1.0}, 3.0);
  for (int i = 0; i < sol.values.rows(); ++i)
    CHECK(sol.values(i, 0) == doctest::Approx(std::sin(sol.times[i])).epsilon(1e-8));
  CHECK(sol.gronwall_ok);
}

TEST_CASE("limit equation solves the scalar closed form") {
  // M = -1, G(t) = t: Q(t) = int_0^t e^{-(t-s)} dG(s) = 1 - e^{-t}
  auto G = [](double t) { return Vec::Constant(1, t); };
  auto M = [](double) { return Mat::Constant(1, 1, -1.0); };
  auto sol = solve_limit_ode(G, M, 2.0, {0.5, 1.0, 2.0}, 1.0);
  for (int i = 0; i < sol.values.rows(); ++i)
    CHECK(sol.values(i, 0) ==
          doctest::Approx(1.0 - std::exp(-sol.times[i])).epsilon(1e-7));
  CHECK(sol.gronwall_ok);
}

TEST_CASE("limit equation: zero input gives the zero solution") {
  auto G = [](double) { return Vec::Zero(2); };
  auto M = [](double t) { return Mat::Constant(2, 2, std::cos(t)); };
  auto sol = solve_limit_ode(G, M, 1.0, {1.0}, 2.0);
  CHECK(sol.values.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sol.gronwall_ok);
}

TEST_CASE("grid-data limit equation matches the functional form") {
  std::vector<double> times;
  Mat G_values(20, 1);
  for (int i = 0; i < 20; ++i) {
    times.push_back((i + 1) * 0.05);
    G_values(i, 0) = times.back();
  }
  auto M = [](double) { return Mat::Constant(1, 1, -1.0); };
  auto sol = solve_limit_ode(times, G_values, M, 1.0);
  CHECK(sol.values(sol.values.rows() - 1, 0) ==
        doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-5));
}

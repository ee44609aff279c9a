#include <doctest.h>

#include <cmath>
#include <memory>

#include "nonconv/covariance.hpp"

using namespace nonconv;

namespace {

std::shared_ptr<const FiniteChainSpec> two_state_chain(TimeKind kind = TimeKind::continuous) {
  auto spec = std::make_shared<FiniteChainSpec>();
  spec->states = {"+", "-"};
  spec->generator.resize(2, 2);
  if (kind == TimeKind::continuous)
    spec->generator << -1.0, 1.0, 1.0, -1.0;
  else
    spec->generator << 0.75, 0.25, 0.25, 0.75;  // correlation 0.5^n
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

struct Setup {
  std::shared_ptr<const FiniteChainSpec> chain = two_state_chain();
  TimeScaleFamily family = family12();
  std::shared_ptr<const DecomposedField> dec =
      std::make_shared<DecomposedField>(make_field("product_linear"), pm_one());
  std::shared_ptr<AveragedFlow> flow =
      std::make_shared<AveragedFlow>(dec, Vec::Constant(1, 1.0), 2.5);
};

}  // namespace

TEST_CASE("a-coefficient factorizes into correlation products on the canonical field") {
  Setup s;
  auto pairs = resonant_pairs(s.family, 2, 2);
  const Vec x = Vec::Constant(1, 0.3), y = Vec::Constant(1, -0.8);
  for (auto [s1, s2] : {std::pair{0.0, 0.0}, {0.5, 1.0}, {-1.3, 0.7}, {2.0, -2.0}}) {
    const double got = a_coeff(*s.dec, *s.chain, pairs, 2, 2, 0, 0, x, y, {s1, s2});
    const double want = std::exp(-2.0 * std::abs(s1)) * std::exp(-2.0 * std::abs(s2));
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("a-coefficient vanishes for zero components and at large lags") {
  Setup s;
  const Vec x = Vec::Zero(1), y = Vec::Zero(1);
  // B_1 of the canonical field is identically zero
  auto p11 = resonant_pairs(s.family, 1, 1);
  CHECK(a_coeff(*s.dec, *s.chain, p11, 1, 1, 0, 0, x, y, {0.0}) == doctest::Approx(0.0));
  // centering kills the product at infinite separation
  auto p22 = resonant_pairs(s.family, 2, 2);
  CHECK(std::abs(a_coeff(*s.dec, *s.chain, p22, 2, 2, 0, 0, x, y, {30.0, 30.0})) < 1e-12);
}

TEST_CASE("D coefficient of the canonical scenario is 1/6") {
  Setup s;
  const Vec x = Vec::Zero(1);
  auto r = D_coeff(*s.dec, *s.chain, s.family, 2, 2, 0, 0, x, x);
  // oracle: (1/4) int exp(-3|w|) dw = 1/6
  CHECK(r.value == doctest::Approx(1.0 / 6.0).epsilon(1e-8));
  CHECK(r.tail_estimate < 1e-7);

  // zero component short-circuits
  auto r12 = D_coeff(*s.dec, *s.chain, s.family, 1, 2, 0, 0, x, x);
  CHECK(r12.value == 0.0);
  auto r11 = D_coeff(*s.dec, *s.chain, s.family, 1, 1, 0, 0, x, x);
  CHECK(r11.value == 0.0);
}

TEST_CASE("D coefficient is symmetric under (i,j,l,m,x,y) transposition") {
  // field with two nonvanishing components: B = -x + xi1 + xi1*xi2
  auto f = make_poly_field(2, {{-1.0, 1, {0, 0}}, {1.0, 0, {1, 0}}, {1.0, 0, {1, 1}}}, 4.0, 1.0);
  auto dec = std::make_shared<DecomposedField>(f, pm_one());
  Setup s;
  const Vec x = Vec::Constant(1, 0.2), y = Vec::Constant(1, -0.4);
  for (auto [i, j] : {std::pair{1, 1}, {1, 2}, {2, 2}}) {
    const double dij = D_coeff(*dec, *s.chain, s.family, i, j, 0, 0, x, y).value;
    const double dji = D_coeff(*dec, *s.chain, s.family, j, i, 0, 0, y, x).value;
    CHECK(dij == doctest::Approx(dji).epsilon(1e-9));
  }
}

TEST_CASE("covariance report predicts Var G(t) = t/3 for the canonical scenario") {
  Setup s;
  auto rep = build_covariance_report(*s.dec, *s.chain, s.family, *s.flow,
                                     ScenarioGrid::uniform_outputs(1.0, 10));
  for (double t : {0.2, 0.5, 1.0}) {
    CHECK(predicted_cov_G(rep, t, t)(0, 0) == doctest::Approx(t / 3.0).epsilon(1e-6));
  }
  // component prediction: E G_2(s) G_2(t) = min(s,t)/6
  CHECK(predicted_cov_component(rep, 2, 2, 0.4, 0.9)(0, 0) ==
        doctest::Approx(0.4 / 6.0).epsilon(1e-6));
  // cross prediction with the vanishing component is zero
  CHECK(predicted_cov_component(rep, 1, 2, 1.0, 1.0)(0, 0) == doctest::Approx(0.0));
  // A(u) is the constant 1/6 here, PSD, and the increment structure is clean
  CHECK(rep.A_literal(0, 0) == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
  CHECK(rep.A_min_eigenvalue > -1e-9);
  CHECK(rep.min_structure_discrepancy < 1e-9);
  CHECK(rep.var_nondecreasing);
  CHECK(rep.envelope.holds_on_grid);
  CHECK(rep.envelope.c > 1.0);  // decays at least like exp(-w)
}

TEST_CASE("zero field gives an identically zero prediction") {
  Setup s;
  s.dec = std::make_shared<DecomposedField>(make_field("linear", {2}), pm_one());
  s.flow = std::make_shared<AveragedFlow>(s.dec, Vec::Constant(1, 1.0), 2.5);
  auto rep = build_covariance_report(*s.dec, *s.chain, s.family, *s.flow, {0.5, 1.0});
  CHECK(predicted_cov_G(rep, 1.0, 1.0)(0, 0) == doctest::Approx(0.0));
  CHECK(rep.A_literal.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("decoupled two-dimensional field yields a diagonal A") {
  auto dec = std::make_shared<DecomposedField>(make_field("decoupled2d"), pm_one());
  Setup s;
  Vec x0(2);
  x0 << 1.0, -1.0;
  auto flow = std::make_shared<AveragedFlow>(dec, x0, 2.5);
  auto rep = build_covariance_report(*dec, *s.chain, s.family, *flow, {0.5, 1.0});
  for (int idx = 0; idx < rep.A_literal.rows(); ++idx) {
    CHECK(std::abs(rep.A_literal(idx, 1)) < 1e-10);  // (0,1) entry
    CHECK(std::abs(rep.A_literal(idx, 2)) < 1e-10);  // (1,0) entry
  }
  const Mat c = predicted_cov_G(rep, 1.0, 1.0);
  CHECK(std::abs(c(0, 1)) < 1e-10);
  CHECK(c(0, 0) > 0.0);
  CHECK(c(1, 1) > 0.0);
}

TEST_CASE("vanishing prediction guards its preconditions") {
  CHECK(vanishing_pairs_prediction(3, 1, 2, TimeKind::continuous) == 0.0);
  CHECK(vanishing_pairs_prediction(3, 3, 2, TimeKind::continuous) == 0.0);
  CHECK_THROWS(vanishing_pairs_prediction(2, 1, 2, TimeKind::continuous));
}

TEST_CASE("discrete lattice D matches the geometric-series oracle") {
  // 0.5^n chain, canonical field, alphas (1,2): D_22 = (1/2) sum_m 0.125^|m| = 9/14
  auto chain = two_state_chain(TimeKind::discrete);
  auto dec = std::make_shared<DecomposedField>(make_field("product_linear"), pm_one());
  TimeScaleFamily fam = family12();
  const Vec x = Vec::Zero(1);
  auto r = D_coeff(*dec, *chain, fam, 2, 2, 0, 0, x, x);
  CHECK(r.value == doctest::Approx(9.0 / 14.0).epsilon(1e-9));
}

TEST_CASE("discrete extra variance of a pure last-coordinate component is min(s,t)") {
  auto dec = std::make_shared<DecomposedField>(make_field("product_linear3"), pm_one());
  auto flow = std::make_shared<AveragedFlow>(dec, Vec::Constant(1, 1.0), 2.5);
  // B_3 = xi_3 with mu = +-1: inner integral is identically 1
  for (auto [ss, tt] : {std::pair{1.0, 1.0}, {0.5, 1.0}, {1.0, 0.25}}) {
    const Mat v = discrete_extra_variance(*dec, *flow, 3, 2, ss, tt);
    CHECK(v(0, 0) == doctest::Approx(std::min(ss, tt)).epsilon(1e-8));
  }
  CHECK_THROWS(discrete_extra_variance(*dec, *flow, 2, 2, 1.0, 1.0));
}

TEST_CASE("sampled limit paths reproduce the predicted variance") {
  Setup s;
  auto rep = build_covariance_report(*s.dec, *s.chain, s.family, *s.flow,
                                     ScenarioGrid::uniform_outputs(1.0, 5));
  G0Sampler sampler(rep, 777);
  const int M = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < M; ++r) {
    const Mat g = sampler.draw();
    const double v = g(g.rows() - 1, 0);  // G(1)
    sum += v;
    sumsq += v * v;
  }
  const double var = (sumsq - sum * sum / M) / (M - 1);
  CHECK(std::abs(var - 1.0 / 3.0) < 0.01);
}

TEST_CASE("zero prediction samples the zero path") {
  Setup s;
  s.dec = std::make_shared<DecomposedField>(make_field("linear", {2}), pm_one());
  s.flow = std::make_shared<AveragedFlow>(s.dec, Vec::Constant(1, 1.0), 2.5);
  auto rep = build_covariance_report(*s.dec, *s.chain, s.family, *s.flow, {0.5, 1.0});
  G0Sampler sampler(rep, 5);
  CHECK(sampler.draw().cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("single-scale limit has independent increments") {
  // k = 1: disjoint increments of G are uncorrelated
  auto f = make_poly_field(1, {{-1.0, 1, {0}}, {1.0, 0, {1}}}, 3.0, 1.0);
  auto dec = std::make_shared<DecomposedField>(f, pm_one());
  auto chain = two_state_chain();
  TimeScaleFamily fam;
  fam.alphas = {1.0};
  auto flow = std::make_shared<AveragedFlow>(dec, Vec::Constant(1, 1.0), 2.5);
  auto rep = build_covariance_report(*dec, *chain, fam, *flow, {0.5, 1.0, 1.5, 2.0});
  G0Sampler sampler(rep, 404);
  const int M = 10000;
  double s12 = 0.0, s1 = 0.0, s2 = 0.0, q1 = 0.0, q2 = 0.0;
  for (int r = 0; r < M; ++r) {
    const Mat g = sampler.draw();
    const double inc1 = g(1, 0) - g(0, 0);
    const double inc2 = g(3, 0) - g(2, 0);
    s1 += inc1;
    s2 += inc2;
    q1 += inc1 * inc1;
    q2 += inc2 * inc2;
    s12 += inc1 * inc2;
  }
  const double c12 = (s12 - s1 * s2 / M) / M;
  const double v1 = (q1 - s1 * s1 / M) / M, v2 = (q2 - s2 * s2 / M) / M;
  CHECK(std::abs(c12 / std::sqrt(v1 * v2)) <= 0.05);
}

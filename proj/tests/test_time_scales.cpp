#include <doctest.h>

#include <cmath>
#include <random>

#include "nonconv/time_scales.hpp"

using namespace nonconv;

namespace {

TimeScaleFamily family12_power2() {
  TimeScaleFamily f;
  f.alphas = {1.0, 2.0};
  f.fast_scales = {{FastScale::Kind::power, 2.0, 0.0}};
  return f;
}

// independent brute-force enumeration (the test oracle)
std::vector<ResonantPair> brute_pairs(const std::vector<std::pair<long long, long long>>& a,
                                      int i, int j) {
  std::vector<ResonantPair> out;
  for (int ip = 1; ip <= i; ++ip)
    for (int jp = 1; jp <= j; ++jp) {
      const auto [ni, di] = a[ip - 1];
      const auto [nj, dj] = a[jp - 1];
      const auto [Ni, Di] = a[i - 1];
      const auto [Nj, Dj] = a[j - 1];
      // ni/di / (Ni/Di) == nj/dj / (Nj/Dj)
      if (static_cast<__int128>(ni) * Di * dj * Nj == static_cast<__int128>(nj) * Dj * di * Ni)
        out.push_back({ip, jp,
                       (static_cast<double>(ni) / di) / (static_cast<double>(Ni) / Di)});
    }
  std::sort(out.begin(), out.end(),
            [](const ResonantPair& x, const ResonantPair& y) { return x.rho < y.rho; });
  return out;
}

}  // namespace

TEST_CASE("growth report for t^2: shifted gaps diverge") {
  auto f = family12_power2();
  auto rep = validate_growth(f, {0.1}, 1000.0);
  CHECK(rep.valid);
  REQUIRE(rep.checks.size() == 1);
  CHECK(rep.checks[0].shift_diverges);
  CHECK(rep.checks[0].previous_diverges);
  // q3(t+0.1)-q3(t) = 0.2t + 0.01, minimal at the smallest grid point
  CHECK(rep.checks[0].min_gap_shift > 0.0);
}

TEST_CASE("an illegally linear fast scale fails the growth validation") {
  TimeScaleFamily f;
  f.alphas = {1.0, 2.0};
  f.fast_scales = {{FastScale::Kind::linear, 2.0, 0.0}};  // q3 = alpha_k * t
  auto rep = validate_growth(f, {0.5}, 1000.0);
  CHECK_FALSE(rep.valid);
  CHECK(rep.failure.find("3") != std::string::npos);
}

TEST_CASE("a family with no fast scales validates trivially") {
  TimeScaleFamily f;
  f.alphas = {1.0, 2.0, 3.5};
  auto rep = validate_growth(f, {0.1, 0.5}, 100.0);
  CHECK(rep.valid);
  CHECK(rep.checks.empty());
}

TEST_CASE("resonant pairs match the spec examples") {
  TimeScaleFamily f;
  f.alphas = {1.0, 2.0};
  auto p22 = resonant_pairs(f, 2, 2);
  REQUIRE(p22.size() == 2);
  CHECK(p22[0].i_prime == 1);
  CHECK(p22[0].j_prime == 1);
  CHECK(p22[0].rho == doctest::Approx(0.5));
  CHECK(p22[1].i_prime == 2);
  CHECK(p22[1].j_prime == 2);
  CHECK(p22[1].rho == doctest::Approx(1.0));

  auto p12 = resonant_pairs(f, 1, 2);
  REQUIRE(p12.size() == 1);
  CHECK(p12[0].i_prime == 1);
  CHECK(p12[0].j_prime == 2);
  CHECK(p12[0].rho == doctest::Approx(1.0));

  TimeScaleFamily g;
  g.alphas = {1.0, 2.0, 3.0};
  auto p32 = resonant_pairs(g, 3, 2);
  REQUIRE(p32.size() == 1);
  CHECK(p32[0].i_prime == 3);
  CHECK(p32[0].j_prime == 2);
}

TEST_CASE("tau on linear and superlinear scales") {
  auto f = family12_power2();
  CHECK(tau(f, 2, 4.0) == doctest::Approx(2.0));
  CHECK(tau(f, 3, 4.0) == doctest::Approx(4.0));
  TimeScaleFamily g;
  g.alphas = {0.5};
  CHECK(tau(g, 1, 1.0) == doctest::Approx(2.0));
  CHECK_THROWS(tau(f, 4, 1.0));
}

TEST_CASE("resonant pairs agree with brute force on random rational families") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 3);
    std::vector<std::pair<long long, long long>> rats;
    TimeScaleFamily f;
    while (static_cast<int>(rats.size()) < k) {
      const long long num = 1 + static_cast<long long>(rng() % 12);
      const long long den = 1 + static_cast<long long>(rng() % 12);
      const double v = static_cast<double>(num) / den;
      bool dup = false;
      for (double a : f.alphas) dup = dup || std::abs(a - v) < 1e-12;
      if (dup) continue;
      rats.push_back({num, den});
      f.alphas.push_back(v);
    }
    // sort both together
    std::vector<int> order(k);
    for (int i = 0; i < k; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return f.alphas[a] < f.alphas[b]; });
    std::vector<double> alphas;
    std::vector<std::pair<long long, long long>> sorted_rats;
    for (int idx : order) {
      alphas.push_back(f.alphas[idx]);
      sorted_rats.push_back(rats[idx]);
    }
    f.alphas = alphas;

    for (int i = 1; i <= k; ++i)
      for (int j = 1; j <= k; ++j) {
        auto got = resonant_pairs(f, i, j);
        auto want = brute_pairs(sorted_rats, i, j);
        REQUIRE(got.size() == want.size());
        for (std::size_t r = 0; r < got.size(); ++r) {
          CHECK(got[r].i_prime == want[r].i_prime);
          CHECK(got[r].j_prime == want[r].j_prime);
          CHECK(got[r].rho == doctest::Approx(want[r].rho).epsilon(1e-12));
        }
        // always ends at (i, j, 1)
        CHECK(got.back().i_prime == i);
        CHECK(got.back().j_prime == j);
        CHECK(got.back().rho == doctest::Approx(1.0));
        // rho strictly increasing in (0,1]
        for (std::size_t r = 0; r + 1 < got.size(); ++r) CHECK(got[r].rho < got[r + 1].rho);
        CHECK(got.front().rho > 0.0);
        // symmetry under swapping (i,j)
        auto swapped = resonant_pairs(f, j, i);
        REQUIRE(swapped.size() == got.size());
        for (std::size_t r = 0; r < got.size(); ++r) {
          CHECK(swapped[r].i_prime == got[r].j_prime);
          CHECK(swapped[r].j_prime == got[r].i_prime);
        }
      }
  }
}

TEST_CASE("rationally independent alphas resonate only trivially off the diagonal") {
  TimeScaleFamily f;
  f.alphas = {1.0, M_SQRT2, M_PI};
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) {
      auto pairs = resonant_pairs(f, i, j);
      if (i != j) {
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0].i_prime == i);
        CHECK(pairs[0].j_prime == j);
      } else {
        // on the diagonal every (m,m) with m <= i matches trivially
        REQUIRE(pairs.size() == static_cast<std::size_t>(i));
        for (int m = 1; m <= i; ++m) {
          CHECK(pairs[m - 1].i_prime == m);
          CHECK(pairs[m - 1].j_prime == m);
        }
      }
    }
}

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace nonconv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Thrown when a scenario config fails structural validation (exit code 3 in the CLI).
struct validation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown on config parse problems (exit code 2 in the CLI).
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64: counter-based mixing used for deterministic seed derivation
// and for lazily generated random bits.  Stateless per (seed, index) pair.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic seed for path `index` of an ensemble rooted at `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream,
                                 std::uint64_t index) {
  return splitmix64(splitmix64(base ^ 0x632be59bd9b4e019ULL) + 0x100000001b3ULL * stream +
                    index);
}

// Exact rational with int64 arithmetic, enough for time-scale resonance tests.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) { normalize(); }

  void normalize() {
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num == b.num && a.den == b.den;
  }
  friend bool operator<(const Rational& a, const Rational& b) {
    return static_cast<__int128>(a.num) * b.den < static_cast<__int128>(b.num) * a.den;
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(a.num * b.num, a.den * b.den);
  }
};

// a/b == c/d in exact arithmetic.
inline bool ratio_equal(const Rational& a, const Rational& b, const Rational& c,
                        const Rational& d) {
  return static_cast<__int128>(a.num) * b.den * c.den * d.num ==
         static_cast<__int128>(c.num) * d.den * a.den * b.num;
}

// Parses a decimal literal ("1", "0.5", "2.25") into an exact rational.
// Returns false for values that do not fit (used to fall back to the
// floating-point resonance test).
bool parse_rational(const std::string& text, Rational& out);
bool rational_from_double(double x, Rational& out);

}  // namespace nonconv

#include "nonconv/core.hpp"

#include <cmath>

namespace nonconv {

bool parse_rational(const std::string& text, Rational& out) {
  std::int64_t num = 0, den = 1;
  std::size_t i = 0;
  bool neg = false, any = false, frac = false;
  if (i < text.size() && (text[i] == '+' || text[i] == '-')) neg = text[i++] == '-';
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.') {
      if (frac) return false;
      frac = true;
      continue;
    }
    if (c < '0' || c > '9') return false;
    if (num > (INT64_MAX - 9) / 10) return false;
    num = num * 10 + (c - '0');
    if (frac) {
      if (den > INT64_MAX / 10) return false;
      den *= 10;
    }
    any = true;
  }
  if (!any) return false;
  out = Rational(neg ? -num : num, den);
  return true;
}

bool rational_from_double(double x, Rational& out) {
  if (!std::isfinite(x)) return false;
  // accept only values that are exactly N/10^k up to double round-off
  for (std::int64_t den = 1; den <= 1000000000000LL; den *= 10) {
    const double scaled = x * static_cast<double>(den);
    if (std::abs(scaled) > 9.0e15) return false;
    const double r = std::round(scaled);
    if (std::abs(scaled - r) < 1e-6 &&
        std::abs(r / static_cast<double>(den) - x) <= 4.0 * 2.220446049250313e-16 * std::abs(x)) {
      out = Rational(static_cast<std::int64_t>(r), den);
      return true;
    }
  }
  return false;
}

}  // namespace nonconv

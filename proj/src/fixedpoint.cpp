#include "stemc/fixedpoint.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "stemc/error.hpp"

namespace stemc {

FixedMult FixedMult::from_real(double r) {
  if (!std::isfinite(r)) {
    throw Error(ErrorKind::Range, "fixed-point multiplier from non-finite value");
  }
  if (r == 0.0) return FixedMult{0, 0};

  int exponent = 0;
  const double fraction = std::frexp(r, &exponent);  // |fraction| in [0.5, 1)
  std::int64_t mantissa = std::llround(std::ldexp(fraction, 31));
  if (mantissa == (std::int64_t{1} << 31) || mantissa == -(std::int64_t{1} << 31)) {
    mantissa /= 2;
    ++exponent;
  }
  const int shift = 31 - exponent;
  if (shift < 0 || shift > kMaxShift) {
    std::ostringstream msg;
    msg << "multiplier " << r << " outside fixed-point range [2^-32, 2^31)";
    throw Error(ErrorKind::Range, msg.str());
  }
  return FixedMult{static_cast<std::int32_t>(mantissa), shift};
}

double FixedMult::value() const { return std::ldexp(static_cast<double>(mantissa), -shift); }

std::int64_t apply(FixedMult m, std::int64_t x) {
  const __int128 product = static_cast<__int128>(x) * m.mantissa;
  if (m.shift == 0) return static_cast<std::int64_t>(product);
  const bool negative = product < 0;
  const unsigned __int128 magnitude =
      negative ? static_cast<unsigned __int128>(-product) : static_cast<unsigned __int128>(product);
  const unsigned __int128 half = static_cast<unsigned __int128>(1) << (m.shift - 1);
  const auto rounded = static_cast<std::int64_t>((magnitude + half) >> m.shift);
  return negative ? -rounded : rounded;
}

Saturated saturate(std::int64_t x, int width) {
  if (width < 2 || width > 32) {
    throw Error(ErrorKind::Config, "saturation width must be in [2, 32]");
  }
  const std::int64_t hi = (std::int64_t{1} << (width - 1)) - 1;
  const std::int64_t lo = -(std::int64_t{1} << (width - 1));
  if (x > hi) return {hi, true};
  if (x < lo) return {lo, true};
  return {x, false};
}

std::int64_t div_round_half_away(std::int64_t numerator, std::int64_t divisor) {
  const std::int64_t magnitude = numerator < 0 ? -numerator : numerator;
  const std::int64_t q = (magnitude + divisor / 2) / divisor;
  return numerator < 0 ? -q : q;
}

}  // namespace stemc

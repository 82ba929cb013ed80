#pragma once

#include <cstdint>

namespace stemc {

/// A real multiplier held as mantissa * 2^-shift.
///
/// Non-zero values are normalized so that 2^30 <= |mantissa| < 2^31, which
/// gives a relative representation error below 2^-30. Applying a FixedMult to
/// an integer never touches floating point, so results are identical on every
/// platform.
struct FixedMult {
  std::int32_t mantissa = 0;
  int shift = 0;

  static constexpr int kMaxShift = 62;

  /// Nearest normalized representation of `r`. Throws Error(Range) if `r` is
  /// not finite or its magnitude falls outside [2^-32, 2^31).
  static FixedMult from_real(double r);

  static FixedMult identity() { return FixedMult{1 << 30, 30}; }

  double value() const;

  bool operator==(const FixedMult&) const = default;
};

/// round_half_away_from_zero(x * mantissa / 2^shift), computed exactly with a
/// 128-bit intermediate.
std::int64_t apply(FixedMult m, std::int64_t x);

struct Saturated {
  std::int64_t value;
  bool saturated;
};

/// Clamp to the signed range of a `width`-bit register, 2 <= width <= 32.
Saturated saturate(std::int64_t x, int width);

/// Integer division rounding half away from zero. `divisor` must be positive.
std::int64_t div_round_half_away(std::int64_t numerator, std::int64_t divisor);

}  // namespace stemc

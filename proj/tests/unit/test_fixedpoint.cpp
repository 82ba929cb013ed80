#include <doctest.h>

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <limits>
#include <random>

#include "stemc/error.hpp"
#include "stemc/fixedpoint.hpp"
#include "oracles.hpp"

using namespace stemc;
using boost::multiprecision::cpp_int;

using testing::reference_apply;

TEST_CASE("from_real on exact dyadic values") {
  CHECK(FixedMult::from_real(0.5) == FixedMult{1 << 30, 31});
  CHECK(FixedMult::from_real(1.0) == FixedMult{1 << 30, 30});
  CHECK(FixedMult::from_real(1.0) == FixedMult::identity());
  CHECK(FixedMult::from_real(2.0) == FixedMult{1 << 30, 29});
  CHECK(FixedMult::from_real(-0.25) == FixedMult{-(1 << 30), 32});
  CHECK(FixedMult::from_real(0.0) == FixedMult{0, 0});
}

TEST_CASE("from_real of 1/3 is within 2^-30 relative error, checked in exact rationals") {
  const FixedMult m = FixedMult::from_real(1.0 / 3.0);
  // |m / 2^s - 1/3| / (1/3) <= 2^-30  <=>  |3m - 2^s| * 2^30 <= 2^s
  const cpp_int lhs = abs(cpp_int(3) * m.mantissa - (cpp_int(1) << m.shift)) << 30;
  CHECK(lhs <= (cpp_int(1) << m.shift));
  CHECK(m.mantissa >= (1 << 30));
}

TEST_CASE("from_real keeps the mantissa normalized") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> exponent(-30.0, 30.0);
  for (int i = 0; i < 10000; ++i) {
    const double r = std::pow(2.0, exponent(rng)) * (i % 2 ? -1 : 1);
    const FixedMult m = FixedMult::from_real(r);
    const std::int64_t mag = std::abs(static_cast<std::int64_t>(m.mantissa));
    REQUIRE(mag >= (std::int64_t{1} << 30));
    REQUIRE(mag < (std::int64_t{1} << 31));
    REQUIRE(std::abs(m.value() - r) <= std::abs(r) * std::ldexp(1.0, -30));
  }
}

TEST_CASE("from_real rejects unrepresentable values") {
  CHECK_THROWS_AS(FixedMult::from_real(std::numeric_limits<double>::infinity()), Error);
  CHECK_THROWS_AS(FixedMult::from_real(std::nan("")), Error);
  CHECK_THROWS_AS(FixedMult::from_real(std::ldexp(1.0, 40)), Error);
  CHECK_THROWS_AS(FixedMult::from_real(std::ldexp(1.0, -40)), Error);
  try {
    FixedMult::from_real(std::ldexp(1.0, 40));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Range);
  }
}

TEST_CASE("apply rounds half away from zero") {
  const FixedMult half = FixedMult::from_real(0.5);
  CHECK(apply(half, 7) == 4);
  CHECK(apply(half, -7) == -4);
  CHECK(apply(half, 6) == 3);
  CHECK(apply(half, 1) == 1);
  CHECK(apply(half, -1) == -1);
  CHECK(apply(half, 0) == 0);
  const FixedMult quarter = FixedMult::from_real(0.25);
  CHECK(apply(quarter, 5) == 1);   // 1.25
  CHECK(apply(quarter, 6) == 2);   // 1.5
  CHECK(apply(quarter, -6) == -2);
}

TEST_CASE("apply with 1.0 is the identity") {
  const FixedMult one = FixedMult::from_real(1.0);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> dist(-(std::int64_t{1} << 40), std::int64_t{1} << 40);
  for (std::int64_t x : {std::int64_t{0}, std::int64_t{1}, std::int64_t{-1}, std::int64_t{32767}}) CHECK(apply(one, x) == x);
  for (int i = 0; i < 10000; ++i) {
    const auto x = dist(rng);
    REQUIRE(apply(one, x) == x);
  }
}

TEST_CASE("apply matches multiprecision arithmetic") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int32_t> mantissa(std::numeric_limits<std::int32_t>::min(),
                                                       std::numeric_limits<std::int32_t>::max());
  std::uniform_int_distribution<int> shift(0, FixedMult::kMaxShift);
  std::uniform_int_distribution<std::int64_t> x(-(std::int64_t{1} << 32), std::int64_t{1} << 32);
  for (int i = 0; i < 20000; ++i) {
    const FixedMult m{mantissa(rng), shift(rng)};
    const auto v = x(rng);
    REQUIRE(apply(m, v) == reference_apply(m, v));
  }
}

TEST_CASE("saturate") {
  auto s = saturate(40000, 16);
  CHECK(s.value == 32767);
  CHECK(s.saturated);
  s = saturate(-40000, 16);
  CHECK(s.value == -32768);
  CHECK(s.saturated);
  s = saturate(5, 16);
  CHECK(s.value == 5);
  CHECK_FALSE(s.saturated);
  CHECK_FALSE(saturate(32767, 16).saturated);
  CHECK_FALSE(saturate(-32768, 16).saturated);
  CHECK(saturate(128, 8).value == 127);
  CHECK_THROWS_AS(saturate(0, 1), Error);
  CHECK_THROWS_AS(saturate(0, 33), Error);
}

TEST_CASE("div_round_half_away") {
  CHECK(div_round_half_away(7, 2) == 4);
  CHECK(div_round_half_away(-7, 2) == -4);
  CHECK(div_round_half_away(5, 4) == 1);
  CHECK(div_round_half_away(6, 4) == 2);
  CHECK(div_round_half_away(-6, 4) == -2);
  CHECK(div_round_half_away(0, 3) == 0);
}

#include "stemc/stem.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "stemc/error.hpp"

namespace stemc {

std::size_t SpikeTrain::spike_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t SpikeTrain::spike_count(int step) const {
  const auto r = row(step);
  return static_cast<std::size_t>(std::count(r.begin(), r.end(), std::uint8_t{1}));
}

std::vector<std::uint8_t> encode_integer(std::int64_t q, int k, bool is_signed) {
  const std::int64_t hi = (std::int64_t{1} << (k - 1)) - 1;
  const std::int64_t lo = is_signed ? -(std::int64_t{1} << (k - 1)) : 0;
  if (q < lo || q > hi) {
    throw Error(ErrorKind::Range, "value " + std::to_string(q) + " not encodable in " + std::to_string(k) +
                                      (is_signed ? " signed" : " unsigned") + " bits");
  }
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(k));
  for (int step = 0; step < k; ++step) bits[static_cast<std::size_t>(step)] = (q >> (k - 1 - step)) & 1;
  return bits;
}

std::int64_t decode_train(std::span<const std::uint8_t> bits, const PhiSchedule& schedule) {
  std::int64_t value = 0;
  for (int step = 0; step < schedule.k; ++step) {
    if (bits[static_cast<std::size_t>(step)]) value += schedule.weight(step);
  }
  return value;
}

SpikeTrain SpikeTrain::encode(std::span<const std::int32_t> values, int k, bool is_signed) {
  SpikeTrain train(k, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = encode_integer(values[i], k, is_signed);
    for (int step = 0; step < k; ++step) train.set(i, step, bits[static_cast<std::size_t>(step)] != 0);
  }
  return train;
}

std::vector<std::int64_t> SpikeTrain::decode(const PhiSchedule& schedule) const {
  std::vector<std::int64_t> values(neurons_, 0);
  for (int step = 0; step < k_; ++step) {
    const auto r = row(step);
    const std::int64_t w = schedule.weight(step);
    for (std::size_t i = 0; i < neurons_; ++i) values[i] += r[i] ? w : 0;
  }
  return values;
}

StemState::StemState(std::size_t neurons, int bits) : u(neurons, 0), v(neurons, 0), acc_bits(bits) {}

void StemState::reset(std::span<const std::int64_t> preload, FixedMult m0) {
  phase = StemPhase::Accumulating;
  std::fill(v.begin(), v.end(), 0);
  if (preload.empty()) {
    std::fill(u.begin(), u.end(), 0);
    return;
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto s = saturate(apply(m0, preload[i]), acc_bits);
    u[i] = s.value;
    saturation_count += s.saturated ? 1 : 0;
  }
}

void accumulate_step(StemState& state, std::span<const std::int64_t> current, FixedMult m0) {
  for (std::size_t i = 0; i < state.u.size(); ++i) {
    if (current[i] == 0) continue;
    const auto s = saturate(state.u[i] + apply(m0, current[i]), state.acc_bits);
    state.u[i] = s.value;
    state.saturation_count += s.saturated ? 1 : 0;
  }
}

void accumulate_step(StemState& state, std::span<const std::uint8_t> spikes, const Tensor<std::int8_t>& weights,
                     int step, FixedMult m0, const PhiSchedule& schedule) {
  const std::size_t inputs = spikes.size();
  std::vector<std::int64_t> current(state.size(), 0);
  for (std::size_t j = 0; j < inputs; ++j) {
    if (!spikes[j]) continue;
    for (std::size_t i = 0; i < current.size(); ++i) current[i] += weights[i * inputs + j];
  }
  const std::int64_t w = schedule.weight(step);
  for (auto& c : current) c *= w;
  accumulate_step(state, current, m0);
}

void finalize(StemState& state, FixedMult m1, std::span<const std::int64_t> bias, int k, bool signed_output,
              bool clamp) {
  const std::int64_t hi = (std::int64_t{1} << (k - 1)) - 1;
  const std::int64_t lo = signed_output ? -hi : 0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const std::int64_t raw = apply(m1, state.u[i]) + (bias.empty() ? 0 : bias[i]);
    state.v[i] = clamp ? std::clamp(raw, lo, hi) : raw;
  }
  state.phase = StemPhase::Generating;
}

void generate_step(StemState& state, int step, const PhiSchedule& schedule, std::span<std::uint8_t> spikes,
                   int drlo_bits) {
  const std::int64_t w = schedule.weight(step);
  const bool suppressed = schedule.bit_position(step) < drlo_bits;
  for (std::size_t i = 0; i < state.size(); ++i) {
    auto& v = state.v[i];
    const bool fire = w > 0 ? v >= w : v < 0;
    if (fire) v -= w;
    spikes[i] = (fire && !suppressed) ? 1 : 0;
  }
}

std::string format_spike_dump(const SpikeTrain& train) {
  std::ostringstream out;
  for (int step = 0; step < train.steps(); ++step) {
    out << step << ':';
    const auto r = train.row(step);
    bool any = false;
    for (std::size_t i = 0; i < r.size();) {
      if (!r[i]) {
        ++i;
        continue;
      }
      std::size_t end = i;
      while (end + 1 < r.size() && r[end + 1]) ++end;
      out << (any ? "," : " ") << i;
      if (end > i) out << '-' << end;
      any = true;
      i = end + 1;
    }
    if (!any) out << " -";
    out << '\n';
  }
  return out.str();
}

SpikeTrain parse_spike_dump(const std::string& text, int k, std::size_t neurons) {
  SpikeTrain train(k, neurons);
  std::istringstream in(text);
  std::string line;
  int expected = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw Error(ErrorKind::Format, "spike dump line without ':'");
    const int step = std::stoi(line.substr(0, colon));
    if (step != expected || step >= k) throw Error(ErrorKind::Format, "spike dump steps out of order");
    ++expected;
    std::string ranges = line.substr(colon + 1);
    ranges.erase(0, ranges.find_first_not_of(' '));
    if (ranges == "-") continue;
    std::istringstream items(ranges);
    std::string item;
    while (std::getline(items, item, ',')) {
      const auto dash = item.find('-');
      const std::size_t first = std::stoul(item.substr(0, dash));
      const std::size_t last = dash == std::string::npos ? first : std::stoul(item.substr(dash + 1));
      if (last >= neurons || first > last) throw Error(ErrorKind::Format, "spike dump index out of range");
      for (std::size_t i = first; i <= last; ++i) train.set(i, step, true);
    }
  }
  if (expected != k) throw Error(ErrorKind::Format, "spike dump has " + std::to_string(expected) + " steps");
  return train;
}

}  // namespace stemc

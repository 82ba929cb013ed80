#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stemc {

struct QuantizedNetwork;

/// Per-layer spike sparsification settings. Both factors are bit counts:
/// `rot_bits` rounds the pre-generation value to a multiple of 2^rot_bits,
/// `drlo_bits` suppresses spikes for bit positions below drlo_bits.
struct SparsityEntry {
  std::string layer;
  int rot_bits = 0;
  int drlo_bits = 0;

  bool is_identity() const { return rot_bits == 0 && drlo_bits == 0; }
  bool operator==(const SparsityEntry&) const = default;
};

struct SparsityPlan {
  std::vector<SparsityEntry> entries;

  /// nullptr when the layer has no entry (identity).
  const SparsityEntry* find(const std::string& layer) const;
  SparsityEntry& at(const std::string& layer);
  bool is_identity() const;

  bool operator==(const SparsityPlan&) const = default;
};

/// Identity entries for every layer that may be sparsified (hidden layers with
/// ReLU outputs).
SparsityPlan identity_plan(const QuantizedNetwork& qnet);

/// Same (rot, drlo) applied to every sparsifiable layer.
SparsityPlan uniform_plan(const QuantizedNetwork& qnet, int rot_bits, int drlo_bits);

/// Throws Error(Config) if an entry names an unknown or non-sparsifiable
/// layer, or a factor is outside [0, K).
void validate_plan(const SparsityPlan& plan, const QuantizedNetwork& qnet);

/// Round-off truncation: round-half-away(v / 2^rot_bits) * 2^rot_bits,
/// clamped to [0, 2^(k-1) - 1].
std::int64_t rot(std::int64_t v, int rot_bits, int k);

/// Clears all bits below position `drlo_bits`.
std::int64_t drlo(std::int64_t v, int drlo_bits);

/// drlo(rot(v)); identity when `entry` is null.
std::int64_t sparsify(std::int64_t v, const SparsityEntry* entry, int k);

}  // namespace stemc

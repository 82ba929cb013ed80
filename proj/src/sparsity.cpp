#include "stemc/sparsity.hpp"

#include <algorithm>

#include "stemc/error.hpp"
#include "stemc/fixedpoint.hpp"
#include "stemc/quantizer.hpp"

namespace stemc {

const SparsityEntry* SparsityPlan::find(const std::string& layer) const {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.layer == layer; });
  return it == entries.end() ? nullptr : &*it;
}

SparsityEntry& SparsityPlan::at(const std::string& layer) {
  auto it = std::find_if(entries.begin(), entries.end(), [&](const auto& e) { return e.layer == layer; });
  if (it == entries.end()) throw Error(ErrorKind::Config, "no sparsity entry for layer '" + layer + "'");
  return *it;
}

bool SparsityPlan::is_identity() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.is_identity(); });
}

namespace {

bool sparsifiable(const QuantizedNetwork& qnet, std::size_t index) {
  const auto& spec = qnet.layers[index].spec;
  return index + 1 < qnet.layers.size() && spec.kind != LayerKind::Flatten && !spec.is_signed_output();
}

}  // namespace

SparsityPlan uniform_plan(const QuantizedNetwork& qnet, int rot_bits, int drlo_bits) {
  SparsityPlan plan;
  for (std::size_t i = 0; i < qnet.layers.size(); ++i) {
    if (sparsifiable(qnet, i)) plan.entries.push_back({qnet.layers[i].spec.name, rot_bits, drlo_bits});
  }
  return plan;
}

SparsityPlan identity_plan(const QuantizedNetwork& qnet) { return uniform_plan(qnet, 0, 0); }

void validate_plan(const SparsityPlan& plan, const QuantizedNetwork& qnet) {
  for (const auto& entry : plan.entries) {
    const int index = qnet.index_of(entry.layer);
    if (index < 0) throw Error(ErrorKind::Config, "sparsity entry for unknown layer '" + entry.layer + "'");
    if (!sparsifiable(qnet, static_cast<std::size_t>(index))) {
      throw Error(ErrorKind::Config, "layer '" + entry.layer + "' cannot be sparsified");
    }
    if (entry.rot_bits < 0 || entry.rot_bits >= qnet.k() || entry.drlo_bits < 0 || entry.drlo_bits >= qnet.k()) {
      throw Error(ErrorKind::Config, "sparsity factors for '" + entry.layer + "' must lie in [0, K)");
    }
  }
}

std::int64_t rot(std::int64_t v, int rot_bits, int k) {
  if (rot_bits <= 0) return v;
  const std::int64_t step = std::int64_t{1} << rot_bits;
  const std::int64_t rounded = div_round_half_away(v, step) * step;
  return std::clamp<std::int64_t>(rounded, 0, (std::int64_t{1} << (k - 1)) - 1);
}

std::int64_t drlo(std::int64_t v, int drlo_bits) {
  if (drlo_bits <= 0) return v;
  return v & ~((std::int64_t{1} << drlo_bits) - 1);
}

std::int64_t sparsify(std::int64_t v, const SparsityEntry* entry, int k) {
  if (entry == nullptr) return v;
  return drlo(rot(v, entry->rot_bits, k), entry->drlo_bits);
}

}  // namespace stemc

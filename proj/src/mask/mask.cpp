#include "mtm/mask/mask.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mtm::mask {

namespace {
constexpr int kM = data::kNumModalities;
}

MaskGrid random_mask(int length, double ratio_lo, double ratio_hi, Rng& rng,
                     MaskDrawInfo* info) {
  if (length < 1) throw std::invalid_argument("random_mask: length must be >= 1");
  if (!(0.0 <= ratio_lo && ratio_lo <= ratio_hi && ratio_hi <= 1.0)) {
    throw std::invalid_argument("random_mask: ratio range must satisfy 0 <= lo <= hi <= 1");
  }
  const int total = length * kM;
  const double r = ratio_lo == ratio_hi ? ratio_lo : rng.uniform(ratio_lo, ratio_hi);
  const int hidden = static_cast<int>(std::lround(r * total));

  MaskGrid grid = MaskGrid::all_visible(length);
  // partial Fisher-Yates: the first `hidden` entries of a shuffled index list
  std::vector<int> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < hidden; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(total - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    grid.vis[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] = 0;
  }
  if (info) {
    info->base_ratio = r;
    info->base_hidden = hidden;
    info->pivot = -1;
  }
  return grid;
}

MaskGrid random_autoregressive_mask(int length, double ratio_lo, double ratio_hi,
                                    Rng& rng, MaskDrawInfo* info) {
  MaskGrid grid = random_mask(length, ratio_lo, ratio_hi, rng, info);
  const int total = length * kM;
  // pivot uniform among hidden cells; when none are hidden, force one uniformly
  std::vector<int> hidden_idx;
  hidden_idx.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    if (!grid.vis[static_cast<std::size_t>(i)]) hidden_idx.push_back(i);
  }
  int pivot;
  if (hidden_idx.empty()) {
    pivot = static_cast<int>(rng.below(static_cast<std::uint64_t>(total)));
  } else {
    pivot = hidden_idx[rng.below(hidden_idx.size())];
  }
  for (int i = pivot; i < total; ++i) grid.vis[static_cast<std::size_t>(i)] = 0;
  if (info) info->pivot = pivot;
  return grid;
}

const char* capability_name(CapabilityKind kind) {
  switch (kind) {
    case CapabilityKind::BC: return "bc";
    case CapabilityKind::RCBC: return "rcbc";
    case CapabilityKind::ID: return "id";
    case CapabilityKind::FD: return "fd";
    case CapabilityKind::FULL: return "full";
  }
  return "?";
}

CapabilityKind capability_from_name(const std::string& name) {
  if (name == "bc") return CapabilityKind::BC;
  if (name == "rcbc") return CapabilityKind::RCBC;
  if (name == "id") return CapabilityKind::ID;
  if (name == "fd") return CapabilityKind::FD;
  if (name == "full") return CapabilityKind::FULL;
  throw std::invalid_argument("unknown capability mask: " + name);
}

MaskGrid capability_mask(CapabilityKind kind, int length, int query_t) {
  if (query_t < 1 || query_t > length) {
    throw std::invalid_argument("capability_mask: query_t " + std::to_string(query_t) +
                                " outside [1," + std::to_string(length) + "]");
  }
  if ((kind == CapabilityKind::FD || kind == CapabilityKind::ID) && query_t == length) {
    throw std::invalid_argument(std::string(capability_name(kind)) +
                                " mask: query_t = L leaves no next-state slot");
  }
  if (kind == CapabilityKind::FULL) return MaskGrid::all_visible(length);

  MaskGrid grid = MaskGrid::all_hidden(length);
  const int q = query_t;  // 1-based
  switch (kind) {
    case CapabilityKind::RCBC:
      for (int t = 1; t <= q; ++t) grid.set(t - 1, data::kRtg, true);
      [[fallthrough]];
    case CapabilityKind::BC:
      for (int t = 1; t <= q; ++t) grid.set(t - 1, data::kState, true);
      for (int t = 1; t <= q - 1; ++t) grid.set(t - 1, data::kAction, true);
      break;
    case CapabilityKind::ID:
      for (int t = 1; t <= q + 1; ++t) grid.set(t - 1, data::kState, true);
      break;
    case CapabilityKind::FD:
      for (int t = 1; t <= q; ++t) {
        grid.set(t - 1, data::kState, true);
        grid.set(t - 1, data::kAction, true);
      }
      break;
    case CapabilityKind::FULL:
      break;
  }
  return grid;
}

MaskGrid hetero_stage1_mask(int length, int query_t) {
  if (query_t < 1 || query_t >= length) {
    throw std::invalid_argument("hetero_stage1_mask: query_t must be in [1, L)");
  }
  MaskGrid grid = MaskGrid::all_hidden(length);
  for (int t = 1; t <= query_t; ++t) {
    grid.set(t - 1, data::kRtg, true);
    grid.set(t - 1, data::kState, true);
  }
  return grid;
}

MaskGrid intersect_presence(const MaskGrid& grid, const bool present[data::kNumModalities]) {
  MaskGrid out = grid;
  for (int t = 0; t < grid.length; ++t) {
    for (int m = 0; m < kM; ++m) {
      if (!present[m]) out.set(t, m, false);
    }
  }
  return out;
}

}  // namespace mtm::mask

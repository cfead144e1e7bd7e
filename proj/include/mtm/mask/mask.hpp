#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtm/core/rng.hpp"
#include "mtm/data/trajectory.hpp"

namespace mtm::mask {

// Boolean visibility grid over a segment: L timesteps x 3 modalities in the
// fixed (rtg, state, action) order. true = visible to the encoder, false =
// hidden (replaced by a mask token at the decoder).
struct MaskGrid {
  int length = 0;
  std::vector<std::uint8_t> vis;  // length * 3, index t*3 + m

  static MaskGrid all_hidden(int length) {
    MaskGrid g;
    g.length = length;
    g.vis.assign(static_cast<std::size_t>(length) * data::kNumModalities, 0);
    return g;
  }
  static MaskGrid all_visible(int length) {
    MaskGrid g = all_hidden(length);
    std::fill(g.vis.begin(), g.vis.end(), 1);
    return g;
  }

  bool visible(int t, int m) const {
    return vis[static_cast<std::size_t>(t) * data::kNumModalities + m] != 0;
  }
  void set(int t, int m, bool visible_flag) {
    vis[static_cast<std::size_t>(t) * data::kNumModalities + m] = visible_flag ? 1 : 0;
  }
  int visible_count() const {
    int c = 0;
    for (auto b : vis) c += b != 0;
    return c;
  }
  int hidden_count() const { return static_cast<int>(vis.size()) - visible_count(); }
};

// Diagnostics from a random draw (the pre-pivot base mask statistics).
struct MaskDrawInfo {
  double base_ratio = 0.0;  // the sampled ratio r
  int base_hidden = 0;      // round(r * 3L) cells hidden before any pivot
  int pivot = -1;           // first flattened index of the forced suffix, or -1
};

// Hides exactly round(r*3L) cells, r ~ Uniform[ratio_lo, ratio_hi], chosen
// uniformly without replacement.
MaskGrid random_mask(int length, double ratio_lo, double ratio_hi, Rng& rng,
                     MaskDrawInfo* info = nullptr);

// random_mask plus an autoregressive pivot: one hidden cell is chosen (or
// forced) and every cell at flattened position >= pivot is hidden, so the
// final (action, t=L) cell is always hidden and some hidden cell has no
// visible successor.
MaskGrid random_autoregressive_mask(int length, double ratio_lo, double ratio_hi,
                                    Rng& rng, MaskDrawInfo* info = nullptr);

enum class CapabilityKind { BC, RCBC, ID, FD, FULL };

const char* capability_name(CapabilityKind kind);
CapabilityKind capability_from_name(const std::string& name);

// Deterministic inference layouts; query_t is 1-based.
//   BC:   states 1..q, actions 1..q-1 visible; rtg hidden; target action q.
//   RCBC: BC plus rtg 1..q visible; target action q.
//   ID:   states 1..q+1 visible; rest hidden; target action q (q < L).
//   FD:   states 1..q, actions 1..q visible; rtg hidden; target state q+1 (q < L).
//   FULL: everything visible.
MaskGrid capability_mask(CapabilityKind kind, int length, int query_t);

// Mask for the first stage of heteromodal two-stage inference: rtg and states
// visible through query_t, all actions hidden; target is the state at
// query_t + 1.
MaskGrid hetero_stage1_mask(int length, int query_t);

// Visibility with absent modalities forced hidden.
MaskGrid intersect_presence(const MaskGrid& grid, const bool present[data::kNumModalities]);

}  // namespace mtm::mask

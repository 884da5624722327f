#pragma once

#include <bit>
#include <cstddef>
#include <vector>

namespace susyflow {

/// Increasing-index ghost basis element chi^{i1}...chi^{ik}, encoded as a
/// bitmask over axes. The ghost number is the popcount.
using GhostMask = unsigned;

constexpr int ghost_degree(GhostMask mask) { return std::popcount(mask); }

constexpr bool has_axis(GhostMask mask, int axis) { return (mask >> axis) & 1u; }

/// (-1)^{#{j in mask : j < axis}}: sign picked up when chi^axis is moved
/// into (or out of) its slot in the increasing ordering.
constexpr double slot_sign(GhostMask mask, int axis) {
  const GhostMask below = mask & ((1u << axis) - 1u);
  return (std::popcount(below) & 1) ? -1.0 : 1.0;
}

/// Sign of the merge permutation taking chi^S chi^T into increasing order.
/// Zero when S and T overlap.
constexpr double merge_sign(GhostMask s, GhostMask t) {
  if (s & t) return 0.0;
  int inversions = 0;
  for (int a = 0; a < 32; ++a) {
    if (!has_axis(s, a)) continue;
    inversions += std::popcount(t & ((1u << a) - 1u));
  }
  return (inversions & 1) ? -1.0 : 1.0;
}

/// Masks of the given degree in ascending order.
inline std::vector<GhostMask> masks_of_degree(int dim, int degree) {
  std::vector<GhostMask> out;
  for (GhostMask m = 0; m < (1u << dim); ++m)
    if (ghost_degree(m) == degree) out.push_back(m);
  return out;
}

constexpr std::size_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

/// Position of `mask` within masks_of_degree(dim, degree(mask)).
inline std::size_t mask_slot(int dim, GhostMask mask) {
  std::size_t slot = 0;
  for (GhostMask m = 0; m < mask; ++m)
    if (ghost_degree(m) == ghost_degree(mask)) ++slot;
  (void)dim;
  return slot;
}

}  // namespace susyflow

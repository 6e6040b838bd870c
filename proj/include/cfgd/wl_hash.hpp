// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "cfgd/graph.hpp"
#include "cfgd/rng.hpp"

namespace cfgd {

/// Weisfeiler-Lehman colour-refinement digest. Colours start from the node
/// type and are refined by the sorted multiset of (bond type, neighbour
/// colour). The digest is the hash of the sorted final colours, so it does
/// not depend on node order.
inline std::uint64_t wl_hash(const CategoricalGraph& g, int rounds = 3) {
  const std::size_t n = g.n();
  std::vector<std::uint64_t> color(n);
  for (std::size_t i = 0; i < n; ++i) color[i] = hash_combine(0x5eed, static_cast<std::uint64_t>(g.node(i)));

  std::vector<std::uint64_t> next(n);
  std::vector<std::uint64_t> neigh;
  for (int r = 0; r < rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      neigh.clear();
      for (std::size_t j = 0; j < n; ++j) {
        const int e = g.edge(i, j);
        if (e != 0) neigh.push_back(hash_combine(static_cast<std::uint64_t>(e), color[j]));
      }
      std::sort(neigh.begin(), neigh.end());
      std::uint64_t h = hash_combine(color[i], neigh.size());
      for (auto v : neigh) h = hash_combine(h, v);
      next[i] = h;
    }
    color.swap(next);
  }

  std::sort(color.begin(), color.end());
  std::uint64_t digest = hash_combine(0xd16e57, n);
  for (auto c : color) digest = hash_combine(digest, c);
  return digest;
}

}  // namespace cfgd

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Random valence-respecting molecules for synthetic benchmarks.

#pragma once

#include <vector>

#include "cfgd/graph.hpp"
#include "cfgd/rng.hpp"
#include "cfgd/smiles.hpp"

namespace cfgd {

struct SyntheticOptions {
  std::size_t min_atoms = 1;
  std::size_t max_atoms = 8;
  double double_bond_prob = 0.1;
  double ring_prob = 0.15;
  // Relative weights of the non-carbon types, in vocabulary order after C.
  std::vector<double> hetero_weights = {0.45, 0.45, 0.1};
};

/// One connected molecule: a random tree grown atom by atom (each new atom
/// attaches to an earlier atom with spare valence), then optional bond
/// upgrades and ring closures. The per-molecule heteroatom probability is
/// itself uniform on [0, 1], which spreads hetero_fraction over its range.
inline CategoricalGraph random_molecule(const Vocab& vocab, const SyntheticOptions& opt, Rng& rng) {
  const std::size_t carbon = vocab.atoms.index("C");
  for (;;) {
    const std::size_t n = opt.min_atoms + rng.index(opt.max_atoms - opt.min_atoms + 1);
    const double hetero_p = rng.uniform();
    std::vector<int> types(n);
    for (auto& t : types) {
      if (!rng.bernoulli(hetero_p)) {
        t = static_cast<int>(carbon);
      } else {
        std::size_t pick = rng.categorical(opt.hetero_weights);
        t = static_cast<int>(pick >= carbon ? pick + 1 : pick);
      }
    }
    CategoricalGraph g(vocab.atoms.size(), vocab.bonds.size(), types);
    auto spare = [&](std::size_t i) {
      return vocab.atoms.max_valence(static_cast<std::size_t>(g.node(i))) - used_valence(g, vocab, i);
    };
    const int single = static_cast<int>(*vocab.bonds.index_of_order(1));
    const int dbl = static_cast<int>(*vocab.bonds.index_of_order(2));
    bool ok = true;
    for (std::size_t i = 1; i < n && ok; ++i) {
      std::vector<double> w(i);
      for (std::size_t j = 0; j < i; ++j) w[j] = spare(j) > 0 ? 1.0 : 0.0;
      double total = 0.0;
      for (double x : w) total += x;
      if (total == 0.0) {
        ok = false;
        break;
      }
      g.set_edge(rng.categorical(w), i, single);
    }
    if (!ok) continue;
    for (const auto& [i, j, t] : g.bonds()) {
      if (rng.bernoulli(opt.double_bond_prob) && spare(i) > 0 && spare(j) > 0) g.set_edge(i, j, dbl);
    }
    if (n >= 3 && rng.bernoulli(opt.ring_prob)) {
      const std::size_t i = rng.index(n), j = rng.index(n);
      if (i != j && g.edge(i, j) == 0 && spare(i) > 0 && spare(j) > 0) g.set_edge(i, j, single);
    }
    if (check_valence(g, vocab).valid) return g;
  }
}

}  // namespace cfgd

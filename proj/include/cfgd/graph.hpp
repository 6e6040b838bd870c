// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Categorical molecular graphs over atom/bond vocabularies.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cfgd/error.hpp"

namespace cfgd {

class AtomVocab {
 public:
  AtomVocab() = default;
  AtomVocab(std::vector<std::string> symbols, std::vector<int> max_valence,
            std::vector<double> atomic_mass)
      : symbols_(std::move(symbols)),
        max_valence_(std::move(max_valence)),
        atomic_mass_(std::move(atomic_mass)) {
    if (symbols_.empty()) throw Error(ErrorKind::InvalidArgument, "atom vocabulary is empty");
    if (max_valence_.size() != symbols_.size() || atomic_mass_.size() != symbols_.size()) {
      throw Error(ErrorKind::InvalidArgument, "atom vocabulary fields differ in length");
    }
    std::set<std::string> seen;
    for (std::size_t k = 0; k < symbols_.size(); ++k) {
      if (!seen.insert(symbols_[k]).second) {
        throw Error(ErrorKind::InvalidArgument, "duplicate atom symbol " + symbols_[k]);
      }
      if (max_valence_[k] < 1) throw Error(ErrorKind::InvalidArgument, "max valence must be >= 1");
      if (!(atomic_mass_[k] > 0.0)) throw Error(ErrorKind::InvalidArgument, "atomic mass must be > 0");
    }
  }

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(std::size_t k) const { return symbols_[k]; }
  int max_valence(std::size_t k) const { return max_valence_[k]; }
  double atomic_mass(std::size_t k) const { return atomic_mass_[k]; }
  const std::vector<std::string>& symbols() const { return symbols_; }

  std::optional<std::size_t> find(std::string_view symbol) const {
    for (std::size_t k = 0; k < symbols_.size(); ++k) {
      if (symbols_[k] == symbol) return k;
    }
    return std::nullopt;
  }

  std::size_t index(std::string_view symbol) const {
    if (auto k = find(symbol)) return *k;
    throw Error(ErrorKind::UnknownLabel, "atom type '" + std::string(symbol) + "'");
  }

 private:
  std::vector<std::string> symbols_;
  std::vector<int> max_valence_;
  std::vector<double> atomic_mass_;
};

class BondVocab {
 public:
  BondVocab() : BondVocab({"none", "single", "double", "triple"}, {0, 1, 2, 3}) {}
  BondVocab(std::vector<std::string> labels, std::vector<int> bond_order)
      : labels_(std::move(labels)), bond_order_(std::move(bond_order)) {
    if (labels_.size() < 2 || bond_order_.size() != labels_.size()) {
      throw Error(ErrorKind::InvalidArgument, "bond vocabulary needs >= 2 consistent entries");
    }
    if (bond_order_[0] != 0) throw Error(ErrorKind::InvalidArgument, "bond type 0 must be no-bond");
  }

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t k) const { return labels_[k]; }
  int bond_order(std::size_t k) const { return bond_order_[k]; }

  std::size_t index(std::string_view label) const {
    for (std::size_t k = 0; k < labels_.size(); ++k) {
      if (labels_[k] == label) return k;
    }
    throw Error(ErrorKind::UnknownLabel, "bond type '" + std::string(label) + "'");
  }

  std::optional<std::size_t> index_of_order(int order) const {
    for (std::size_t k = 0; k < bond_order_.size(); ++k) {
      if (bond_order_[k] == order) return k;
    }
    return std::nullopt;
  }

 private:
  std::vector<std::string> labels_;
  std::vector<int> bond_order_;
};

struct Vocab {
  AtomVocab atoms;
  BondVocab bonds;
};

/// Standard atomic weights (IUPAC abridged values).
namespace mass {
inline constexpr double H = 1.008;
inline constexpr double B = 10.81;
inline constexpr double C = 12.011;
inline constexpr double N = 14.007;
inline constexpr double O = 15.999;
inline constexpr double F = 18.998;
inline constexpr double P = 30.974;
inline constexpr double S = 32.06;
inline constexpr double Cl = 35.45;
inline constexpr double Br = 79.904;
inline constexpr double I = 126.904;
}  // namespace mass

/// Heavy atoms of the small-molecule corpus: C, N, O, F.
inline Vocab qm9_vocab() {
  return {AtomVocab({"C", "N", "O", "F"}, {4, 3, 2, 1}, {mass::C, mass::N, mass::O, mass::F}),
          BondVocab()};
}

/// Drug-like vocabulary with the two charged species as standalone types.
inline Vocab zinc_vocab() {
  return {AtomVocab({"C", "N", "O", "F", "B", "Br", "Cl", "I", "P", "S", "N+", "O-"},
                    {4, 3, 2, 1, 3, 1, 1, 1, 5, 6, 4, 1},
                    {mass::C, mass::N, mass::O, mass::F, mass::B, mass::Br, mass::Cl, mass::I,
                     mass::P, mass::S, mass::N, mass::O}),
          BondVocab()};
}

inline Vocab vocab_by_name(std::string_view name) {
  if (name == "qm9") return qm9_vocab();
  if (name == "zinc") return zinc_vocab();
  throw Error(ErrorKind::InvalidArgument, "unknown vocabulary '" + std::string(name) + "'");
}

/// G = (X, E) stored as type indices. The one-hot views are materialized on
/// demand, which makes the one-hot, symmetry and no-bond-diagonal invariants
/// hold by construction.
class CategoricalGraph {
 public:
  CategoricalGraph() = default;
  CategoricalGraph(std::size_t num_atom_types, std::size_t num_bond_types,
                   std::vector<int> node_types)
      : a_(num_atom_types),
        b_(num_bond_types),
        nodes_(std::move(node_types)),
        edges_(nodes_.size() * nodes_.size(), 0) {
    for (int t : nodes_) {
      if (t < 0 || static_cast<std::size_t>(t) >= a_) {
        throw Error(ErrorKind::UnknownLabel, "node type index out of range");
      }
    }
  }

  std::size_t n() const { return nodes_.size(); }
  std::size_t num_atom_types() const { return a_; }
  std::size_t num_bond_types() const { return b_; }

  int node(std::size_t i) const { return nodes_[i]; }
  int edge(std::size_t i, std::size_t j) const { return edges_[i * n() + j]; }
  const std::vector<int>& nodes() const { return nodes_; }

  void set_node(std::size_t i, int type) { nodes_[i] = type; }

  /// Sets e_ij and e_ji. Diagonal entries stay no-bond.
  void set_edge(std::size_t i, std::size_t j, int type) {
    if (i == j) {
      if (type != 0) throw Error(ErrorKind::SelfLoop, "diagonal entries are no-bond");
      return;
    }
    edges_[i * n() + j] = type;
    edges_[j * n() + i] = type;
  }

  Eigen::MatrixXd X() const {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n()), static_cast<Eigen::Index>(a_));
    for (std::size_t i = 0; i < n(); ++i) x(static_cast<Eigen::Index>(i), nodes_[i]) = 1.0;
    return x;
  }

  /// Edge tensor flattened to (n*n) x b; row i*n + j holds e_ij.
  Eigen::MatrixXd E() const {
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n() * n()), static_cast<Eigen::Index>(b_));
    for (std::size_t r = 0; r < edges_.size(); ++r) e(static_cast<Eigen::Index>(r), edges_[r]) = 1.0;
    return e;
  }

  /// Unordered (i < j, type) list of every pair that is not no-bond.
  std::vector<std::tuple<std::size_t, std::size_t, int>> bonds() const {
    std::vector<std::tuple<std::size_t, std::size_t, int>> out;
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t j = i + 1; j < n(); ++j) {
        if (edge(i, j) != 0) out.emplace_back(i, j, edge(i, j));
      }
    }
    return out;
  }

  /// Relabels nodes: node i of the result is node perm[i] of this graph.
  CategoricalGraph permuted(const std::vector<std::size_t>& perm) const {
    std::vector<int> types(n());
    for (std::size_t i = 0; i < n(); ++i) types[i] = nodes_[perm[i]];
    CategoricalGraph out(a_, b_, std::move(types));
    for (std::size_t i = 0; i < n(); ++i) {
      for (std::size_t j = 0; j < n(); ++j) out.edges_[i * n() + j] = edge(perm[i], perm[j]);
    }
    return out;
  }

  friend bool operator==(const CategoricalGraph&, const CategoricalGraph&) = default;

 private:
  std::size_t a_ = 0;
  std::size_t b_ = 0;
  std::vector<int> nodes_;
  std::vector<int> edges_;
};

struct BondSpec {
  std::size_t i;
  std::size_t j;
  std::string label;
};

inline CategoricalGraph encode_graph(const std::vector<std::string>& atoms,
                                     const std::vector<BondSpec>& bonds, const Vocab& vocab) {
  std::vector<int> types;
  types.reserve(atoms.size());
  for (const auto& sym : atoms) types.push_back(static_cast<int>(vocab.atoms.index(sym)));
  CategoricalGraph g(vocab.atoms.size(), vocab.bonds.size(), std::move(types));
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& bond : bonds) {
    if (bond.i == bond.j) throw Error(ErrorKind::SelfLoop, "bond (" + std::to_string(bond.i) + "," + std::to_string(bond.j) + ")");
    if (bond.i >= atoms.size() || bond.j >= atoms.size()) {
      throw Error(ErrorKind::InvalidArgument, "bond endpoint out of range");
    }
    const auto key = std::minmax(bond.i, bond.j);
    if (!seen.insert(key).second) {
      throw Error(ErrorKind::DuplicateBond, "bond (" + std::to_string(key.first) + "," + std::to_string(key.second) + ")");
    }
    const auto type = vocab.bonds.index(bond.label);
    if (type == 0) continue;
    g.set_edge(bond.i, bond.j, static_cast<int>(type));
  }
  return g;
}

/// Inverse of encode_graph: atom labels and the (i < j) bond list.
inline std::pair<std::vector<std::string>, std::vector<BondSpec>> decode_graph(
    const CategoricalGraph& g, const Vocab& vocab) {
  std::vector<std::string> atoms;
  for (std::size_t i = 0; i < g.n(); ++i) atoms.push_back(vocab.atoms.symbol(static_cast<std::size_t>(g.node(i))));
  std::vector<BondSpec> bonds;
  for (const auto& [i, j, t] : g.bonds()) bonds.push_back({i, j, vocab.bonds.label(static_cast<std::size_t>(t))});
  return {atoms, bonds};
}

}  // namespace cfgd

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// SMILES subset reader/writer, valence checking and scalar graph properties.
//
// Grammar: organic-subset atoms present in the vocabulary, bracket atoms for
// charged vocabulary entries ([N+], [O-]), bonds '-', '=', '#', branches,
// ring closures 1-9 and %nn, and '.' between components. Hydrogens are
// implicit. Aromatic (lowercase) atoms are rejected; input must be Kekulized.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cfgd/error.hpp"
#include "cfgd/graph.hpp"

namespace cfgd {

struct MoleculeSpec {
  std::vector<std::string> atoms;
  std::vector<BondSpec> bonds;
  std::string source_text;
};

namespace detail {

inline std::string bond_label_for_symbol(char c, const Vocab& vocab) {
  int order = 1;
  if (c == '=') order = 2;
  if (c == '#') order = 3;
  const auto k = vocab.bonds.index_of_order(order);
  if (!k) throw Error(ErrorKind::UnknownLabel, std::string("bond symbol '") + c + "' not in vocabulary");
  return vocab.bonds.label(*k);
}

inline bool is_organic_symbol(std::string_view s) {
  static const std::set<std::string_view> organic = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"};
  return organic.contains(s);
}

class SmilesReader {
 public:
  SmilesReader(std::string_view text, const Vocab& vocab) : text_(text), vocab_(vocab) {}

  MoleculeSpec read() {
    if (text_.empty()) throw Error(ErrorKind::EmptyInput, "empty SMILES");
    spec_.source_text = std::string(text_);
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (!prev_) fail(ErrorKind::SyntaxError, "branch without a preceding atom");
        if (pending_bond_) fail(ErrorKind::SyntaxError, "bond symbol before '('");
        branches_.push_back(*prev_);
        ++pos_;
      } else if (c == ')') {
        if (branches_.empty()) fail(ErrorKind::UnbalancedParenthesis, "')' without matching '('");
        if (pending_bond_) fail(ErrorKind::SyntaxError, "dangling bond symbol before ')'");
        prev_ = branches_.back();
        branches_.pop_back();
        ++pos_;
      } else if (c == '-' || c == '=' || c == '#') {
        if (pending_bond_ || !prev_) fail(ErrorKind::SyntaxError, "unexpected bond symbol");
        pending_bond_ = c;
        ++pos_;
      } else if (c == '.') {
        if (pending_bond_ || !prev_) fail(ErrorKind::SyntaxError, "unexpected '.'");
        if (!branches_.empty()) fail(ErrorKind::UnbalancedParenthesis, "'.' inside a branch");
        prev_.reset();
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        ring_closure();
      } else if (c == '[') {
        bracket_atom();
      } else if (std::isupper(static_cast<unsigned char>(c))) {
        organic_atom();
      } else if (std::islower(static_cast<unsigned char>(c))) {
        fail(ErrorKind::UnknownAtom, std::string("aromatic atom '") + c + "' (input must be Kekulized)");
      } else {
        fail(ErrorKind::SyntaxError, std::string("unexpected character '") + c + "'");
      }
    }
    if (!branches_.empty()) fail(ErrorKind::UnbalancedParenthesis, "unclosed '('");
    if (!rings_.empty()) fail(ErrorKind::UnclosedRing, "ring " + std::to_string(rings_.begin()->first) + " never closed");
    if (pending_bond_) fail(ErrorKind::SyntaxError, "dangling bond symbol at end");
    if (spec_.atoms.empty()) fail(ErrorKind::EmptyInput, "no atoms");
    return std::move(spec_);
  }

 private:
  [[noreturn]] void fail(ErrorKind kind, const std::string& msg) const {
    throw Error(kind, msg + " at position " + std::to_string(pos_) + " in \"" + std::string(text_) + "\"");
  }

  void add_bond(std::size_t i, std::size_t j, std::string label) {
    if (i == j) fail(ErrorKind::SelfLoop, "ring closure onto the same atom");
    const auto key = std::minmax(i, j);
    if (!bonded_.insert(key).second) fail(ErrorKind::DuplicateBond, "atoms already bonded");
    spec_.bonds.push_back({key.first, key.second, std::move(label)});
  }

  void add_atom(const std::string& label) {
    if (!vocab_.atoms.find(label)) fail(ErrorKind::UnknownAtom, "atom '" + label + "' not in vocabulary");
    const std::size_t idx = spec_.atoms.size();
    spec_.atoms.push_back(label);
    if (prev_) add_bond(*prev_, idx, bond_label_for_symbol(pending_bond_.value_or('-'), vocab_));
    pending_bond_.reset();
    prev_ = idx;
  }

  void organic_atom() {
    std::string sym(1, text_[pos_]);
    if (pos_ + 1 < text_.size() && std::islower(static_cast<unsigned char>(text_[pos_ + 1]))) {
      const std::string two = sym + text_[pos_ + 1];
      if (two == "Cl" || two == "Br") sym = two;
    }
    if (!is_organic_symbol(sym)) fail(ErrorKind::UnknownAtom, "'" + sym + "' outside the organic subset");
    pos_ += sym.size();
    add_atom(sym);
  }

  void bracket_atom() {
    const auto close = text_.find(']', pos_);
    if (close == std::string_view::npos) fail(ErrorKind::SyntaxError, "unterminated bracket atom");
    std::string_view body = text_.substr(pos_ + 1, close - pos_ - 1);
    std::size_t k = 0;
    if (k >= body.size() || !std::isupper(static_cast<unsigned char>(body[k]))) {
      fail(ErrorKind::UnknownAtom, "bracket atom '[" + std::string(body) + "]'");
    }
    std::string sym(1, body[k++]);
    if (k < body.size() && std::islower(static_cast<unsigned char>(body[k]))) sym += body[k++];
    if (k < body.size() && body[k] == 'H') {
      ++k;
      while (k < body.size() && std::isdigit(static_cast<unsigned char>(body[k]))) ++k;
    }
    int charge = 0;
    while (k < body.size() && (body[k] == '+' || body[k] == '-')) {
      const int sign = body[k] == '+' ? 1 : -1;
      ++k;
      if (k < body.size() && std::isdigit(static_cast<unsigned char>(body[k]))) {
        charge += sign * (body[k] - '0');
        ++k;
      } else {
        charge += sign;
      }
    }
    if (k != body.size()) fail(ErrorKind::SyntaxError, "unsupported bracket atom '[" + std::string(body) + "]'");
    std::string label = sym;
    if (charge == 1) label += "+";
    else if (charge == -1) label += "-";
    else if (charge != 0) label += (charge > 0 ? "+" : "-") + std::to_string(std::abs(charge));
    pos_ = close + 1;
    add_atom(label);
  }

  void ring_closure() {
    if (!prev_) fail(ErrorKind::SyntaxError, "ring closure without a preceding atom");
    int number = 0;
    if (text_[pos_] == '%') {
      if (pos_ + 2 >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2]))) {
        fail(ErrorKind::SyntaxError, "'%' must be followed by two digits");
      }
      number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
      if (number == 0) fail(ErrorKind::SyntaxError, "ring number 0");
    }
    auto it = rings_.find(number);
    if (it == rings_.end()) {
      rings_[number] = {*prev_, pending_bond_};
    } else {
      const auto [atom, open_bond] = it->second;
      if (open_bond && pending_bond_ && *open_bond != *pending_bond_) {
        fail(ErrorKind::BondConflict, "ring " + std::to_string(number) + " opened and closed with different bonds");
      }
      const char symbol = pending_bond_ ? *pending_bond_ : open_bond.value_or('-');
      rings_.erase(it);
      add_bond(atom, *prev_, bond_label_for_symbol(symbol, vocab_));
    }
    pending_bond_.reset();
  }

  std::string_view text_;
  const Vocab& vocab_;
  std::size_t pos_ = 0;
  MoleculeSpec spec_;
  std::optional<std::size_t> prev_;
  std::optional<char> pending_bond_;
  std::vector<std::size_t> branches_;
  std::map<int, std::pair<std::size_t, std::optional<char>>> rings_;
  std::set<std::pair<std::size_t, std::size_t>> bonded_;
};

}  // namespace detail

inline MoleculeSpec parse_smiles(std::string_view text, const Vocab& vocab) {
  return detail::SmilesReader(text, vocab).read();
}

inline CategoricalGraph to_graph(const MoleculeSpec& spec, const Vocab& vocab) {
  return encode_graph(spec.atoms, spec.bonds, vocab);
}

inline CategoricalGraph smiles_to_graph(std::string_view text, const Vocab& vocab) {
  return to_graph(parse_smiles(text, vocab), vocab);
}

/// Depth-first writer: starts at the lowest-index unvisited atom, visits
/// neighbours in index order, and separates components with '.'.
inline std::string write_smiles(const CategoricalGraph& g, const Vocab& vocab) {
  const std::size_t n = g.n();
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (const auto& [i, j, t] : g.bonds()) {
    neighbors[i].push_back(j);
    neighbors[j].push_back(i);
  }
  for (auto& nb : neighbors) std::sort(nb.begin(), nb.end());

  std::vector<bool> visited(n, false);
  std::vector<std::size_t> parent(n, n);
  std::vector<std::vector<std::size_t>> children(n);
  std::set<std::pair<std::size_t, std::size_t>> ring_bonds;

  auto discover = [&](auto&& self, std::size_t v) -> void {
    visited[v] = true;
    for (std::size_t w : neighbors[v]) {
      if (!visited[w]) {
        parent[w] = v;
        children[v].push_back(w);
        self(self, w);
      } else if (w != parent[v]) {
        ring_bonds.insert(std::minmax(v, w));
      }
    }
  };

  auto bond_symbol = [&](std::size_t u, std::size_t v) -> std::string {
    switch (vocab.bonds.bond_order(static_cast<std::size_t>(g.edge(u, v)))) {
      case 2: return "=";
      case 3: return "#";
      default: return "";
    }
  };

  auto atom_text = [&](std::size_t v) {
    const std::string& sym = vocab.atoms.symbol(static_cast<std::size_t>(g.node(v)));
    return detail::is_organic_symbol(sym) ? sym : "[" + sym + "]";
  };

  std::map<std::pair<std::size_t, std::size_t>, int> open_digits;
  std::set<int> used_digits;
  auto digit_text = [](int d) {
    return d < 10 ? std::to_string(d) : "%" + std::to_string(d);
  };

  std::string out;
  auto emit = [&](auto&& self, std::size_t v) -> void {
    out += atom_text(v);
    for (std::size_t w : neighbors[v]) {
      const auto key = std::minmax(v, w);
      if (!ring_bonds.contains(key)) continue;
      if (auto it = open_digits.find(key); it != open_digits.end()) {
        out += digit_text(it->second);
        used_digits.erase(it->second);
        open_digits.erase(it);
      } else {
        int d = 1;
        while (used_digits.contains(d)) ++d;
        used_digits.insert(d);
        open_digits[key] = d;
        out += bond_symbol(v, w) + digit_text(d);
      }
    }
    for (std::size_t k = 0; k < children[v].size(); ++k) {
      const std::size_t c = children[v][k];
      const bool last = k + 1 == children[v].size();
      if (!last) out += "(";
      out += bond_symbol(v, c);
      self(self, c);
      if (!last) out += ")";
    }
  };

  for (std::size_t v = 0; v < n; ++v) {
    if (visited[v]) continue;
    discover(discover, v);
    if (!out.empty()) out += ".";
    emit(emit, v);
  }
  return out;
}

inline std::string write_smiles(const MoleculeSpec& spec, const Vocab& vocab) {
  return write_smiles(to_graph(spec, vocab), vocab);
}

struct ValenceViolation {
  std::size_t atom;
  int used;
  int max_valence;
  friend bool operator==(const ValenceViolation&, const ValenceViolation&) = default;
};

struct ValidityReport {
  bool valid = false;
  bool connected = false;
  std::vector<ValenceViolation> violations;
};

inline int used_valence(const CategoricalGraph& g, const Vocab& vocab, std::size_t i) {
  int used = 0;
  for (std::size_t j = 0; j < g.n(); ++j) used += vocab.bonds.bond_order(static_cast<std::size_t>(g.edge(i, j)));
  return used;
}

inline bool is_connected(const CategoricalGraph& g) {
  const std::size_t n = g.n();
  if (n <= 1) return true;
  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t count = 1;
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    for (std::size_t w = 0; w < n; ++w) {
      if (!seen[w] && g.edge(v, w) != 0) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

/// Valence + connectivity proxy for chemical validity.
inline ValidityReport check_valence(const CategoricalGraph& g, const Vocab& vocab) {
  ValidityReport report;
  for (std::size_t i = 0; i < g.n(); ++i) {
    const int used = used_valence(g, vocab, i);
    const int cap = vocab.atoms.max_valence(static_cast<std::size_t>(g.node(i)));
    if (used > cap) report.violations.push_back({i, used, cap});
  }
  report.connected = is_connected(g);
  report.valid = report.violations.empty() && report.connected;
  return report;
}

/// Heavy-atom masses plus implicit hydrogens filling unused valence.
inline double molecular_weight(const CategoricalGraph& g, const Vocab& vocab) {
  double total = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) {
    const auto type = static_cast<std::size_t>(g.node(i));
    const int hydrogens = std::max(0, vocab.atoms.max_valence(type) - used_valence(g, vocab, i));
    total += vocab.atoms.atomic_mass(type) + hydrogens * mass::H;
  }
  return total;
}

enum class PropertyId { MolecularWeight, HeavyAtomCount, BondCount, HeteroFraction };

inline PropertyId parse_property_id(std::string_view name) {
  if (name == "mw") return PropertyId::MolecularWeight;
  if (name == "heavy_atom_count") return PropertyId::HeavyAtomCount;
  if (name == "bond_count") return PropertyId::BondCount;
  if (name == "hetero_fraction") return PropertyId::HeteroFraction;
  throw Error(ErrorKind::UnknownProperty, "'" + std::string(name) + "'");
}

inline std::string_view property_name(PropertyId id) {
  switch (id) {
    case PropertyId::MolecularWeight: return "mw";
    case PropertyId::HeavyAtomCount: return "heavy_atom_count";
    case PropertyId::BondCount: return "bond_count";
    case PropertyId::HeteroFraction: return "hetero_fraction";
  }
  return "?";
}

inline double graph_property(const CategoricalGraph& g, const Vocab& vocab, PropertyId which) {
  switch (which) {
    case PropertyId::MolecularWeight:
      return molecular_weight(g, vocab);
    case PropertyId::HeavyAtomCount:
      return static_cast<double>(g.n());
    case PropertyId::BondCount:
      return static_cast<double>(g.bonds().size());
    case PropertyId::HeteroFraction: {
      if (g.n() == 0) return 0.0;
      std::size_t hetero = 0;
      for (std::size_t i = 0; i < g.n(); ++i) {
        if (vocab.atoms.symbol(static_cast<std::size_t>(g.node(i))) != "C") ++hetero;
      }
      return static_cast<double>(hetero) / static_cast<double>(g.n());
    }
  }
  throw Error(ErrorKind::UnknownProperty, "unhandled property id");
}

inline double graph_property(const CategoricalGraph& g, const Vocab& vocab, std::string_view which) {
  return graph_property(g, vocab, parse_property_id(which));
}

inline std::vector<double> graph_properties(const CategoricalGraph& g, const Vocab& vocab,
                                            const std::vector<PropertyId>& which) {
  std::vector<double> out;
  out.reserve(which.size());
  for (auto id : which) out.push_back(graph_property(g, vocab, id));
  return out;
}

}  // namespace cfgd

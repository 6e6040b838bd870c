// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Datasets of (graph, guide) pairs, guide standardization and the empirical
// marginals used as noise targets.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cfgd/error.hpp"
#include "cfgd/graph.hpp"
#include "cfgd/rng.hpp"
#include "cfgd/smiles.hpp"

namespace cfgd {

/// Conditioning vector y, standardized per dimension.
struct Guide {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
  friend bool operator==(const Guide&, const Guide&) = default;
};

/// Per-dimension z-score transform fitted on the train split.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dim() const { return mean.size(); }

  Guide apply(const std::vector<double>& raw) const {
    if (raw.size() != mean.size()) {
      throw Error(ErrorKind::DimensionMismatch, "guide has " + std::to_string(raw.size()) +
                                                    " values, expected " + std::to_string(mean.size()));
    }
    Guide g;
    g.values.resize(raw.size());
    for (std::size_t k = 0; k < raw.size(); ++k) g.values[k] = (raw[k] - mean[k]) / stddev[k];
    return g;
  }

  std::vector<double> invert(const Guide& g) const {
    std::vector<double> raw(g.dim());
    for (std::size_t k = 0; k < g.dim(); ++k) raw[k] = g.values[k] * stddev[k] + mean[k];
    return raw;
  }

  static Standardization fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw Error(ErrorKind::EmptyDataset, "cannot standardize an empty split");
    const std::size_t d = rows.front().size();
    Standardization s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
    }
    for (auto& m : s.mean) m /= static_cast<double>(rows.size());
    for (const auto& r : rows) {
      for (std::size_t k = 0; k < d; ++k) s.stddev[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
    }
    for (auto& v : s.stddev) {
      v = std::sqrt(v / static_cast<double>(rows.size()));
      if (!(v > 1e-12)) v = 1.0;  // constant dimension
    }
    return s;
  }
};

enum class Split { Train, Validation, Test };

struct GraphDataset {
  std::vector<CategoricalGraph> graphs;
  std::vector<Guide> guides;                    // standardized
  std::vector<std::vector<double>> properties;  // raw property values
  std::vector<std::string> smiles;
  std::vector<Split> split;
  Standardization standardization;

  std::size_t size() const { return graphs.size(); }

  std::vector<std::size_t> indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < split.size(); ++k) {
      if (split[k] == which) out.push_back(k);
    }
    return out;
  }
};

/// One line of a dataset file: SMILES<TAB>p1,p2,...
struct DatasetRecord {
  std::string smiles;
  std::vector<double> properties;
};

inline std::vector<double> parse_property_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw Error(ErrorKind::DatasetError, "bad property value '" + item + "'");
    }
    while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
    if (used != item.size() || !std::isfinite(v)) throw Error(ErrorKind::DatasetError, "bad property value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline std::vector<DatasetRecord> read_dataset_records(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    DatasetRecord rec;
    try {
      rec.smiles = line.substr(0, tab);
      if (tab != std::string::npos) rec.properties = parse_property_list(line.substr(tab + 1));
    } catch (const Error& e) {
      throw Error(ErrorKind::DatasetError, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!records.empty() && records.front().properties.size() != rec.properties.size()) {
      throw Error(ErrorKind::DatasetError, origin + ":" + std::to_string(lineno) + ": inconsistent property count");
    }
    records.push_back(std::move(rec));
  }
  return records;
}

inline std::vector<DatasetRecord> read_dataset_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::DatasetError, "cannot open dataset file '" + path + "'");
  return read_dataset_records(in, path);
}

inline void write_dataset_records(std::ostream& out, const std::vector<DatasetRecord>& records) {
  char buf[64];
  for (const auto& r : records) {
    out << r.smiles << '\t';
    for (std::size_t k = 0; k < r.properties.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", r.properties[k]);
      out << (k ? "," : "") << buf;
    }
    out << '\n';
  }
}

struct SplitFractions {
  double validation = 0.0;
  double test = 0.0;
};

/// Parses every record and assigns splits by a seeded shuffle. The
/// standardization is fitted on the train split only.
inline GraphDataset build_dataset(const std::vector<DatasetRecord>& records, const Vocab& vocab,
                                  SplitFractions fractions = {}, std::uint64_t seed = 0) {
  if (records.empty()) throw Error(ErrorKind::EmptyDataset, "no records");
  GraphDataset ds;
  for (std::size_t k = 0; k < records.size(); ++k) {
    try {
      ds.graphs.push_back(smiles_to_graph(records[k].smiles, vocab));
    } catch (const Error& e) {
      throw Error(ErrorKind::DatasetError, "record " + std::to_string(k + 1) + ": " + e.what());
    }
    ds.smiles.push_back(records[k].smiles);
    ds.properties.push_back(records[k].properties);
  }

  const std::size_t total = records.size();
  const auto n_val = static_cast<std::size_t>(std::floor(fractions.validation * static_cast<double>(total)));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions.test * static_cast<double>(total)));
  if (n_val + n_test >= total) throw Error(ErrorKind::EmptyDataset, "split leaves no training records");
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t k = total; k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
  ds.split.assign(total, Split::Train);
  for (std::size_t k = 0; k < n_val; ++k) ds.split[order[k]] = Split::Validation;
  for (std::size_t k = n_val; k < n_val + n_test; ++k) ds.split[order[k]] = Split::Test;

  std::vector<std::vector<double>> train_rows;
  for (std::size_t k : ds.indices(Split::Train)) train_rows.push_back(ds.properties[k]);
  ds.standardization = Standardization::fit(train_rows);
  for (const auto& p : ds.properties) ds.guides.push_back(ds.standardization.apply(p));
  return ds;
}

struct DatasetMarginals {
  Eigen::VectorXd m_X;  // a
  Eigen::VectorXd m_E;  // b
  Eigen::VectorXd m_n;  // entry k is P(n = k + 1)

  std::size_t n_max() const { return static_cast<std::size_t>(m_n.size()); }
};

/// Node, edge and size marginals. Edge frequencies count ordered
/// off-diagonal pairs.
inline DatasetMarginals compute_marginals(const std::vector<CategoricalGraph>& graphs) {
  if (graphs.empty()) throw Error(ErrorKind::EmptyDataset, "no graphs for marginals");
  const auto a = static_cast<Eigen::Index>(graphs.front().num_atom_types());
  const auto b = static_cast<Eigen::Index>(graphs.front().num_bond_types());
  std::size_t n_max = 0;
  for (const auto& g : graphs) n_max = std::max(n_max, g.n());
  if (n_max == 0) throw Error(ErrorKind::EmptyDataset, "all graphs are empty");

  Eigen::VectorXd node_counts = Eigen::VectorXd::Zero(a);
  Eigen::VectorXd edge_counts = Eigen::VectorXd::Zero(b);
  Eigen::VectorXd size_counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_max));
  for (const auto& g : graphs) {
    for (std::size_t i = 0; i < g.n(); ++i) {
      node_counts[g.node(i)] += 1.0;
      for (std::size_t j = 0; j < g.n(); ++j) {
        if (i != j) edge_counts[g.edge(i, j)] += 1.0;
      }
    }
    if (g.n() > 0) size_counts[static_cast<Eigen::Index>(g.n()) - 1] += 1.0;
  }

  DatasetMarginals m;
  m.m_X = node_counts / node_counts.sum();
  if (edge_counts.sum() > 0.0) {
    m.m_E = edge_counts / edge_counts.sum();
  } else {
    // Only single-atom graphs: every pair that could ever exist is no-bond.
    m.m_E = Eigen::VectorXd::Zero(b);
    m.m_E[0] = 1.0;
  }
  m.m_n = size_counts / size_counts.sum();
  return m;
}

inline DatasetMarginals compute_marginals(const GraphDataset& ds) {
  std::vector<CategoricalGraph> train;
  for (std::size_t k : ds.indices(Split::Train)) train.push_back(ds.graphs[k]);
  return compute_marginals(train);
}

}  // namespace cfgd

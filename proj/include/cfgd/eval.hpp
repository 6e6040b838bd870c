// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Conditioning benchmark: draw K reference molecules, use each one's
// properties as the guide R times, and score the generations by mean
// absolute error, validity and uniqueness.

#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cfgd/dataset.hpp"
#include "cfgd/diffusion.hpp"
#include "cfgd/error.hpp"
#include "cfgd/nodecount.hpp"
#include "cfgd/rng.hpp"
#include "cfgd/smiles.hpp"
#include "cfgd/wl_hash.hpp"

namespace cfgd {

struct MaeResult {
  std::vector<double> per_property;
  double total = 0.0;   // mean of per_property
  double stderr_ = 0.0; // across reference molecules
  std::size_t count = 0;  // valid (i, j) pairs in the denominator
};

/// targets: K x d; generated: K x R x d; valid: K x R.
inline MaeResult mae(const std::vector<std::vector<double>>& targets,
                     const std::vector<std::vector<std::vector<double>>>& generated,
                     const std::vector<std::vector<bool>>& valid) {
  if (targets.empty() || generated.size() != targets.size() || valid.size() != targets.size()) {
    throw Error(ErrorKind::ShapeMismatch, "mae: K mismatch");
  }
  const std::size_t d = targets.front().size();
  MaeResult r;
  r.per_property.assign(d, 0.0);
  std::vector<double> per_reference;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (generated[i].size() != valid[i].size() || generated[i].empty()) throw Error(ErrorKind::ShapeMismatch, "mae: R mismatch");
    double ref_sum = 0.0;
    std::size_t ref_count = 0;
    for (std::size_t j = 0; j < generated[i].size(); ++j) {
      if (!valid[i][j]) continue;
      double sample_err = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double e = std::abs(targets[i][k] - generated[i][j][k]);
        r.per_property[k] += e;
        sample_err += e;
      }
      ref_sum += sample_err / static_cast<double>(d);
      ++ref_count;
      ++r.count;
    }
    if (ref_count > 0) per_reference.push_back(ref_sum / static_cast<double>(ref_count));
  }
  if (r.count == 0) throw Error(ErrorKind::NoValidSamples, "no valid samples to score");
  for (auto& v : r.per_property) v /= static_cast<double>(r.count);
  r.total = std::accumulate(r.per_property.begin(), r.per_property.end(), 0.0) / static_cast<double>(d);
  if (per_reference.size() > 1) {
    const double mean = std::accumulate(per_reference.begin(), per_reference.end(), 0.0) / static_cast<double>(per_reference.size());
    double ss = 0.0;
    for (double v : per_reference) ss += (v - mean) * (v - mean);
    r.stderr_ = std::sqrt(ss / static_cast<double>(per_reference.size() - 1)) / std::sqrt(static_cast<double>(per_reference.size()));
  }
  return r;
}

struct EvalRecord {
  std::vector<double> target;
  std::vector<double> achieved;
  bool valid = false;
  std::string smiles;
  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct EvalReport {
  std::vector<std::string> property_names;
  std::vector<double> mae_per_property;
  double mae = 0.0;
  double mae_stderr = 0.0;
  double validity = 0.0;
  double uniqueness = 0.0;
  std::size_t samples = 0;
  std::size_t valid_samples = 0;
  std::vector<EvalRecord> records;
  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

enum class SizeMode { Marginal, Inferred };

struct BenchmarkSetup {
  const Vocab* vocab = nullptr;
  std::vector<PropertyId> properties;
  const NoiseSchedule* schedule = nullptr;
  const DatasetMarginals* marginals = nullptr;
  const Standardization* standardization = nullptr;
  const NodeCountModel* nodecount = nullptr;  // required for SizeMode::Inferred
};

struct BenchmarkOptions {
  std::size_t K = 100;
  std::size_t R = 10;
  GuidanceConfig guidance;
  SizeMode size_mode = SizeMode::Marginal;
  std::uint64_t seed = 0;
  bool unconditional = false;  // placeholder only, no guide
};

/// The reference pool is a list of raw property vectors (one per test molecule).
template <Denoiser D>
EvalReport run_benchmark(const D& denoiser, const BenchmarkSetup& setup,
                         const std::vector<std::vector<double>>& reference_properties,
                         const BenchmarkOptions& opt) {
  if (opt.K < 1 || opt.R < 1) throw Error(ErrorKind::InvalidArgument, "K and R must be >= 1");
  if (opt.K > reference_properties.size()) {
    throw Error(ErrorKind::InvalidArgument, "K = " + std::to_string(opt.K) + " exceeds the " +
                                                std::to_string(reference_properties.size()) + " reference molecules");
  }
  if (opt.size_mode == SizeMode::Inferred && setup.nodecount == nullptr) {
    throw Error(ErrorKind::InvalidArgument, "inferred size mode needs a node-count model");
  }
  const Vocab& vocab = *setup.vocab;

  std::vector<std::size_t> pool(reference_properties.size());
  std::iota(pool.begin(), pool.end(), 0);
  Rng pick = Rng::stream(opt.seed, "references");
  for (std::size_t k = 0; k < opt.K; ++k) std::swap(pool[k], pool[k + pick.index(pool.size() - k)]);

  EvalReport report;
  for (auto p : setup.properties) report.property_names.emplace_back(property_name(p));
  std::vector<std::vector<double>> targets;
  std::vector<std::vector<std::vector<double>>> achieved(opt.K);
  std::vector<std::vector<bool>> valid(opt.K);
  std::set<std::uint64_t> distinct;
  const std::uint64_t cell_root = Rng::stream(opt.seed, "cells")();
  for (std::size_t i = 0; i < opt.K; ++i) {
    const auto& target = reference_properties[pool[i]];
    targets.push_back(target);
    const Guide guide = setup.standardization->apply(target);
    for (std::size_t j = 0; j < opt.R; ++j) {
      Rng rng = Rng::substream(cell_root, i * opt.R + j);
      const int n = opt.size_mode == SizeMode::Inferred ? sample_node_count(*setup.nodecount, guide, rng)
                                                        : sample_node_count(*setup.marginals, rng);
      const std::optional<Guide> y = opt.unconditional ? std::nullopt : std::optional<Guide>(guide);
      const CategoricalGraph g = sample(denoiser, y, static_cast<std::size_t>(n), opt.guidance, *setup.schedule,
                                        *setup.marginals, rng);
      EvalRecord rec;
      rec.target = target;
      rec.achieved = graph_properties(g, vocab, setup.properties);
      rec.valid = check_valence(g, vocab).valid;
      rec.smiles = write_smiles(g, vocab);
      achieved[i].push_back(rec.achieved);
      valid[i].push_back(rec.valid);
      if (rec.valid) {
        distinct.insert(wl_hash(g));
        ++report.valid_samples;
      }
      report.records.push_back(std::move(rec));
    }
  }
  report.samples = opt.K * opt.R;
  report.validity = static_cast<double>(report.valid_samples) / static_cast<double>(report.samples);
  report.uniqueness = report.valid_samples ? static_cast<double>(distinct.size()) / static_cast<double>(report.valid_samples) : 0.0;
  if (report.valid_samples > 0) {
    const auto m = mae(targets, achieved, valid);
    report.mae_per_property = m.per_property;
    report.mae = m.total;
    report.mae_stderr = m.stderr_;
  } else {
    report.mae_per_property.assign(setup.properties.size(), std::nan(""));
    report.mae = std::nan("");
    report.mae_stderr = std::nan("");
  }
  return report;
}

namespace detail {
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join_values(const std::vector<double>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? "," : "") + fmt17(v[k]);
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}
}  // namespace detail

/// One line per sample: target<TAB>achieved<TAB>valid<TAB>smiles.
inline void write_records(std::ostream& out, const std::vector<EvalRecord>& records) {
  for (const auto& r : records) {
    out << detail::join_values(r.target) << '\t' << detail::join_values(r.achieved) << '\t' << (r.valid ? 1 : 0)
        << '\t' << r.smiles << '\n';
  }
}

inline std::vector<EvalRecord> read_records(std::istream& in) {
  std::vector<EvalRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = detail::split(line, '\t');
    if (cols.size() != 4) throw Error(ErrorKind::DatasetError, "record line needs 4 columns: " + line);
    EvalRecord r;
    r.target = parse_property_list(cols[0]);
    r.achieved = parse_property_list(cols[1]);
    r.valid = cols[2] == "1";
    r.smiles = cols[3];
    out.push_back(std::move(r));
  }
  return out;
}

/// Line-oriented key<TAB>value summary.
inline void write_summary(std::ostream& out, const EvalReport& r) {
  out << "samples\t" << r.samples << '\n';
  out << "valid_samples\t" << r.valid_samples << '\n';
  out << "validity\t" << detail::fmt17(r.validity) << '\n';
  out << "uniqueness\t" << detail::fmt17(r.uniqueness) << '\n';
  out << "mae\t" << detail::fmt17(r.mae) << '\n';
  out << "mae_stderr\t" << detail::fmt17(r.mae_stderr) << '\n';
  for (std::size_t k = 0; k < r.property_names.size(); ++k) {
    out << "mae." << r.property_names[k] << '\t' << detail::fmt17(r.mae_per_property[k]) << '\n';
  }
}

inline EvalReport read_summary(std::istream& in) {
  EvalReport r;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorKind::DatasetError, "summary line without a tab: " + line);
    const std::string key = line.substr(0, tab);
    const std::string value = line.substr(tab + 1);
    if (key == "samples") r.samples = std::stoull(value);
    else if (key == "valid_samples") r.valid_samples = std::stoull(value);
    else if (key == "validity") r.validity = std::stod(value);
    else if (key == "uniqueness") r.uniqueness = std::stod(value);
    else if (key == "mae") r.mae = std::stod(value);
    else if (key == "mae_stderr") r.mae_stderr = std::stod(value);
    else if (key.rfind("mae.", 0) == 0) {
      r.property_names.push_back(key.substr(4));
      r.mae_per_property.push_back(std::stod(value));
    } else {
      throw Error(ErrorKind::DatasetError, "unknown summary key " + key);
    }
  }
  return r;
}

}  // namespace cfgd

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Helpers shared by the unit tests and the acceptance runner.

#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "cfgd/dataset.hpp"
#include "cfgd/smiles.hpp"
#include "cfgd/synthetic.hpp"
#include "cfgd/training.hpp"

namespace cfgd::testing {

inline CategoricalGraph random_graph(Rng& rng, std::size_t n, std::size_t a, std::size_t b) {
  std::vector<int> nodes(n);
  for (auto& t : nodes) t = static_cast<int>(rng.index(a));
  CategoricalGraph g(a, b, nodes);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) g.set_edge(i, j, static_cast<int>(rng.index(b)));
  return g;
}

inline std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  for (std::size_t k = n; k > 1; --k) std::swap(p[k - 1], p[rng.index(k)]);
  return p;
}

inline Guide random_guide(Rng& rng, int d) {
  Guide y;
  for (int k = 0; k < d; ++k) y.values.push_back(rng.normal());
  return y;
}

/// Per tensor: max |analytic - numeric| / max(max |numeric|, max |analytic|, floor).
inline std::map<std::string, double> gradient_errors(const DenoiserParams& params,
                                                     const std::vector<NoisedSample>& samples, double h = 1e-5,
                                                     double floor = 1e-6) {
  const auto analytic = loss_and_grad(params, samples).grads;
  std::map<std::string, double> errors;
  DenoiserParams work = params;
  for (const auto& [name, value] : params.tensors) {
    Eigen::MatrixXd numeric(value.rows(), value.cols());
    auto& slot = work.tensors.at(name);
    for (Eigen::Index e = 0; e < value.size(); ++e) {
      const double keep = slot.data()[e];
      slot.data()[e] = keep + h;
      const double fp = batch_loss(work, samples);
      slot.data()[e] = keep - h;
      const double fm = batch_loss(work, samples);
      slot.data()[e] = keep;
      numeric.data()[e] = (fp - fm) / (2.0 * h);
    }
    const auto& a = analytic.at(name);
    const double scale = std::max({numeric.cwiseAbs().maxCoeff(), a.cwiseAbs().maxCoeff(), floor});
    errors[name] = (a - numeric).cwiseAbs().maxCoeff() / scale;
  }
  return errors;
}

/// Tiny configuration used by the gradient and equivariance checks.
inline DenoiserParams tiny_denoiser(std::uint64_t seed, int guide_dim = 2) {
  DenoiserConfig c;
  c.layers = 1;
  c.d_node = 8;
  c.d_edge = 4;
  c.d_global = 4;
  c.heads = 2;
  c.d_guide = 4;
  c.ff_mult = 1;
  return init_denoiser(c, {4, 4, guide_dim, 4, 10}, seed);
}

/// A mix of guided and placeholder samples on small random graphs.
inline std::vector<NoisedSample> gradient_samples(std::uint64_t seed, int guide_dim = 2) {
  Rng rng(seed);
  std::vector<NoisedSample> out;
  for (std::size_t n : {4, 3, 1, 2}) {
    NoisedSample s;
    s.clean = random_graph(rng, n, 4, 4);
    s.noisy = random_graph(rng, n, 4, 4);
    s.t = 1 + static_cast<int>(rng.index(10));
    if (out.size() % 2 == 0) s.guide = random_guide(rng, guide_dim);
    out.push_back(std::move(s));
  }
  return out;
}

/// Random valid molecules over {C, N, O, F} with guide
/// (heavy_atom_count, hetero_fraction).
struct SyntheticTask {
  Vocab vocab = qm9_vocab();
  std::vector<PropertyId> properties = {PropertyId::HeavyAtomCount, PropertyId::HeteroFraction};
  GraphDataset dataset;
  DatasetMarginals marginals;
  std::vector<std::vector<double>> test_properties;
};

inline SyntheticTask synthetic_task(std::size_t count, std::uint64_t seed, double test_fraction = 0.1) {
  SyntheticTask task;
  Rng rng = Rng::stream(seed, "corpus");
  std::vector<DatasetRecord> records;
  for (std::size_t k = 0; k < count; ++k) {
    const auto g = random_molecule(task.vocab, {}, rng);
    records.push_back({write_smiles(g, task.vocab), graph_properties(g, task.vocab, task.properties)});
  }
  task.dataset = build_dataset(records, task.vocab, {0.0, test_fraction}, Rng::stream(seed, "split")());
  task.marginals = compute_marginals(task.dataset);
  for (auto k : task.dataset.indices(Split::Test)) task.test_properties.push_back(task.dataset.properties[k]);
  return task;
}

inline std::vector<TrainingExample> training_examples_of(const SyntheticTask& task) {
  return training_examples(task.dataset, Split::Train);
}

}  // namespace cfgd::testing

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Guide-conditioned size model p(n | y): two ReLU hidden layers and a
// softmax over sizes 1..n_max.

#pragma once

#include <Eigen/Dense>

#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "cfgd/autodiff.hpp"
#include "cfgd/dataset.hpp"
#include "cfgd/error.hpp"
#include "cfgd/rng.hpp"
#include "cfgd/training.hpp"

namespace cfgd {

struct NodeCountModel {
  int guide_dim = 0;
  int n_max = 0;
  int hidden = 64;
  TensorMap tensors;  // l0, l1, out (.w / .b)

  /// Probabilities over sizes; entry k is p(n = k + 1 | y).
  Eigen::VectorXd distribution(const Guide& y) const {
    if (static_cast<int>(y.dim()) != guide_dim) {
      throw Error(ErrorKind::DimensionMismatch, "node-count model expects a " + std::to_string(guide_dim) +
                                                    "-dimensional guide, got " + std::to_string(y.dim()));
    }
    Eigen::RowVectorXd x(guide_dim);
    for (int k = 0; k < guide_dim; ++k) x[k] = y.values[static_cast<std::size_t>(k)];
    Eigen::RowVectorXd h = ((x * tensors.at("l0.w")) + tensors.at("l0.b")).cwiseMax(0.0);
    h = ((h * tensors.at("l1.w")) + tensors.at("l1.b")).cwiseMax(0.0);
    const Eigen::MatrixXd logits = (h * tensors.at("out.w")) + tensors.at("out.b");
    return ad::softmax_rows(logits).row(0).transpose();
  }
};

struct NodeCountExample {
  Guide guide;
  int n = 1;
};

inline NodeCountModel init_nodecount(int guide_dim, int n_max, int hidden, std::uint64_t seed) {
  if (guide_dim < 0 || n_max < 1 || hidden < 1) throw Error(ErrorKind::InvalidArgument, "bad node-count model shape");
  NodeCountModel m{guide_dim, n_max, hidden, {}};
  Rng rng(seed);
  nn::add_linear(m.tensors, rng, "l0", guide_dim, hidden);
  nn::add_linear(m.tensors, rng, "l1", hidden, hidden);
  nn::add_linear(m.tensors, rng, "out", hidden, n_max);
  return m;
}

struct NodeCountTrainOptions {
  int hidden = 64;
  int epochs = 200;
  int batch_size = 64;
  double lr = 1e-2;
  std::uint64_t seed = 0;
};

inline NodeCountModel train_nodecount(const std::vector<NodeCountExample>& data, int n_max,
                                      const NodeCountTrainOptions& options) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "no node-count examples");
  const int d = static_cast<int>(data.front().guide.dim());
  for (const auto& ex : data) {
    if (ex.n < 1 || ex.n > n_max) throw Error(ErrorKind::InvalidArgument, "size " + std::to_string(ex.n) + " outside [1, n_max]");
    if (static_cast<int>(ex.guide.dim()) != d) throw Error(ErrorKind::DimensionMismatch, "inconsistent guide dimensions");
  }
  Rng rng(options.seed);
  NodeCountModel model = init_nodecount(d, n_max, options.hidden, rng());
  Amsgrad opt({.lr = options.lr, .weight_decay = 0.0});
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(std::max(1, options.batch_size));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(end - start), d);
      std::vector<int> target;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = data[order[k]];
        for (int c = 0; c < d; ++c) x(static_cast<Eigen::Index>(k - start), c) = ex.guide.values[static_cast<std::size_t>(c)];
        target.push_back(ex.n - 1);
      }
      ad::Tape tape;
      std::map<std::string, ad::Var> vars;
      for (const auto& [name, value] : model.tensors) vars.emplace(name, tape.leaf(value));
      ad::Var h = ad::relu(ad::linear(tape.constant(x), vars.at("l0.w"), vars.at("l0.b")));
      h = ad::relu(ad::linear(h, vars.at("l1.w"), vars.at("l1.b")));
      const ad::Var logits = ad::linear(h, vars.at("out.w"), vars.at("out.b"));
      const ad::Var loss = ad::weighted_cross_entropy(
          logits, target, std::vector<double>(target.size(), 1.0 / static_cast<double>(target.size())));
      if (!std::isfinite(loss.value()(0, 0))) {
        throw Error(ErrorKind::Diverged, "node-count loss is not finite in epoch " + std::to_string(epoch + 1));
      }
      tape.backward(loss);
      TensorMap grads;
      for (const auto& [name, var] : vars) grads[name] = tape.grad(var);
      opt.step(model.tensors, grads);
    }
  }
  return model;
}

inline int sample_node_count(const NodeCountModel& model, const Guide& y, Rng& rng) {
  const Eigen::VectorXd p = model.distribution(y);
  return 1 + static_cast<int>(sample_categorical(p, rng));
}

/// Fallback without a learned model: n ~ m_n.
inline int sample_node_count(const DatasetMarginals& marginals, Rng& rng) {
  return 1 + static_cast<int>(sample_categorical(marginals.m_n, rng));
}

inline std::vector<NodeCountExample> nodecount_examples(const GraphDataset& ds, Split which = Split::Train) {
  std::vector<NodeCountExample> out;
  for (std::size_t k : ds.indices(which)) out.push_back({ds.guides[k], static_cast<int>(ds.graphs[k].n())});
  return out;
}

}  // namespace cfgd

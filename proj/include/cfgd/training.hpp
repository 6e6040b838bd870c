// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Denoiser training with conditional dropout: each graph is noised at a
// uniformly drawn step, its guide is swapped for the placeholder with
// probability rho, and the weighted node/edge cross-entropy is minimized with
// AMSGrad and decoupled weight decay.

#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "cfgd/autodiff.hpp"
#include "cfgd/dataset.hpp"
#include "cfgd/denoiser.hpp"
#include "cfgd/diffusion.hpp"
#include "cfgd/error.hpp"
#include "cfgd/rng.hpp"
#include "cfgd/schedule.hpp"

namespace cfgd {

struct TrainingExample {
  CategoricalGraph clean;
  Guide guide;
};

/// A fully realized training draw: the noisy graph, its step, and whether the
/// guide was dropped. Fixing these makes the loss a deterministic function of
/// the parameters.
struct NoisedSample {
  CategoricalGraph clean;
  CategoricalGraph noisy;
  int t = 1;
  std::optional<Guide> guide;  // nullopt: placeholder
  std::uint64_t dropout_seed = 0;
};

inline NoisedSample draw_noised_sample(const TrainingExample& ex, const NoiseSchedule& schedule,
                                       const DatasetMarginals& marginals, double rho, Rng& rng) {
  NoisedSample s;
  s.clean = ex.clean;
  s.t = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(schedule.T())));
  s.noisy = forward_sample(ex.clean, s.t, schedule, marginals, rng);
  if (!rng.bernoulli(rho)) s.guide = ex.guide;
  s.dropout_seed = rng();
  return s;
}

namespace detail {

inline ad::Var sample_loss(BoundParams& bound, const DenoiserParams& params, const NoisedSample& s) {
  Rng dropout_rng(s.dropout_seed);
  const auto logits = denoiser_logits(bound, params, s.noisy, s.t, s.guide,
                                      params.config.dropout > 0.0 ? &dropout_rng : nullptr);
  const std::size_t n = s.clean.n();
  std::vector<int> node_targets(s.clean.nodes());
  const ad::Var node_ce = ad::weighted_cross_entropy(logits.node, node_targets, std::vector<double>(n, 1.0));
  std::vector<int> edge_targets(n * n);
  std::vector<double> edge_weights(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      edge_targets[i * n + j] = s.clean.edge(i, j);
      if (i != j) edge_weights[i * n + j] = params.config.gamma;
    }
  }
  if (n < 2 || params.config.gamma == 0.0) return node_ce;
  return ad::add(node_ce, ad::weighted_cross_entropy(logits.edge, edge_targets, edge_weights));
}

}  // namespace detail

struct LossAndGrad {
  double loss = 0.0;
  TensorMap grads;  // same keys as DenoiserParams::tensors
};

/// Mean loss over the samples and its exact gradient.
inline LossAndGrad loss_and_grad(const DenoiserParams& params, const std::vector<NoisedSample>& samples) {
  if (samples.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  LossAndGrad out;
  for (const auto& [name, value] : params.tensors) out.grads[name] = Eigen::MatrixXd::Zero(value.rows(), value.cols());
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    ad::Tape tape;
    BoundParams bound(tape, params, true);
    const ad::Var loss = detail::sample_loss(bound, params, s);
    tape.backward(loss);
    out.loss += loss.value()(0, 0) * inv;
    for (const auto& [name, var] : bound.vars()) out.grads[name] += tape.grad(var) * inv;
  }
  return out;
}

/// Mean loss only (used by finite-difference checks).
inline double batch_loss(const DenoiserParams& params, const std::vector<NoisedSample>& samples) {
  double total = 0.0;
  for (const auto& s : samples) {
    ad::Tape tape;
    BoundParams bound(tape, params, false);
    total += detail::sample_loss(bound, params, s).value()(0, 0);
  }
  return total / static_cast<double>(samples.size());
}

/// Draws the noise and dropout decisions for a batch, then differentiates.
inline LossAndGrad denoiser_grad(const DenoiserParams& params, const std::vector<TrainingExample>& batch,
                                 const NoiseSchedule& schedule, const DatasetMarginals& marginals, double rho,
                                 Rng& rng) {
  if (batch.empty()) throw Error(ErrorKind::EmptyDataset, "empty batch");
  std::vector<NoisedSample> samples;
  samples.reserve(batch.size());
  for (const auto& ex : batch) samples.push_back(draw_noised_sample(ex, schedule, marginals, rho, rng));
  return loss_and_grad(params, samples);
}

struct AmsgradConfig {
  double lr = 1e-3;
  double weight_decay = 1e-12;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AMSGrad with decoupled weight decay over a named tensor set.
class Amsgrad {
 public:
  explicit Amsgrad(AmsgradConfig cfg) : cfg_(cfg) {}

  void step(TensorMap& params, const TensorMap& grads) {
    ++steps_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (auto& [name, p] : params) {
      const auto& g = grads.at(name);
      auto& st = state_[name];
      if (st.m.size() == 0) {
        st.m = Eigen::MatrixXd::Zero(p.rows(), p.cols());
        st.v = st.m;
        st.v_max = st.m;
      }
      st.m = cfg_.beta1 * st.m + (1.0 - cfg_.beta1) * g;
      st.v = cfg_.beta2 * st.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
      st.v_max = st.v_max.cwiseMax(st.v);
      if (cfg_.lr == 0.0) continue;
      p *= 1.0 - cfg_.lr * cfg_.weight_decay;
      p.array() -= cfg_.lr * (st.m.array() / c1) / ((st.v_max.array() / c2).sqrt() + cfg_.eps);
    }
  }

 private:
  struct Moments {
    Eigen::MatrixXd m, v, v_max;
  };
  AmsgradConfig cfg_;
  long steps_ = 0;
  std::map<std::string, Moments> state_;
};

struct TrainOptions {
  int epochs = 10;
  int batch_size = 32;
  AmsgradConfig optimizer;
  std::uint64_t seed = 0;
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> loss_history;  // mean training loss per epoch
};

using EpochCallback = std::function<void(int epoch, double loss)>;

inline TrainResult train_denoiser(DenoiserParams params, const std::vector<TrainingExample>& data,
                                  const NoiseSchedule& schedule, const DatasetMarginals& marginals,
                                  const TrainOptions& options, const EpochCallback& on_epoch = {}) {
  if (data.empty()) throw Error(ErrorKind::EmptyDataset, "no training graphs");
  if (options.batch_size < 1 || options.epochs < 0) throw Error(ErrorKind::InvalidArgument, "bad batch size or epochs");
  Rng rng(options.seed);
  Amsgrad opt(options.optimizer);
  TrainResult result;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(options.batch_size);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.index(k)]);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<TrainingExample> chunk;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k) chunk.push_back(data[order[k]]);
      auto lg = denoiser_grad(params, chunk, schedule, marginals, params.config.rho, rng);
      if (!std::isfinite(lg.loss)) {
        throw Error(ErrorKind::Diverged, "non-finite loss in epoch " + std::to_string(epoch + 1));
      }
      opt.step(params.tensors, lg.grads);
      epoch_loss += lg.loss;
      ++batches;
    }
    epoch_loss /= static_cast<double>(batches);
    result.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch + 1, epoch_loss);
  }
  result.params = std::move(params);
  return result;
}

inline std::vector<TrainingExample> training_examples(const GraphDataset& ds, Split which = Split::Train) {
  std::vector<TrainingExample> out;
  for (std::size_t k : ds.indices(which)) out.push_back({ds.graphs[k], ds.guides[k]});
  return out;
}

}  // namespace cfgd

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "cfgd/smiles.hpp"
#include "cfgd/training.hpp"
#include "support.hpp"

namespace cfgd {
namespace {

using testing::random_graph;
using testing::random_guide;
using testing::random_permutation;
using testing::tiny_denoiser;

TEST(DenoiserConfig, Validation) {
  DenoiserConfig c;
  EXPECT_NO_THROW(c.validate());
  c.heads = 5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.rho = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.d_edge = 0;
  EXPECT_THROW(init_denoiser(c, {}, 0), Error);
}

TEST(Denoiser, PlaceholderHasGuideDimension) {
  const auto p = tiny_denoiser(1, 3);
  EXPECT_EQ(p.at("placeholder").rows(), 1);
  EXPECT_EQ(p.at("placeholder").cols(), 3);
}

TEST(Denoiser, OutputsNormalizedAndSymmetric) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = tiny_denoiser(static_cast<std::uint64_t>(trial));
    const auto g = random_graph(rng, 1 + rng.index(4), 4, 4);
    const auto y = trial % 2 ? std::optional<Guide>(random_guide(rng, 2)) : std::nullopt;
    const auto out = denoiser_forward(p, g, 1 + static_cast<int>(rng.index(10)), y);
    const auto n = static_cast<Eigen::Index>(g.n());
    EXPECT_LT((out.node_probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
    EXPECT_LT((out.edge_probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-6);
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_EQ(out.edge_probs(i * n + i, 0), 1.0);
      for (Eigen::Index j = 0; j < n; ++j) EXPECT_EQ(out.edge_probs.row(i * n + j), out.edge_probs.row(j * n + i));
    }
  }
}

TEST(Denoiser, PermutationEquivariant) {
  Rng rng(3);
  const auto p = testing::tiny_denoiser(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.index(4);
    const auto g = random_graph(rng, n, 4, 4);
    const auto perm = random_permutation(rng, n);
    const auto y = random_guide(rng, 2);
    const auto a = denoiser_forward(p, g, 3, y);
    const auto b = denoiser_forward(p, g.permuted(perm), 3, y);
    const auto ni = static_cast<Eigen::Index>(n);
    for (Eigen::Index i = 0; i < ni; ++i) {
      const auto pi = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
      EXPECT_LT((b.node_probs.row(i) - a.node_probs.row(pi)).cwiseAbs().maxCoeff(), 1e-6);
      for (Eigen::Index j = 0; j < ni; ++j) {
        const auto pj = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]);
        EXPECT_LT((b.edge_probs.row(i * ni + j) - a.edge_probs.row(pi * ni + pj)).cwiseAbs().maxCoeff(), 1e-6);
      }
    }
  }
}

TEST(Denoiser, ZeroOutputHeadsGiveUniform) {
  auto p = tiny_denoiser(5);
  for (const char* name : {"out_x.1.w", "out_x.1.b", "out_e.1.w", "out_e.1.b"}) p.tensors.at(name).setZero();
  Rng rng(6);
  const auto g = random_graph(rng, 4, 4, 4);
  const auto out = denoiser_forward(p, g, 2, random_guide(rng, 2));
  EXPECT_LT((out.node_probs.array() - 0.25).abs().maxCoeff(), 1e-15);
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      if (i != j) EXPECT_LT((out.edge_probs.row(i * 4 + j).array() - 0.25).abs().maxCoeff(), 1e-15);
}

TEST(Denoiser, Pure) {
  const auto p = tiny_denoiser(7);
  Rng rng(8);
  const auto g = random_graph(rng, 4, 4, 4);
  const auto y = random_guide(rng, 2);
  const auto a = denoiser_forward(p, g, 4, y);
  const auto b = denoiser_forward(p, g, 4, y);
  EXPECT_EQ(a.node_probs, b.node_probs);
  EXPECT_EQ(a.edge_probs, b.edge_probs);
}

TEST(Denoiser, GuideAndPlaceholderDiffer) {
  const auto p = tiny_denoiser(9);
  Rng rng(10);
  const auto g = random_graph(rng, 3, 4, 4);
  EXPECT_NE(denoiser_forward(p, g, 4, random_guide(rng, 2)).node_probs, denoiser_forward(p, g, 4, std::nullopt).node_probs);
}

TEST(Denoiser, ShapeMismatch) {
  const auto p = tiny_denoiser(11);
  for (auto call : std::vector<std::function<void()>>{
           [&] { denoiser_forward(p, CategoricalGraph(3, 4, {0, 1}), 1, std::nullopt); },
           [&] { denoiser_forward(p, CategoricalGraph(4, 4, {0, 1}), 1, Guide{{1.0}}); }}) {
    try {
      call();
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
    }
  }
}

TEST(Loss, Examples) {
  const CategoricalGraph g(4, 2, {0, 3});
  DenoiserOutput uniform{Eigen::MatrixXd::Constant(2, 4, 0.25), Eigen::MatrixXd::Constant(4, 2, 0.5)};
  EXPECT_NEAR(denoising_loss(uniform, g, 2.0), 2 * std::log(4.0) + 4 * std::log(2.0), 1e-14);
  EXPECT_NEAR(denoising_loss(uniform, g, 0.0), 2 * std::log(4.0), 1e-14);

  DenoiserOutput exact{g.X(), g.E()};
  EXPECT_EQ(denoising_loss(exact, g, 2.0), 0.0);
  // A missed type costs the clamp, not infinity.
  DenoiserOutput wrong{CategoricalGraph(4, 2, {1, 1}).X(), g.E()};
  EXPECT_NEAR(denoising_loss(wrong, g, 2.0), -2.0 * std::log(1e-12), 1e-9);
  EXPECT_THROW(denoising_loss(uniform, CategoricalGraph(4, 2, {0}), 1.0), Error);
}

TEST(Loss, NonNegativeOnRandomPredictions) {
  Rng rng(12);
  const auto p = tiny_denoiser(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_graph(rng, 1 + rng.index(4), 4, 4);
    EXPECT_GT(denoising_loss(denoiser_forward(p, random_graph(rng, g.n(), 4, 4), 2, std::nullopt), g, 2.0), 0.0);
  }
}

TEST(Loss, TrainingLossMatchesProbabilityLoss) {
  Rng rng(14);
  const auto p = tiny_denoiser(15);
  const auto samples = testing::gradient_samples(16);
  for (const auto& s : samples) {
    const double direct = denoising_loss(denoiser_forward(p, s.noisy, s.t, s.guide), s.clean, p.config.gamma);
    EXPECT_NEAR(batch_loss(p, {s}), direct, 1e-9);
  }
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1, 2}) {
    const auto p = tiny_denoiser(seed);
    const auto errors = testing::gradient_errors(p, testing::gradient_samples(seed + 100));
    EXPECT_EQ(errors.size(), p.tensors.size());
    for (const auto& [name, err] : errors) EXPECT_LT(err, 1e-4) << name;
  }
}

TEST(Gradient, DropoutLayersStillDifferentiable) {
  auto p = tiny_denoiser(3);
  p.config.dropout = 0.3;
  auto samples = testing::gradient_samples(4);
  for (std::size_t k = 0; k < samples.size(); ++k) samples[k].dropout_seed = 1000 + k;
  for (const auto& [name, err] : testing::gradient_errors(p, samples)) EXPECT_LT(err, 1e-4) << name;
}

DatasetMarginals toy_marginals() {
  DatasetMarginals m;
  m.m_X = Eigen::Vector4d(0.5, 0.2, 0.2, 0.1);
  m.m_E = Eigen::Vector4d(0.7, 0.2, 0.08, 0.02);
  m.m_n = Eigen::Vector4d::Constant(0.25);
  return m;
}

std::vector<TrainingExample> toy_batch(Rng& rng, std::size_t count) {
  std::vector<TrainingExample> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back({random_graph(rng, 1 + rng.index(4), 4, 4), random_guide(rng, 2)});
  return out;
}

TEST(Gradient, AllDroppedIgnoresGuideValues) {
  const auto p = tiny_denoiser(17);
  const auto s = cosine_schedule(10);
  Rng data_rng(18);
  auto batch = toy_batch(data_rng, 6);
  auto shifted = batch;
  for (auto& ex : shifted)
    for (auto& v : ex.guide.values) v += 7.0;
  Rng a(19), b(19), c(19);
  const auto ga = denoiser_grad(p, batch, s, toy_marginals(), 1.0, a);
  const auto gb = denoiser_grad(p, shifted, s, toy_marginals(), 1.0, b);
  EXPECT_EQ(ga.loss, gb.loss);
  for (const auto& [name, g] : ga.grads) EXPECT_EQ(g, gb.grads.at(name)) << name;
  EXPECT_GT(ga.grads.at("placeholder").cwiseAbs().maxCoeff(), 0.0);
  // Without dropping, the guide values reach the gradient.
  const auto gc = denoiser_grad(p, shifted, s, toy_marginals(), 0.0, c);
  EXPECT_NE(gc.grads.at("guide.w"), ga.grads.at("guide.w"));
}

TEST(Gradient, NeverDroppedLeavesPlaceholder) {
  const auto p = tiny_denoiser(20);
  Rng data_rng(21), rng(22);
  const auto g = denoiser_grad(p, toy_batch(data_rng, 6), cosine_schedule(10), toy_marginals(), 0.0, rng);
  EXPECT_EQ(g.grads.at("placeholder").cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(g.grads.at("guide.w").cwiseAbs().maxCoeff(), 0.0);
}

TEST(Training, MemorizesSingleGraph) {
  // An equivariant model cannot tell nodes apart in a fully noised input, so
  // only a graph whose nodes and pairs are all alike can be fit to zero loss.
  const auto v = qm9_vocab();
  const auto g = smiles_to_graph("C1CC1", v);
  const std::vector<TrainingExample> data{{g, Guide{{0.0}}}};
  const auto m = compute_marginals(std::vector<CategoricalGraph>{g, smiles_to_graph("C#CO", v)});
  DenoiserConfig c;
  c.layers = 1;
  c.d_node = 16;
  c.d_edge = 8;
  c.d_global = 8;
  c.heads = 2;
  c.d_guide = 4;
  c.rho = 0.0;
  const auto schedule = cosine_schedule(10);
  TrainOptions opt;
  opt.epochs = 500;
  opt.batch_size = 1;
  opt.optimizer.lr = 1e-2;
  opt.seed = 3;
  const auto result = train_denoiser(init_denoiser(c, {4, 4, 1, static_cast<int>(m.n_max()), 10}, 4), data, schedule, m, opt);
  ASSERT_EQ(result.loss_history.size(), 500u);
  double initial = 0.0, final = 0.0;
  for (int k = 0; k < 10; ++k) initial += result.loss_history[static_cast<std::size_t>(k)] / 10.0;
  for (int k = 490; k < 500; ++k) final += result.loss_history[static_cast<std::size_t>(k)] / 10.0;
  EXPECT_LT(final, 0.1 * initial) << "initial " << initial << " final " << final;
}

TEST(Training, DeterministicGivenSeed) {
  Rng data_rng(23);
  const auto data = toy_batch(data_rng, 8);
  TrainOptions opt;
  opt.epochs = 3;
  opt.batch_size = 4;
  opt.seed = 9;
  const auto p = tiny_denoiser(24);
  const auto a = train_denoiser(p, data, cosine_schedule(10), toy_marginals(), opt);
  const auto b = train_denoiser(p, data, cosine_schedule(10), toy_marginals(), opt);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_EQ(a.params.tensors, b.params.tensors);
  EXPECT_NE(a.params.tensors, p.tensors);
}

TEST(Training, ZeroLearningRateIsNoOp) {
  // Marginals concentrated on the graph's own types and a single step: the
  // noisy input never changes, so the loss can only move if params do.
  const auto v = qm9_vocab();
  const auto g = smiles_to_graph("C.C", v);
  const auto m = compute_marginals(std::vector<CategoricalGraph>{g});
  auto c = tiny_denoiser(25, 1).config;
  c.rho = 0.0;
  const auto p = init_denoiser(c, {4, 4, 1, 2, 1}, 26);
  TrainOptions opt;
  opt.epochs = 5;
  opt.batch_size = 1;
  opt.optimizer.lr = 0.0;
  const auto r = train_denoiser(p, {{g, Guide{{0.5}}}}, cosine_schedule(1), m, opt);
  EXPECT_EQ(r.params.tensors, p.tensors);
  for (double l : r.loss_history) EXPECT_EQ(l, r.loss_history.front());
}

TEST(Training, DivergenceReported) {
  auto p = tiny_denoiser(27);
  p.tensors.at("in_x.0.w")(0, 0) = std::nan("");
  Rng data_rng(28);
  TrainOptions opt;
  opt.epochs = 1;
  try {
    train_denoiser(p, toy_batch(data_rng, 2), cosine_schedule(10), toy_marginals(), opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Diverged);
  }
}

}  // namespace
}  // namespace cfgd

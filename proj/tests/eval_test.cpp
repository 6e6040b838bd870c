// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "cfgd/eval.hpp"
#include "cfgd/nodecount.hpp"
#include "support.hpp"

namespace cfgd {
namespace {

TEST(Mae, HandComputedExample) {
  const auto r = mae({{1.0}}, {{{1.5}, {0.5}}}, {{true, true}});
  EXPECT_EQ(r.total, 0.5);
  EXPECT_EQ(r.per_property[0], 0.5);
  EXPECT_EQ(r.count, 2u);
}

TEST(Mae, PerfectConditioning) {
  const std::vector<std::vector<double>> t = {{1.0, 2.0}, {3.0, -1.0}};
  const auto r = mae(t, {{t[0], t[0]}, {t[1], t[1]}}, {{true, true}, {true, true}});
  EXPECT_EQ(r.total, 0.0);
  EXPECT_EQ(r.stderr_, 0.0);
}

TEST(Mae, ProtocolDenominator) {
  Rng rng(1);
  std::vector<std::vector<double>> targets(100);
  std::vector<std::vector<std::vector<double>>> gen(100);
  std::vector<std::vector<bool>> valid(100, std::vector<bool>(10, true));
  double sum = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    targets[i] = {rng.uniform(0.0, 10.0)};
    for (int j = 0; j < 10; ++j) {
      gen[i].push_back({rng.uniform(0.0, 10.0)});
      sum += std::abs(targets[i][0] - gen[i].back()[0]);
    }
  }
  const auto r = mae(targets, gen, valid);
  EXPECT_EQ(r.count, 1000u);
  EXPECT_NEAR(r.total, sum / 1000.0, 1e-12);
}

TEST(Mae, InvalidSamplesExcluded) {
  const auto all = mae({{0.0, 0.0}}, {{{1.0, 3.0}, {100.0, 100.0}, {2.0, 1.0}}}, {{true, false, true}});
  EXPECT_EQ(all.count, 2u);
  EXPECT_EQ(all.per_property, (std::vector<double>{1.5, 2.0}));
  EXPECT_EQ(all.total, 1.75);
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<bool>> mask(3, std::vector<bool>(4, true));
    std::vector<std::vector<bool>> fewer = mask;
    std::size_t kept = 12;
    for (auto& row : fewer)
      for (std::size_t j = 0; j < row.size(); ++j)
        if (rng.bernoulli(0.3) && kept > 1) {
          row[j] = false;
          --kept;
        }
    std::vector<std::vector<std::vector<double>>> gen(3, std::vector<std::vector<double>>(4, {1.0}));
    const auto a = mae({{0.0}, {0.0}, {0.0}}, gen, mask);
    const auto b = mae({{0.0}, {0.0}, {0.0}}, gen, fewer);
    EXPECT_LE(b.count, a.count);
    EXPECT_EQ(b.count, kept);
  }
}

TEST(Mae, StderrAcrossReferences) {
  // Per-reference means 1 and 3: sample sd sqrt(2), stderr 1.
  const auto r = mae({{0.0}, {0.0}}, {{{1.0}, {1.0}}, {{2.0}, {4.0}}}, {{true, true}, {true, true}});
  EXPECT_NEAR(r.stderr_, 1.0, 1e-15);
  EXPECT_EQ(r.total, 2.0);
}

TEST(Mae, SelfIsZero) {
  Rng rng(3);
  std::vector<std::vector<double>> t;
  std::vector<std::vector<std::vector<double>>> gen;
  for (int i = 0; i < 10; ++i) {
    t.push_back({rng.normal(), rng.normal(), rng.normal()});
    gen.push_back({t.back()});
  }
  EXPECT_EQ(mae(t, gen, std::vector<std::vector<bool>>(10, {true})).total, 0.0);
}

TEST(Mae, Errors) {
  try {
    mae({{1.0}}, {{{2.0}}}, {{false}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoValidSamples);
  }
  EXPECT_THROW(mae({}, {}, {}), Error);
  EXPECT_THROW(mae({{1.0}}, {{{2.0}}}, {{true, true}}), Error);
}

TEST(Report, SerializationRoundTrip) {
  EvalReport r;
  r.property_names = {"mw", "hetero_fraction"};
  r.mae_per_property = {0.1 + 0.2, 1.0 / 3.0};
  r.mae = 0.31666666666666665;
  r.mae_stderr = 0.012345678901234567;
  r.validity = 0.7;
  r.uniqueness = 2.0 / 3.0;
  r.samples = 10;
  r.valid_samples = 7;
  r.records = {{{1.0, 0.25}, {1.5, 1.0 / 7.0}, true, "CCO"}, {{2.0, 0.0}, {0.0, 0.0}, false, "C.C"}};
  std::stringstream summary, records;
  write_summary(summary, r);
  write_records(records, r.records);
  EvalReport back = read_summary(summary);
  back.records = read_records(records);
  EXPECT_EQ(back, r);
}

TEST(RunBenchmark, ReproducibleAndComplete) {
  const auto task = testing::synthetic_task(60, 1, 0.5);
  const auto schedule = cosine_schedule(10);
  const UniformDenoiser den{4, 4};
  const BenchmarkSetup setup{&task.vocab, task.properties, &schedule, &task.marginals, &task.dataset.standardization,
                             nullptr};
  BenchmarkOptions opt;
  opt.K = 2;
  opt.R = 1;
  opt.seed = 5;
  const auto a = run_benchmark(den, setup, task.test_properties, opt);
  const auto b = run_benchmark(den, setup, task.test_properties, opt);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.samples, 2u);
  ASSERT_EQ(a.records.size(), 2u);
  for (const auto& rec : a.records) EXPECT_EQ(rec.achieved.size(), 2u);
  opt.seed = 6;
  opt.K = 5;
  opt.R = 3;
  const auto c = run_benchmark(den, setup, task.test_properties, opt);
  EXPECT_EQ(c.records.size(), 15u);
  EXPECT_GE(c.validity, 0.0);
  EXPECT_LE(c.validity, 1.0);
  EXPECT_LE(c.uniqueness, 1.0);
  // K references drawn without replacement.
  std::set<std::vector<double>> distinct_targets;
  for (std::size_t k = 0; k < c.records.size(); k += 3) distinct_targets.insert(c.records[k].target);
  EXPECT_LE(distinct_targets.size(), 5u);
}

TEST(RunBenchmark, Preconditions) {
  const auto task = testing::synthetic_task(40, 2, 0.25);
  const auto schedule = cosine_schedule(5);
  const BenchmarkSetup setup{&task.vocab, task.properties, &schedule, &task.marginals, &task.dataset.standardization,
                             nullptr};
  BenchmarkOptions opt;
  opt.K = task.test_properties.size() + 1;
  opt.R = 1;
  EXPECT_THROW(run_benchmark(UniformDenoiser{4, 4}, setup, task.test_properties, opt), Error);
  opt.K = 1;
  opt.size_mode = SizeMode::Inferred;
  EXPECT_THROW(run_benchmark(UniformDenoiser{4, 4}, setup, task.test_properties, opt), Error);
}

TEST(RunBenchmark, TrainedBeatsUniform) {
  const auto task = testing::synthetic_task(400, 3, 0.1);
  const auto schedule = cosine_schedule(20);
  DenoiserConfig c;
  c.layers = 1;
  c.d_node = 16;
  c.d_edge = 8;
  c.d_global = 8;
  c.heads = 2;
  c.d_guide = 8;
  const DenoiserDims dims{4, 4, 2, static_cast<int>(task.marginals.n_max()), 20};
  TrainOptions opt;
  opt.epochs = 15;
  opt.batch_size = 16;
  opt.optimizer.lr = 3e-3;
  opt.seed = 4;
  const auto trained = train_denoiser(init_denoiser(c, dims, 5), testing::training_examples_of(task), schedule,
                                      task.marginals, opt);
  const BenchmarkSetup setup{&task.vocab, task.properties, &schedule, &task.marginals, &task.dataset.standardization,
                             nullptr};
  BenchmarkOptions bo;
  bo.K = 30;
  bo.R = 4;
  bo.seed = 6;
  const auto uniform = run_benchmark(UniformDenoiser{4, 4}, setup, task.test_properties, bo);
  const auto learned = run_benchmark(GraphTransformerDenoiser(trained.params), setup, task.test_properties, bo);
  EXPECT_LT(learned.mae, uniform.mae) << learned.mae << " vs " << uniform.mae;
  EXPECT_GT(learned.validity, uniform.validity);
}

}  // namespace
}  // namespace cfgd

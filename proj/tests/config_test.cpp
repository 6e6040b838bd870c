// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "cfgd/config.hpp"

namespace cfgd {
namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    return e.what();
  }
  ADD_FAILURE() << "no error for:\n" << text;
  return {};
}

TEST(RunConfig, ParsesKeysAndComments) {
  const auto c = parse(
      "# comment\n"
      "dataset.path = data/x.smi\n"
      "dataset.properties = mw, heavy_atom_count\n"
      "\n"
      "diffusion.T = 20\n"
      "denoiser.layers = 2\n"
      "train.rho = 0.2\n"
      "train.lr = 2.5e-4\n"
      "nodecount.enabled = false\n"
      "sample.s = 3\n"
      "sample.mode = log\n"
      "sample.size = marginal\n"
      "eval.k = 7\n"
      "seed = 42\n");
  EXPECT_EQ(c.dataset_path, "data/x.smi");
  EXPECT_EQ(c.properties, (std::vector<PropertyId>{PropertyId::MolecularWeight, PropertyId::HeavyAtomCount}));
  EXPECT_EQ(c.T, 20);
  EXPECT_EQ(c.denoiser.layers, 2);
  EXPECT_EQ(c.denoiser.rho, 0.2);
  EXPECT_EQ(c.lr, 2.5e-4);
  EXPECT_FALSE(c.nodecount_enabled);
  EXPECT_EQ(c.guidance_s, 3.0);
  EXPECT_EQ(c.guidance_mode, GuidanceMode::Log);
  EXPECT_EQ(c.size_mode, SizeMode::Marginal);
  EXPECT_EQ(c.eval_k, 7);
  EXPECT_EQ(c.eval_r, 10);
  EXPECT_EQ(c.seed, 42u);
}

TEST(RunConfig, ErrorsNameTheKey) {
  EXPECT_NE(error_of("dataset.path = a\ntrain.rho = 1.5\n").find("train.rho"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\ntrain.rhoo = 0.1\n").find("train.rhoo"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\ndiffusion.T = ten\n").find("diffusion.T"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\ndenoiser.heads = 3\n").find("denoiser.heads"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\nsample.s = -1\n").find("sample.s"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\nsample.mode = cubic\n").find("sample.mode"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\ndataset.properties = mw, logp\n").find("dataset.properties"),
            std::string::npos);
  EXPECT_NE(error_of("train.rho = 0.1\n").find("dataset.path"), std::string::npos);
  EXPECT_NE(error_of("dataset.path = a\njust words\n").find("line 2"), std::string::npos);
}

TEST(RunConfig, EffectiveEchoRoundTrips) {
  auto c = parse("dataset.path = d.smi\ntrain.lr = 0.1\ntrain.rho = 0.3\nsample.mode = log\nseed = 9\n");
  c.schedule_offset = 1.0 / 3.0;
  std::stringstream first;
  write_run_config(first, c);
  const auto back = parse(first.str());
  std::stringstream second;
  write_run_config(second, back);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(back.schedule_offset, 1.0 / 3.0);
  EXPECT_EQ(back.lr, 0.1);
  // Sorted, one key per line.
  std::vector<std::string> lines;
  for (std::string l; std::getline(second, l);) lines.push_back(l.substr(0, l.find(' ')));
  EXPECT_TRUE(std::is_sorted(lines.begin(), lines.end()));
  EXPECT_EQ(std::adjacent_find(lines.begin(), lines.end()), lines.end());
}

TEST(RunConfig, DefaultsValidateOnceDatasetIsSet) {
  RunConfig c;
  EXPECT_THROW(validate(c), Error);
  c.dataset_path = "x";
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.denoiser.rho, 0.1);
}

}  // namespace
}  // namespace cfgd

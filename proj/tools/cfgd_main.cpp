// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include "cfgd/cli.hpp"

namespace {

cfgd::GuidanceMode to_mode(const std::string& s) { return s == "log" ? cfgd::GuidanceMode::Log : cfgd::GuidanceMode::Linear; }

std::optional<cfgd::SizeMode> to_size(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return cfgd::parse_size_mode(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Classifier-free guided discrete graph diffusion for molecules"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "Train a denoiser and node-count model from a config file");
  train->add_option("config", config_path, "Config file (key = value)")->required();

  cfgd::cli::SampleArgs sa;
  std::string sample_mode = "linear", sample_size;
  auto* sample = app.add_subcommand("sample", "Generate molecules for a property target");
  sample->add_option("checkpoint", sa.checkpoint)->required();
  sample->add_option("--guide", sa.guide, "Target property values, comma separated")->delimiter(',');
  sample->add_flag("--unconditional", sa.unconditional, "Use the placeholder guide only");
  sample->add_option("--count", sa.count)->default_val(1);
  sample->add_option("--s", sa.s, "Guidance weight")->default_val(1.0);
  sample->add_option("--mode", sample_mode)->check(CLI::IsMember({"linear", "log"}));
  sample->add_option("--size", sample_size)->check(CLI::IsMember({"marginal", "inferred"}));
  sample->add_option("--seed", sa.seed)->default_val(0);
  sample->add_option("--out", sa.out, "Output file (stdout when omitted)");

  cfgd::cli::EvalArgs ea;
  std::string eval_mode = "linear", eval_size;
  auto* eval = app.add_subcommand("eval", "Score conditioning error against reference molecules");
  eval->add_option("checkpoint", ea.checkpoint)->required();
  eval->add_option("dataset", ea.dataset, "Reference molecules (SMILES<TAB>properties)")->required();
  eval->add_option("--k", ea.k)->default_val(100);
  eval->add_option("--r", ea.r)->default_val(10);
  eval->add_option("--s", ea.s)->default_val(1.0);
  eval->add_option("--mode", eval_mode)->check(CLI::IsMember({"linear", "log"}));
  eval->add_option("--size", eval_size)->check(CLI::IsMember({"marginal", "inferred"}));
  eval->add_flag("--unconditional", ea.unconditional, "Use the placeholder guide only");
  eval->add_option("--seed", ea.seed)->default_val(0);
  eval->add_option("--out", ea.out)->default_val("eval");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cfgd::cli::kConfigError;
  }

  if (train->parsed()) return cfgd::cli::cmd_train(config_path);
  if (sample->parsed()) {
    sa.mode = to_mode(sample_mode);
    sa.size = to_size(sample_size);
    return cfgd::cli::cmd_sample(sa);
  }
  ea.mode = to_mode(eval_mode);
  ea.size = to_size(eval_size);
  return cfgd::cli::cmd_eval(ea);
}

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Batch commands behind the `cfgd` executable. Each returns a process exit
// code and reports problems on the given error stream.

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cfgd/checkpoint.hpp"
#include "cfgd/config.hpp"
#include "cfgd/dataset.hpp"
#include "cfgd/eval.hpp"
#include "cfgd/nodecount.hpp"
#include "cfgd/training.hpp"

namespace cfgd::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kDatasetError = 2,
  kDiverged = 3,
  kCheckpointError = 4,
  kDimensionMismatch = 5,
  kTooFewReferences = 6,
};

inline constexpr const char* kCheckpointFile = "checkpoint.fgckpt";
inline constexpr const char* kLossLogFile = "loss.log";
inline constexpr const char* kConfigEchoFile = "config.effective";
inline constexpr const char* kTestSplitFile = "test.tsv";
inline constexpr const char* kReportFile = "report.txt";
inline constexpr const char* kRecordsFile = "records.tsv";

/// Fills in missing property columns from the molecule itself and checks
/// the width of the ones that are present.
inline void resolve_properties(std::vector<DatasetRecord>& records, const Vocab& vocab,
                               const std::vector<PropertyId>& props) {
  for (std::size_t k = 0; k < records.size(); ++k) {
    auto& r = records[k];
    if (r.properties.empty()) {
      try {
        r.properties = graph_properties(smiles_to_graph(r.smiles, vocab), vocab, props);
      } catch (const Error& e) {
        throw Error(ErrorKind::DatasetError, "record " + std::to_string(k + 1) + ": " + e.what());
      }
    } else if (r.properties.size() != props.size()) {
      throw Error(ErrorKind::DatasetError, "record " + std::to_string(k + 1) + " has " +
                                               std::to_string(r.properties.size()) + " property values, expected " +
                                               std::to_string(props.size()));
    }
  }
}

namespace detail {

inline bool is_dataset_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::DatasetError:
    case ErrorKind::EmptyDataset:
    case ErrorKind::UnknownLabel:
    case ErrorKind::DuplicateBond:
    case ErrorKind::SelfLoop:
    case ErrorKind::UnbalancedParenthesis:
    case ErrorKind::UnclosedRing:
    case ErrorKind::UnknownAtom:
    case ErrorKind::BondConflict:
    case ErrorKind::EmptyInput:
    case ErrorKind::SyntaxError:
      return true;
    default:
      return false;
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace detail

inline int cmd_train(const std::string& config_path, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  }

  const Vocab vocab = vocab_by_name(cfg.vocab);
  GraphDataset ds;
  DatasetMarginals marginals;
  std::vector<DatasetRecord> records;
  try {
    records = read_dataset_file(cfg.dataset_path);
    resolve_properties(records, vocab, cfg.properties);
    ds = build_dataset(records, vocab, {cfg.validation_fraction, cfg.test_fraction}, Rng::stream(cfg.seed, "split")());
    marginals = compute_marginals(ds);
  } catch (const Error& e) {
    err << "dataset error: " << e.what() << '\n';
    return kDatasetError;
  }

  const std::filesystem::path out_dir(cfg.output_dir);
  std::filesystem::create_directories(out_dir);
  {
    std::ostringstream echo;
    write_run_config(echo, cfg);
    detail::write_text(out_dir / kConfigEchoFile, echo.str());
    std::ofstream test(out_dir / kTestSplitFile, std::ios::binary);
    std::vector<DatasetRecord> held_out;
    for (std::size_t k : ds.indices(Split::Test)) held_out.push_back(records[k]);
    write_dataset_records(test, held_out);
  }

  const NoiseSchedule schedule = cosine_schedule(cfg.T, cfg.schedule_offset);
  const DenoiserDims dims{static_cast<int>(vocab.atoms.size()), static_cast<int>(vocab.bonds.size()),
                          static_cast<int>(cfg.properties.size()), static_cast<int>(marginals.n_max()), cfg.T};
  Checkpoint ck;
  ck.vocab_name = cfg.vocab;
  ck.properties = cfg.properties;
  ck.schedule = schedule;
  ck.marginals = marginals;
  ck.standardization = ds.standardization;
  ck.rho_trained = cfg.denoiser.rho;

  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.batch_size = cfg.batch_size;
  opt.optimizer.lr = cfg.lr;
  opt.optimizer.weight_decay = cfg.weight_decay;
  opt.seed = Rng::stream(cfg.seed, "train")();
  std::ofstream loss_log(out_dir / kLossLogFile, std::ios::binary);
  try {
    auto params = init_denoiser(cfg.denoiser, dims, Rng::stream(cfg.seed, "init")());
    auto result = train_denoiser(std::move(params), training_examples(ds), schedule, marginals, opt,
                                 [&](int epoch, double loss) {
                                   loss_log << epoch << '\t' << cfgd::detail::fmt17(loss) << '\n';
                                   loss_log.flush();
                                   log << "epoch " << epoch << " loss " << loss << '\n';
                                 });
    ck.denoiser = std::move(result.params);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Diverged) {
      err << "training diverged: " << e.what() << '\n';
      return kDiverged;
    }
    err << "training error: " << e.what() << '\n';
    return kDatasetError;
  }

  if (cfg.nodecount_enabled) {
    NodeCountTrainOptions nopt{cfg.nodecount_hidden, cfg.nodecount_epochs, cfg.nodecount_batch_size, cfg.nodecount_lr,
                               Rng::stream(cfg.seed, "nodecount")()};
    ck.nodecount = train_nodecount(nodecount_examples(ds), static_cast<int>(marginals.n_max()), nopt);
  }

  try {
    save_checkpoint(ck, (out_dir / kCheckpointFile).string());
  } catch (const Error& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  }
  log << "wrote " << (out_dir / kCheckpointFile).string() << '\n';
  return kOk;
}

struct SampleArgs {
  std::string checkpoint;
  std::vector<double> guide;  // raw property values
  bool unconditional = false; // placeholder only; guide ignored
  std::size_t count = 1;
  double s = 1.0;
  GuidanceMode mode = GuidanceMode::Linear;
  std::optional<SizeMode> size;  // default: inferred when the checkpoint has a node-count model
  std::uint64_t seed = 0;
  std::string out;
};

inline int load_for_use(const std::string& path, Checkpoint& ck, std::ostream& err) {
  try {
    ck = load_checkpoint(path);
  } catch (const Error& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  }
  return kOk;
}

inline std::optional<SizeMode> resolve_size(const Checkpoint& ck, std::optional<SizeMode> requested, std::ostream& err) {
  const SizeMode m = requested.value_or(ck.nodecount ? SizeMode::Inferred : SizeMode::Marginal);
  if (m == SizeMode::Inferred && !ck.nodecount) {
    err << "config error: inferred size mode needs a checkpoint with a node-count model\n";
    return std::nullopt;
  }
  return m;
}

/// Writes one line per sample: SMILES<TAB>p1,p2,...<TAB>valid(0|1).
inline int cmd_sample(const SampleArgs& a, std::ostream& err = std::cerr) {
  Checkpoint ck;
  if (int rc = load_for_use(a.checkpoint, ck, err); rc != kOk) return rc;
  if (a.s < 0.0) {
    err << "config error: --s must be >= 0\n";
    return kConfigError;
  }
  std::optional<Guide> guide;
  if (!a.unconditional) {
    if (a.guide.size() != ck.properties.size()) {
      err << "dimension mismatch: guide has " << a.guide.size() << " values, checkpoint expects "
          << ck.properties.size() << '\n';
      return kDimensionMismatch;
    }
    guide = ck.standardization.apply(a.guide);
  }
  const auto size = resolve_size(ck, a.size, err);
  if (!size) return kConfigError;

  const Vocab vocab = vocab_by_name(ck.vocab_name);
  const GraphTransformerDenoiser denoiser(ck.denoiser);
  const GuidanceConfig gcfg{a.s, a.mode, ck.rho_trained};
  const std::uint64_t root = Rng::stream(a.seed, "sample")();
  std::ostringstream text;
  for (std::size_t k = 0; k < a.count; ++k) {
    Rng rng = Rng::substream(root, k);
    // The size model needs a guide; unconditional runs fall back to m_n.
    const int n = (*size == SizeMode::Inferred && guide) ? sample_node_count(*ck.nodecount, *guide, rng)
                                                         : sample_node_count(ck.marginals, rng);
    const CategoricalGraph g = sample(denoiser, guide, static_cast<std::size_t>(n), gcfg, ck.schedule, ck.marginals, rng);
    text << write_smiles(g, vocab) << '\t' << cfgd::detail::join_values(graph_properties(g, vocab, ck.properties)) << '\t'
         << (check_valence(g, vocab).valid ? 1 : 0) << '\n';
  }
  if (a.out.empty() || a.out == "-") {
    std::cout << text.str();
  } else {
    detail::write_text(a.out, text.str());
  }
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;  // every record is a reference candidate
  std::size_t k = 100;
  std::size_t r = 10;
  double s = 1.0;
  GuidanceMode mode = GuidanceMode::Linear;
  std::optional<SizeMode> size;
  bool unconditional = false;
  std::uint64_t seed = 0;
  std::string out = "eval";
};

/// Writes report.txt (key<TAB>value summary) and records.tsv.
inline int cmd_eval(const EvalArgs& a, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  Checkpoint ck;
  if (int rc = load_for_use(a.checkpoint, ck, err); rc != kOk) return rc;
  if (a.s < 0.0 || a.k < 1 || a.r < 1) {
    err << "config error: need --s >= 0, --k >= 1, --r >= 1\n";
    return kConfigError;
  }
  const auto size = resolve_size(ck, a.size, err);
  if (!size) return kConfigError;
  const Vocab vocab = vocab_by_name(ck.vocab_name);

  std::vector<std::vector<double>> references;
  try {
    auto records = read_dataset_file(a.dataset);
    if (!records.empty() && !records.front().properties.empty() &&
        records.front().properties.size() != ck.properties.size()) {
      err << "dimension mismatch: dataset has " << records.front().properties.size()
          << " property columns, checkpoint expects " << ck.properties.size() << '\n';
      return kDimensionMismatch;
    }
    resolve_properties(records, vocab, ck.properties);
    for (auto& r : records) references.push_back(std::move(r.properties));
  } catch (const Error& e) {
    err << "dataset error: " << e.what() << '\n';
    return kDatasetError;
  }
  if (a.k > references.size()) {
    err << "K = " << a.k << " exceeds the " << references.size() << " molecules in " << a.dataset << '\n';
    return kTooFewReferences;
  }

  const BenchmarkSetup setup{&vocab, ck.properties, &ck.schedule, &ck.marginals, &ck.standardization,
                             ck.nodecount ? &*ck.nodecount : nullptr};
  BenchmarkOptions opt;
  opt.K = a.k;
  opt.R = a.r;
  opt.guidance = {a.s, a.mode, ck.rho_trained};
  opt.size_mode = *size;
  opt.seed = Rng::stream(a.seed, "eval")();
  opt.unconditional = a.unconditional;
  const EvalReport report = run_benchmark(GraphTransformerDenoiser(ck.denoiser), setup, references, opt);

  const std::filesystem::path dir(a.out);
  std::filesystem::create_directories(dir);
  std::ostringstream summary, records;
  write_summary(summary, report);
  write_records(records, report.records);
  detail::write_text(dir / kReportFile, summary.str());
  detail::write_text(dir / kRecordsFile, records.str());
  log << summary.str();
  return kOk;
}

}  // namespace cfgd::cli

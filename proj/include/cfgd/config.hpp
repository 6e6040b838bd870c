// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: flat `key = value` text, `#` comment lines, dotted
// section prefixes (e.g. `denoiser.layers = 2`).

#pragma once

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cfgd/denoiser.hpp"
#include "cfgd/diffusion.hpp"
#include "cfgd/error.hpp"
#include "cfgd/eval.hpp"
#include "cfgd/smiles.hpp"

namespace cfgd {

struct RunConfig {
  std::string dataset_path;
  std::string vocab = "qm9";
  std::vector<PropertyId> properties = {PropertyId::MolecularWeight};
  double validation_fraction = 0.1;
  double test_fraction = 0.1;

  int T = 50;
  double schedule_offset = kCosineOffset;

  DenoiserConfig denoiser;

  double lr = 1e-3;
  double weight_decay = 1e-12;
  int epochs = 50;
  int batch_size = 32;

  bool nodecount_enabled = true;
  int nodecount_hidden = 64;
  int nodecount_epochs = 200;
  double nodecount_lr = 1e-2;
  int nodecount_batch_size = 64;

  double guidance_s = 1.0;
  GuidanceMode guidance_mode = GuidanceMode::Linear;
  SizeMode size_mode = SizeMode::Inferred;

  int eval_k = 100;
  int eval_r = 10;

  std::uint64_t seed = 0;
  std::string output_dir = "out";
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] inline void config_fail(const std::string& key, const std::string& why) {
  throw Error(ErrorKind::ConfigError, "'" + key + "': " + why);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size() && std::isfinite(x)) return x;
  } catch (const std::exception&) {
  }
  config_fail(key, "expected a number, got '" + v + "'");
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  config_fail(key, "expected an integer, got '" + v + "'");
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  config_fail(key, "expected true or false, got '" + v + "'");
}

}  // namespace detail

inline GuidanceMode parse_guidance_mode(const std::string& v) {
  if (v == "linear") return GuidanceMode::Linear;
  if (v == "log") return GuidanceMode::Log;
  throw Error(ErrorKind::ConfigError, "guidance mode must be linear or log, got '" + v + "'");
}

inline std::string guidance_mode_name(GuidanceMode m) { return m == GuidanceMode::Linear ? "linear" : "log"; }

inline SizeMode parse_size_mode(const std::string& v) {
  if (v == "marginal") return SizeMode::Marginal;
  if (v == "inferred") return SizeMode::Inferred;
  throw Error(ErrorKind::ConfigError, "size mode must be marginal or inferred, got '" + v + "'");
}

inline std::string size_mode_name(SizeMode m) { return m == SizeMode::Marginal ? "marginal" : "inferred"; }

namespace detail {

struct ConfigKey {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline const std::map<std::string, ConfigKey>& config_keys() {
  using C = RunConfig;
  auto str = [](std::string C::*m) {
    return ConfigKey{[m](C& c, const std::string&, const std::string& v) { c.*m = v; },
                     [m](const C& c) { return c.*m; }};
  };
  auto num = [](auto getter) {
    return ConfigKey{[getter](C& c, const std::string& k, const std::string& v) { getter(c) = parse_double(k, v); },
                     [getter](const C& c) { return fmt_double(getter(const_cast<C&>(c))); }};
  };
  auto integer = [](auto getter) {
    return ConfigKey{[getter](C& c, const std::string& k, const std::string& v) {
                       getter(c) = static_cast<std::remove_reference_t<decltype(getter(c))>>(parse_int(k, v));
                     },
                     [getter](const C& c) { return std::to_string(getter(const_cast<C&>(c))); }};
  };
  static const std::map<std::string, ConfigKey> keys = {
      {"dataset.path", str(&C::dataset_path)},
      {"dataset.vocab", str(&C::vocab)},
      {"dataset.properties",
       {[](C& c, const std::string& k, const std::string& v) {
          c.properties.clear();
          std::stringstream ss(v);
          std::string item;
          while (std::getline(ss, item, ',')) {
            try {
              c.properties.push_back(parse_property_id(trim(item)));
            } catch (const Error& e) {
              config_fail(k, e.what());
            }
          }
        },
        [](const C& c) {
          std::string out;
          for (std::size_t i = 0; i < c.properties.size(); ++i) out += (i ? "," : "") + std::string(property_name(c.properties[i]));
          return out;
        }}},
      {"dataset.validation_fraction", num([](C& c) -> double& { return c.validation_fraction; })},
      {"dataset.test_fraction", num([](C& c) -> double& { return c.test_fraction; })},
      {"diffusion.T", integer([](C& c) -> int& { return c.T; })},
      {"diffusion.schedule_offset", num([](C& c) -> double& { return c.schedule_offset; })},
      {"denoiser.layers", integer([](C& c) -> int& { return c.denoiser.layers; })},
      {"denoiser.d_node", integer([](C& c) -> int& { return c.denoiser.d_node; })},
      {"denoiser.d_edge", integer([](C& c) -> int& { return c.denoiser.d_edge; })},
      {"denoiser.d_global", integer([](C& c) -> int& { return c.denoiser.d_global; })},
      {"denoiser.heads", integer([](C& c) -> int& { return c.denoiser.heads; })},
      {"denoiser.d_guide", integer([](C& c) -> int& { return c.denoiser.d_guide; })},
      {"denoiser.ff_mult", integer([](C& c) -> int& { return c.denoiser.ff_mult; })},
      {"denoiser.dropout", num([](C& c) -> double& { return c.denoiser.dropout; })},
      {"train.rho", num([](C& c) -> double& { return c.denoiser.rho; })},
      {"train.gamma", num([](C& c) -> double& { return c.denoiser.gamma; })},
      {"train.lr", num([](C& c) -> double& { return c.lr; })},
      {"train.weight_decay", num([](C& c) -> double& { return c.weight_decay; })},
      {"train.epochs", integer([](C& c) -> int& { return c.epochs; })},
      {"train.batch_size", integer([](C& c) -> int& { return c.batch_size; })},
      {"nodecount.enabled",
       {[](C& c, const std::string& k, const std::string& v) { c.nodecount_enabled = parse_bool(k, v); },
        [](const C& c) { return std::string(c.nodecount_enabled ? "true" : "false"); }}},
      {"nodecount.hidden", integer([](C& c) -> int& { return c.nodecount_hidden; })},
      {"nodecount.epochs", integer([](C& c) -> int& { return c.nodecount_epochs; })},
      {"nodecount.lr", num([](C& c) -> double& { return c.nodecount_lr; })},
      {"nodecount.batch_size", integer([](C& c) -> int& { return c.nodecount_batch_size; })},
      {"sample.s", num([](C& c) -> double& { return c.guidance_s; })},
      {"sample.mode",
       {[](C& c, const std::string& k, const std::string& v) {
          try {
            c.guidance_mode = parse_guidance_mode(v);
          } catch (const Error& e) {
            config_fail(k, e.what());
          }
        },
        [](const C& c) { return guidance_mode_name(c.guidance_mode); }}},
      {"sample.size",
       {[](C& c, const std::string& k, const std::string& v) {
          try {
            c.size_mode = parse_size_mode(v);
          } catch (const Error& e) {
            config_fail(k, e.what());
          }
        },
        [](const C& c) { return size_mode_name(c.size_mode); }}},
      {"eval.k", integer([](C& c) -> int& { return c.eval_k; })},
      {"eval.r", integer([](C& c) -> int& { return c.eval_r; })},
      {"seed",
       {[](C& c, const std::string& k, const std::string& v) {
          const long long s = parse_int(k, v);
          if (s < 0) config_fail(k, "must be >= 0");
          c.seed = static_cast<std::uint64_t>(s);
        },
        [](const C& c) { return std::to_string(c.seed); }}},
      {"output.dir", str(&C::output_dir)},
  };
  return keys;
}

}  // namespace detail

/// Checks every value against the preconditions of the module it feeds.
inline void validate(const RunConfig& c) {
  auto require = [](bool ok, const char* key, const char* why) {
    if (!ok) detail::config_fail(key, why);
  };
  require(!c.dataset_path.empty(), "dataset.path", "is required");
  require(c.vocab == "qm9" || c.vocab == "zinc", "dataset.vocab", "must be qm9 or zinc");
  require(!c.properties.empty(), "dataset.properties", "must list at least one property");
  require(c.validation_fraction >= 0.0 && c.validation_fraction < 1.0, "dataset.validation_fraction", "must lie in [0, 1)");
  require(c.test_fraction >= 0.0 && c.test_fraction < 1.0, "dataset.test_fraction", "must lie in [0, 1)");
  require(c.validation_fraction + c.test_fraction < 1.0, "dataset.test_fraction", "splits leave no training data");
  require(c.T >= 1, "diffusion.T", "must be >= 1");
  require(c.schedule_offset >= 0.0, "diffusion.schedule_offset", "must be >= 0");
  require(c.denoiser.layers >= 1, "denoiser.layers", "must be >= 1");
  require(c.denoiser.d_node >= 1, "denoiser.d_node", "must be >= 1");
  require(c.denoiser.d_edge >= 1, "denoiser.d_edge", "must be >= 1");
  require(c.denoiser.d_global >= 1, "denoiser.d_global", "must be >= 1");
  require(c.denoiser.d_guide >= 1, "denoiser.d_guide", "must be >= 1");
  require(c.denoiser.ff_mult >= 1, "denoiser.ff_mult", "must be >= 1");
  require(c.denoiser.heads >= 1 && c.denoiser.d_node % c.denoiser.heads == 0, "denoiser.heads",
          "must be >= 1 and divide denoiser.d_node");
  require(c.denoiser.dropout >= 0.0 && c.denoiser.dropout < 1.0, "denoiser.dropout", "must lie in [0, 1)");
  require(c.denoiser.rho >= 0.0 && c.denoiser.rho <= 1.0, "train.rho", "must lie in [0, 1]");
  require(c.denoiser.gamma >= 0.0, "train.gamma", "must be >= 0");
  require(c.lr >= 0.0, "train.lr", "must be >= 0");
  require(c.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  require(c.epochs >= 0, "train.epochs", "must be >= 0");
  require(c.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(c.nodecount_hidden >= 1, "nodecount.hidden", "must be >= 1");
  require(c.nodecount_epochs >= 0, "nodecount.epochs", "must be >= 0");
  require(c.nodecount_lr >= 0.0, "nodecount.lr", "must be >= 0");
  require(c.nodecount_batch_size >= 1, "nodecount.batch_size", "must be >= 1");
  require(c.guidance_s >= 0.0, "sample.s", "must be >= 0");
  require(c.eval_k >= 1, "eval.k", "must be >= 1");
  require(c.eval_r >= 1, "eval.r", "must be >= 1");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
}

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  const auto& keys = detail::config_keys();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    auto it = keys.find(key);
    if (it == keys.end()) detail::config_fail(key, "unknown key");
    it->second.set(c, key, value);
  }
  validate(c);
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file '" + path + "'");
  return parse_run_config(in);
}

/// Every key with its effective value, sorted by key.
inline void write_run_config(std::ostream& out, const RunConfig& c) {
  for (const auto& [key, k] : detail::config_keys()) out << key << " = " << k.get(c) << '\n';
}

}  // namespace cfgd

// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container:
//   "FGCKPT1"                          7-byte magic
//   u64 count
//   count x { u64 name_len, name bytes (UTF-8), u64 rank, rank x u64 dim,
//             prod(dims) x f64 row-major }
// All integers and floats little-endian. Scalars are rank-0 tensors.

#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cfgd/dataset.hpp"
#include "cfgd/denoiser.hpp"
#include "cfgd/error.hpp"
#include "cfgd/nodecount.hpp"
#include "cfgd/schedule.hpp"
#include "cfgd/smiles.hpp"

namespace cfgd {

inline constexpr char kCheckpointMagic[] = "FGCKPT1";
inline constexpr std::string_view kNodeCountPrefix = "nodecount/";

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::vector<double> data;  // row-major

  static NamedTensor scalar(std::string name, double v) { return {std::move(name), {}, {v}}; }

  static NamedTensor vector(std::string name, const std::vector<double>& v) {
    return {std::move(name), {v.size()}, v};
  }

  static NamedTensor vector(std::string name, const Eigen::VectorXd& v) {
    return {std::move(name), {static_cast<std::uint64_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size())};
  }

  static NamedTensor matrix(std::string name, const Eigen::MatrixXd& m) {
    NamedTensor t{std::move(name), {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, {}};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
    }
    return t;
  }

  Eigen::MatrixXd as_matrix() const {
    if (dims.size() != 2) throw Error(ErrorKind::CheckpointError, name + ": expected rank 2");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[static_cast<std::size_t>(r * m.cols() + c)];
    }
    return m;
  }

  Eigen::VectorXd as_vector() const {
    if (dims.size() != 1) throw Error(ErrorKind::CheckpointError, name + ": expected rank 1");
    return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
  }

  double as_scalar() const {
    if (!dims.empty()) throw Error(ErrorKind::CheckpointError, name + ": expected rank 0");
    return data.at(0);
  }
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error(ErrorKind::CheckpointError, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

}  // namespace detail

inline void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors) {
  out.write(kCheckpointMagic, 7);
  detail::put_u64(out, tensors.size());
  for (const auto& t : tensors) {
    detail::put_u64(out, t.name.size());
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put_u64(out, t.dims.size());
    for (auto d : t.dims) detail::put_u64(out, d);
    for (double v : t.data) detail::put_f64(out, v);
  }
}

inline std::vector<NamedTensor> read_tensors(std::istream& in) {
  char magic[7];
  if (!in.read(magic, 7) || std::memcmp(magic, kCheckpointMagic, 7) != 0) {
    throw Error(ErrorKind::CheckpointError, "bad magic");
  }
  const std::uint64_t count = detail::get_u64(in);
  if (count > (1u << 24)) throw Error(ErrorKind::CheckpointError, "implausible tensor count");
  std::vector<NamedTensor> out;
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor t;
    const std::uint64_t len = detail::get_u64(in);
    if (len > 4096) throw Error(ErrorKind::CheckpointError, "implausible name length");
    t.name.resize(len);
    if (!in.read(t.name.data(), static_cast<std::streamsize>(len))) throw Error(ErrorKind::CheckpointError, "truncated name");
    const std::uint64_t rank = detail::get_u64(in);
    if (rank > 8) throw Error(ErrorKind::CheckpointError, t.name + ": implausible rank");
    std::uint64_t total = 1;
    for (std::uint64_t r = 0; r < rank; ++r) {
      t.dims.push_back(detail::get_u64(in));
      total *= t.dims.back();
      if (total > (1ull << 28)) throw Error(ErrorKind::CheckpointError, t.name + ": implausible size");
    }
    t.data.resize(total);
    for (auto& v : t.data) v = detail::get_f64(in);
    out.push_back(std::move(t));
  }
  return out;
}

/// Everything needed to sample and evaluate after training.
struct Checkpoint {
  std::string vocab_name = "qm9";
  std::vector<PropertyId> properties;
  NoiseSchedule schedule;
  DatasetMarginals marginals;
  Standardization standardization;
  DenoiserParams denoiser;
  std::optional<NodeCountModel> nodecount;
  double rho_trained = 0.0;
};

inline double vocab_code(const std::string& name) {
  if (name == "qm9") return 0.0;
  if (name == "zinc") return 1.0;
  throw Error(ErrorKind::CheckpointError, "unknown vocabulary " + name);
}

inline std::vector<NamedTensor> to_tensors(const Checkpoint& ck) {
  std::vector<NamedTensor> out;
  const auto& c = ck.denoiser.config;
  const auto& d = ck.denoiser.dims;
  out.push_back(NamedTensor::scalar("config/vocab", vocab_code(ck.vocab_name)));
  std::vector<double> props;
  for (auto p : ck.properties) props.push_back(static_cast<double>(p));
  out.push_back(NamedTensor::vector("config/properties", props));
  out.push_back(NamedTensor::scalar("config/layers", c.layers));
  out.push_back(NamedTensor::scalar("config/d_node", c.d_node));
  out.push_back(NamedTensor::scalar("config/d_edge", c.d_edge));
  out.push_back(NamedTensor::scalar("config/d_global", c.d_global));
  out.push_back(NamedTensor::scalar("config/heads", c.heads));
  out.push_back(NamedTensor::scalar("config/d_guide", c.d_guide));
  out.push_back(NamedTensor::scalar("config/ff_mult", c.ff_mult));
  out.push_back(NamedTensor::scalar("config/dropout", c.dropout));
  out.push_back(NamedTensor::scalar("config/rho", c.rho));
  out.push_back(NamedTensor::scalar("config/gamma", c.gamma));
  out.push_back(NamedTensor::scalar("config/atom_types", d.atom_types));
  out.push_back(NamedTensor::scalar("config/bond_types", d.bond_types));
  out.push_back(NamedTensor::scalar("config/guide_dim", d.guide_dim));
  out.push_back(NamedTensor::scalar("config/n_max", d.n_max));
  out.push_back(NamedTensor::scalar("config/diffusion_steps", d.diffusion_steps));
  out.push_back(NamedTensor::vector("schedule/alpha", ck.schedule.alphas()));
  out.push_back(NamedTensor::vector("marginals/m_X", ck.marginals.m_X));
  out.push_back(NamedTensor::vector("marginals/m_E", ck.marginals.m_E));
  out.push_back(NamedTensor::vector("marginals/m_n", ck.marginals.m_n));
  out.push_back(NamedTensor::vector("standardization/mean", ck.standardization.mean));
  out.push_back(NamedTensor::vector("standardization/stddev", ck.standardization.stddev));
  for (const auto& [name, m] : ck.denoiser.tensors) out.push_back(NamedTensor::matrix("denoiser/" + name, m));
  if (ck.nodecount) {
    const std::string pre(kNodeCountPrefix);
    out.push_back(NamedTensor::scalar(pre + "guide_dim", ck.nodecount->guide_dim));
    out.push_back(NamedTensor::scalar(pre + "n_max", ck.nodecount->n_max));
    out.push_back(NamedTensor::scalar(pre + "hidden", ck.nodecount->hidden));
    for (const auto& [name, m] : ck.nodecount->tensors) out.push_back(NamedTensor::matrix(pre + name, m));
  }
  return out;
}

inline Checkpoint from_tensors(const std::vector<NamedTensor>& tensors) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  auto get = [&](const std::string& name) -> const NamedTensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw Error(ErrorKind::CheckpointError, "missing tensor " + name);
    return *it->second;
  };
  auto integer = [&](const std::string& name) { return static_cast<int>(get(name).as_scalar()); };
  auto to_std = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };

  Checkpoint ck;
  switch (integer("config/vocab")) {
    case 0: ck.vocab_name = "qm9"; break;
    case 1: ck.vocab_name = "zinc"; break;
    default: throw Error(ErrorKind::CheckpointError, "unknown vocabulary code");
  }
  for (double p : to_std(get("config/properties").as_vector())) {
    if (p < 0 || p > 3) throw Error(ErrorKind::CheckpointError, "bad property id");
    ck.properties.push_back(static_cast<PropertyId>(static_cast<int>(p)));
  }
  auto& c = ck.denoiser.config;
  c.layers = integer("config/layers");
  c.d_node = integer("config/d_node");
  c.d_edge = integer("config/d_edge");
  c.d_global = integer("config/d_global");
  c.heads = integer("config/heads");
  c.d_guide = integer("config/d_guide");
  c.ff_mult = integer("config/ff_mult");
  c.dropout = get("config/dropout").as_scalar();
  c.rho = get("config/rho").as_scalar();
  c.gamma = get("config/gamma").as_scalar();
  ck.rho_trained = c.rho;
  auto& d = ck.denoiser.dims;
  d.atom_types = integer("config/atom_types");
  d.bond_types = integer("config/bond_types");
  d.guide_dim = integer("config/guide_dim");
  d.n_max = integer("config/n_max");
  d.diffusion_steps = integer("config/diffusion_steps");
  try {
    c.validate();
    ck.schedule = NoiseSchedule(to_std(get("schedule/alpha").as_vector()));
  } catch (const Error& e) {
    throw Error(ErrorKind::CheckpointError, e.what());
  }
  ck.marginals.m_X = get("marginals/m_X").as_vector();
  ck.marginals.m_E = get("marginals/m_E").as_vector();
  ck.marginals.m_n = get("marginals/m_n").as_vector();
  ck.standardization.mean = to_std(get("standardization/mean").as_vector());
  ck.standardization.stddev = to_std(get("standardization/stddev").as_vector());

  const std::string nc(kNodeCountPrefix);
  for (const auto& t : tensors) {
    if (t.name.rfind("denoiser/", 0) == 0) ck.denoiser.tensors[t.name.substr(9)] = t.as_matrix();
  }
  if (by_name.contains(nc + "hidden")) {
    NodeCountModel m;
    m.guide_dim = integer(nc + "guide_dim");
    m.n_max = integer(nc + "n_max");
    m.hidden = integer(nc + "hidden");
    for (const char* name : {"l0.w", "l0.b", "l1.w", "l1.b", "out.w", "out.b"}) m.tensors[name] = get(nc + name).as_matrix();
    ck.nodecount = std::move(m);
  }

  // Shape checks against a freshly initialized model of the same config.
  const auto expected = init_denoiser(c, d, 0);
  for (const auto& [name, value] : expected.tensors) {
    auto it = ck.denoiser.tensors.find(name);
    if (it == ck.denoiser.tensors.end()) throw Error(ErrorKind::CheckpointError, "missing tensor denoiser/" + name);
    if (it->second.rows() != value.rows() || it->second.cols() != value.cols()) {
      throw Error(ErrorKind::CheckpointError, "shape mismatch for denoiser/" + name);
    }
  }
  if (ck.marginals.m_X.size() != d.atom_types || ck.marginals.m_E.size() != d.bond_types ||
      ck.standardization.dim() != static_cast<std::size_t>(d.guide_dim) ||
      ck.properties.size() != static_cast<std::size_t>(d.guide_dim) || ck.schedule.T() != d.diffusion_steps) {
    throw Error(ErrorKind::CheckpointError, "inconsistent checkpoint metadata");
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::CheckpointError, "cannot write " + path);
  write_tensors(out, to_tensors(ck));
  if (!out) throw Error(ErrorKind::CheckpointError, "write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::CheckpointError, "cannot open " + path);
  return from_tensors(read_tensors(in));
}

}  // namespace cfgd

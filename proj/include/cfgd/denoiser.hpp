// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Graph-transformer denoiser: predicts clean node and edge types from a noisy
// graph, the timestep and a guide (or the trainable placeholder standing in
// for "no guide").
//
// Per layer:
//   attention  Y_ij = (q_i * k_j) / sqrt(d_head), FiLM-modulated by e_ij;
//              per-head scores are softmaxed over j and mix the values v_j.
//   edges      new e_ij from the pre-softmax Y_ij, FiLM-modulated by u.
//   nodes      attention output FiLM-modulated by u.
//   global     u' = W u + PNA(X) + PNA(E), PNA = [mean, min, max, std].
// each followed by residual + layer norm + feed-forward + layer norm.

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfgd/autodiff.hpp"
#include "cfgd/dataset.hpp"
#include "cfgd/diffusion.hpp"
#include "cfgd/error.hpp"
#include "cfgd/graph.hpp"
#include "cfgd/rng.hpp"

namespace cfgd {

struct DenoiserConfig {
  int layers = 2;
  int d_node = 32;
  int d_edge = 16;
  int d_global = 16;
  int heads = 4;
  int d_guide = 16;
  int ff_mult = 2;
  double dropout = 0.0;
  double rho = 0.1;
  double gamma = 2.0;

  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw Error(ErrorKind::InvalidArgument, what);
    };
    require(layers >= 1, "denoiser.layers must be >= 1");
    require(d_node >= 1 && d_edge >= 1 && d_global >= 1 && d_guide >= 1 && ff_mult >= 1,
            "denoiser dimensions must be >= 1");
    require(heads >= 1 && d_node % heads == 0, "denoiser.d_node must be divisible by denoiser.heads");
    require(dropout >= 0.0 && dropout < 1.0, "denoiser.dropout must lie in [0, 1)");
    require(rho >= 0.0 && rho <= 1.0, "train.rho must lie in [0, 1]");
    require(gamma >= 0.0, "train.gamma must be >= 0");
  }
};

/// Shapes fixed by the data rather than by the architecture.
struct DenoiserDims {
  int atom_types = 4;
  int bond_types = 4;
  int guide_dim = 1;
  int n_max = 9;
  int diffusion_steps = 50;
};

using TensorMap = std::map<std::string, Eigen::MatrixXd>;

struct DenoiserParams {
  DenoiserConfig config;
  DenoiserDims dims;
  TensorMap tensors;

  const Eigen::MatrixXd& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error(ErrorKind::ShapeMismatch, "missing parameter " + name);
    return it->second;
  }
};

namespace nn {

inline void add_linear(TensorMap& t, Rng& rng, const std::string& name, int in, int out) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  Eigen::MatrixXd w(in, out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
  t[name + ".w"] = std::move(w);
  t[name + ".b"] = Eigen::MatrixXd::Zero(1, out);
}

inline void add_norm(TensorMap& t, const std::string& name, int width) {
  t[name + ".g"] = Eigen::MatrixXd::Ones(1, width);
  t[name + ".b"] = Eigen::MatrixXd::Zero(1, width);
}

}  // namespace nn

inline DenoiserParams init_denoiser(const DenoiserConfig& config, const DenoiserDims& dims, std::uint64_t seed) {
  config.validate();
  DenoiserParams p{config, dims, {}};
  Rng rng(seed);
  auto& t = p.tensors;
  const int dx = config.d_node, de = config.d_edge, du = config.d_global;
  nn::add_linear(t, rng, "in_x.0", dims.atom_types, dx);
  nn::add_linear(t, rng, "in_x.1", dx, dx);
  nn::add_linear(t, rng, "in_e.0", dims.bond_types, de);
  nn::add_linear(t, rng, "in_e.1", de, de);
  nn::add_linear(t, rng, "guide", dims.guide_dim, config.d_guide);
  nn::add_linear(t, rng, "in_u.0", 2 + config.d_guide, du);
  nn::add_linear(t, rng, "in_u.1", du, du);
  Eigen::MatrixXd placeholder(1, dims.guide_dim);
  for (Eigen::Index k = 0; k < placeholder.size(); ++k) placeholder(0, k) = rng.normal();
  t["placeholder"] = placeholder;

  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    for (const char* name : {"q", "k", "v"}) nn::add_linear(t, rng, pre + name, dx, dx);
    nn::add_linear(t, rng, pre + "e_mul", de, dx);
    nn::add_linear(t, rng, pre + "e_add", de, dx);
    nn::add_linear(t, rng, pre + "u_e_mul", du, dx);
    nn::add_linear(t, rng, pre + "u_e_add", du, dx);
    nn::add_linear(t, rng, pre + "u_x_mul", du, dx);
    nn::add_linear(t, rng, pre + "u_x_add", du, dx);
    nn::add_linear(t, rng, pre + "x_out", dx, dx);
    nn::add_linear(t, rng, pre + "e_out", dx, de);
    nn::add_linear(t, rng, pre + "u_self", du, du);
    nn::add_linear(t, rng, pre + "x_pna", 4 * dx, du);
    nn::add_linear(t, rng, pre + "e_pna", 4 * de, du);
    nn::add_linear(t, rng, pre + "u_out.0", du, du);
    nn::add_linear(t, rng, pre + "u_out.1", du, du);
    for (const auto& [stream, width] : {std::pair{"x", dx}, std::pair{"e", de}, std::pair{"u", du}}) {
      const std::string s = pre + stream;
      nn::add_norm(t, s + "_norm1", width);
      nn::add_norm(t, s + "_norm2", width);
      nn::add_linear(t, rng, s + "_ff.0", width, width * config.ff_mult);
      nn::add_linear(t, rng, s + "_ff.1", width * config.ff_mult, width);
    }
  }
  nn::add_linear(t, rng, "out_x.0", dx, dx);
  nn::add_linear(t, rng, "out_x.1", dx, dims.atom_types);
  nn::add_linear(t, rng, "out_e.0", de, de);
  nn::add_linear(t, rng, "out_e.1", de, dims.bond_types);
  return p;
}

/// Binds parameters to a tape, as trainable leaves or as constants.
class BoundParams {
 public:
  BoundParams(ad::Tape& tape, const DenoiserParams& params, bool trainable)
      : tape_(tape), params_(params), trainable_(trainable) {}

  ad::Var operator[](const std::string& name) {
    auto it = vars_.find(name);
    if (it != vars_.end()) return it->second;
    const auto& value = params_.at(name);
    ad::Var v = trainable_ ? tape_.leaf(value) : tape_.constant(value);
    vars_.emplace(name, v);
    return v;
  }

  const std::map<std::string, ad::Var>& vars() const { return vars_; }
  ad::Tape& tape() { return tape_; }

 private:
  ad::Tape& tape_;
  const DenoiserParams& params_;
  bool trainable_;
  std::map<std::string, ad::Var> vars_;
};

struct DenoiserLogits {
  ad::Var node;  // n x a
  ad::Var edge;  // (n*n) x b, symmetric in (i, j)
};

namespace nn {

inline ad::Var lin(BoundParams& p, const std::string& name, ad::Var x) {
  return ad::linear(x, p[name + ".w"], p[name + ".b"]);
}

inline ad::Var mlp2(BoundParams& p, const std::string& name, ad::Var x) {
  return lin(p, name + ".1", ad::relu(lin(p, name + ".0", x)));
}

inline ad::Var pna(ad::Var x) {
  return ad::concat_cols({ad::mean_rows(x), ad::min_rows(x), ad::max_rows(x), ad::std_rows(x)});
}

// Inverted dropout; identity when rate is 0 or no rng is supplied.
inline ad::Var dropout(ad::Var x, double rate, Rng* rng) {
  if (rate <= 0.0 || rng == nullptr) return x;
  Eigen::MatrixXd mask(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = rng->uniform() < rate ? 0.0 : 1.0 / (1.0 - rate);
  return ad::mul(x, x.tape->constant(std::move(mask)));
}

// Block indicator: column h selects the features of head h.
inline Eigen::MatrixXd head_indicator(int width, int heads) {
  const int dh = width / heads;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(width, heads);
  for (int f = 0; f < width; ++f) h(f, f / dh) = 1.0;
  return h;
}

}  // namespace nn

/// Builds the forward graph on p's tape. `guide == nullopt` selects the
/// placeholder. `rng` drives dropout and is only passed while training.
inline DenoiserLogits denoiser_logits(BoundParams& p, const DenoiserParams& params, const CategoricalGraph& g,
                                      int t, const std::optional<Guide>& guide, Rng* rng = nullptr) {
  using namespace ad;
  const auto& cfg = params.config;
  const auto& dims = params.dims;
  if (static_cast<int>(g.num_atom_types()) != dims.atom_types || static_cast<int>(g.num_bond_types()) != dims.bond_types) {
    throw Error(ErrorKind::ShapeMismatch, "graph vocabulary sizes do not match the denoiser");
  }
  if (guide && static_cast<int>(guide->dim()) != dims.guide_dim) {
    throw Error(ErrorKind::ShapeMismatch, "guide dimension " + std::to_string(guide->dim()) + " != " +
                                              std::to_string(dims.guide_dim));
  }
  if (g.n() == 0) throw Error(ErrorKind::ShapeMismatch, "empty graph");
  Tape& tape = p.tape();
  const auto n = static_cast<Index>(g.n());
  const Index pairs = n * n;
  const int dx = cfg.d_node;
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dx / cfg.heads));
  const Var heads = tape.constant(nn::head_indicator(dx, cfg.heads));
  const Var heads_t = tape.constant(nn::head_indicator(dx, cfg.heads).transpose());

  Var X = nn::mlp2(p, "in_x", tape.constant(g.X()));
  Var E = nn::mlp2(p, "in_e", tape.constant(g.E()));

  Var y;
  if (guide) {
    Eigen::MatrixXd row(1, dims.guide_dim);
    for (int k = 0; k < dims.guide_dim; ++k) row(0, k) = guide->values[static_cast<std::size_t>(k)];
    y = tape.constant(std::move(row));
  } else {
    y = p["placeholder"];
  }
  Eigen::MatrixXd extra(1, 2);
  extra(0, 0) = static_cast<double>(t) / dims.diffusion_steps;
  extra(0, 1) = static_cast<double>(n) / dims.n_max;
  Var u = nn::mlp2(p, "in_u", concat_cols({tape.constant(std::move(extra)), relu(nn::lin(p, "guide", y))}));

  for (int l = 0; l < cfg.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    const Var q = nn::lin(p, pre + "q", X);
    const Var k = nn::lin(p, pre + "k", X);
    const Var v = nn::lin(p, pre + "v", X);

    Var scores = scale(mul(repeat_rows(q, n), tile_rows(k, n)), inv_sqrt_dh);
    scores = add(mul(scores, add_scalar(nn::lin(p, pre + "e_mul", E), 1.0)), nn::lin(p, pre + "e_add", E));

    Var new_e = add(mul(scores, tile_rows(add_scalar(nn::lin(p, pre + "u_e_mul", u), 1.0), pairs)),
                    tile_rows(nn::lin(p, pre + "u_e_add", u), pairs));
    new_e = nn::lin(p, pre + "e_out", new_e);

    const Var attn = matmul(segment_softmax(matmul(scores, heads), n), heads_t);
    Var new_x = segment_sum(mul(attn, tile_rows(v, n)), n);
    new_x = add(mul(new_x, tile_rows(add_scalar(nn::lin(p, pre + "u_x_mul", u), 1.0), n)),
                tile_rows(nn::lin(p, pre + "u_x_add", u), n));
    new_x = nn::lin(p, pre + "x_out", new_x);

    Var new_u = add(add(nn::lin(p, pre + "u_self", u), nn::lin(p, pre + "x_pna", nn::pna(X))),
                    nn::lin(p, pre + "e_pna", nn::pna(E)));
    new_u = nn::mlp2(p, pre + "u_out", new_u);

    auto block = [&](Var state, Var update, const std::string& s) {
      Var h = layer_norm(add(state, nn::dropout(update, cfg.dropout, rng)), p[pre + s + "_norm1.g"],
                         p[pre + s + "_norm1.b"]);
      Var ff = nn::mlp2(p, pre + s + "_ff", h);
      return layer_norm(add(h, nn::dropout(ff, cfg.dropout, rng)), p[pre + s + "_norm2.g"], p[pre + s + "_norm2.b"]);
    };
    X = block(X, new_x, "x");
    E = block(E, new_e, "e");
    u = block(u, new_u, "u");
  }

  const Var node_logits = nn::mlp2(p, "out_x", X);
  const Var edge_raw = nn::mlp2(p, "out_e", E);
  const Var edge_logits = scale(add(edge_raw, pair_transpose(edge_raw, n)), 0.5);
  return {node_logits, edge_logits};
}

inline DenoiserOutput probabilities(const DenoiserLogits& logits, std::size_t n) {
  DenoiserOutput out{ad::softmax_rows(logits.node.value()), ad::softmax_rows(logits.edge.value())};
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.edge_probs.row(static_cast<Eigen::Index>(i * n + i));
    row.setZero();
    row(0) = 1.0;
  }
  return out;
}

/// f_theta(G^t, t, y). Pure: identical inputs give bit-identical outputs.
inline DenoiserOutput denoiser_forward(const DenoiserParams& params, const CategoricalGraph& g, int t,
                                       const std::optional<Guide>& guide) {
  ad::Tape tape;
  BoundParams bound(tape, params, false);
  return probabilities(denoiser_logits(bound, params, g, t, guide), g.n());
}

/// Adapter satisfying the sampler's denoiser interface.
class GraphTransformerDenoiser {
 public:
  explicit GraphTransformerDenoiser(const DenoiserParams& params) : params_(params) {}
  DenoiserOutput operator()(const CategoricalGraph& g, int t, const std::optional<Guide>& guide) const {
    return denoiser_forward(params_, g, t, guide);
  }
  const DenoiserParams& params() const { return params_; }

 private:
  const DenoiserParams& params_;
};

/// Node CE plus gamma-weighted edge CE over ordered off-diagonal pairs
/// (equal to 2 x the i < j sum for symmetric predictions).
inline double denoising_loss(const DenoiserOutput& out, const CategoricalGraph& g0, double gamma) {
  const std::size_t n = g0.n();
  if (out.node_probs.rows() != static_cast<Eigen::Index>(n) ||
      out.edge_probs.rows() != static_cast<Eigen::Index>(n * n)) {
    throw Error(ErrorKind::ShapeMismatch, "loss: output shape does not match the target graph");
  }
  double node_term = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    node_term -= std::log(std::max(out.node_probs(static_cast<Eigen::Index>(i), g0.node(i)), ad::kLogClamp));
  }
  double edge_term = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = out.edge_probs(static_cast<Eigen::Index>(i * n + j), g0.edge(i, j));
      edge_term -= 2.0 * std::log(std::max(p, ad::kLogClamp));
    }
  }
  return node_term + gamma * edge_term;
}

}  // namespace cfgd

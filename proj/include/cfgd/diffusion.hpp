// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Forward noising, the categorical posterior, classifier-free guidance and
// the reverse sampling loop.
//
// A denoiser is any callable
//   DenoiserOutput(const CategoricalGraph& g_t, int t, const std::optional<Guide>& y)
// where y == nullopt asks for the unconditional (placeholder) prediction.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <vector>

#include "cfgd/dataset.hpp"
#include "cfgd/error.hpp"
#include "cfgd/graph.hpp"
#include "cfgd/rng.hpp"
#include "cfgd/schedule.hpp"

namespace cfgd {

/// Probability vector over k categories.
using CategoricalDistribution = Eigen::VectorXd;

/// Predicted clean-graph distributions.
struct DenoiserOutput {
  Eigen::MatrixXd node_probs;  // n x a
  Eigen::MatrixXd edge_probs;  // (n*n) x b, row i*n + j
};

template <typename D>
concept Denoiser = requires(const D& d, const CategoricalGraph& g, int t, const std::optional<Guide>& y) {
  { d(g, t, y) } -> std::convertible_to<DenoiserOutput>;
};

enum class GuidanceMode { Linear, Log };

struct GuidanceConfig {
  double s = 1.0;
  GuidanceMode mode = GuidanceMode::Linear;
  double rho_trained = 0.0;  // informational
};

inline constexpr double kMixtureFloor = 1e-12;

inline std::size_t sample_categorical(const Eigen::Ref<const Eigen::VectorXd>& p, Rng& rng) {
  return rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())));
}

/// G^t ~ q(G^t | G^0): nodes from x_i Qbar_X, each unordered pair once from
/// e_ij Qbar_E and mirrored.
inline CategoricalGraph forward_sample(const CategoricalGraph& g0, int t, const NoiseSchedule& schedule,
                                       const DatasetMarginals& marginals, Rng& rng) {
  const auto qx = cumulative_transition(schedule, marginals.m_X, t);
  const auto qe = cumulative_transition(schedule, marginals.m_E, t);
  CategoricalGraph g = g0;
  const std::size_t n = g0.n();
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::VectorXd row = qx.Q.row(g0.node(i)).transpose();
    g.set_node(i, static_cast<int>(sample_categorical(row, rng)));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Eigen::VectorXd row = qe.Q.row(g0.edge(i, j)).transpose();
      g.set_edge(i, j, static_cast<int>(sample_categorical(row, rng)));
    }
  }
  return g;
}

/// Table of q(x^{t-1} = z | x^t = c, x^0 = x) for every (c, x, z) at one step:
///   q(z | c, x) ∝ Q^t[z, c] * Qbar^{t-1}[x, z].
/// When the transition x -> c is impossible the entry is a point mass on c.
class PosteriorTable {
 public:
  PosteriorTable(const NoiseSchedule& schedule, const Eigen::VectorXd& m, int t) {
    if (t < 1 || t > schedule.T()) {
      throw Error(ErrorKind::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.T()) + "]");
    }
    const auto q = step_transition(schedule, m, t);
    const auto qbar_prev = detail::cumulative_or_identity(schedule, m, t - 1);
    const Eigen::Index k = m.size();
    tables_.resize(static_cast<std::size_t>(k));
    for (Eigen::Index c = 0; c < k; ++c) {
      Eigen::MatrixXd post(k, k);
      for (Eigen::Index x = 0; x < k; ++x) {
        for (Eigen::Index z = 0; z < k; ++z) post(x, z) = q.Q(z, c) * qbar_prev.Q(x, z);
        const double total = post.row(x).sum();
        if (total > 0.0) {
          post.row(x) /= total;
        } else {
          post.row(x).setZero();
          post(x, c) = 1.0;
        }
      }
      tables_[static_cast<std::size_t>(c)] = std::move(post);
    }
  }

  /// Row x of the returned matrix is the posterior given x^0 = x.
  const Eigen::MatrixXd& given_current(std::size_t c) const { return tables_[c]; }

  /// sum_x pred[x] * q(. | c, x).
  CategoricalDistribution mix(const Eigen::Ref<const Eigen::VectorXd>& pred, std::size_t c) const {
    return tables_[c].transpose() * pred;
  }

 private:
  std::vector<Eigen::MatrixXd> tables_;
};

inline std::size_t one_hot_index(const Eigen::VectorXd& one_hot) {
  Eigen::Index k = 0;
  one_hot.maxCoeff(&k);
  return static_cast<std::size_t>(k);
}

/// q(x^{t-1} | x^t = current, x^0 = clean). At t = 1 this is the point mass on
/// the clean type.
inline CategoricalDistribution posterior_distribution(std::size_t current, std::size_t clean, int t,
                                                      const NoiseSchedule& schedule, const Eigen::VectorXd& m) {
  const PosteriorTable table(schedule, m, t);
  return table.given_current(current).row(static_cast<Eigen::Index>(clean)).transpose();
}

inline CategoricalDistribution posterior_distribution(const Eigen::VectorXd& x_t, std::size_t clean, int t,
                                                      const NoiseSchedule& schedule, const Eigen::VectorXd& m) {
  return posterior_distribution(one_hot_index(x_t), clean, t, schedule, m);
}

/// p(x^{t-1} | x^t) = sum_x pred[x] q(x^{t-1} | x^t, x^0 = x) for t >= 2; the
/// prediction itself at t = 1.
inline CategoricalDistribution denoising_distribution(const CategoricalDistribution& pred, std::size_t current, int t,
                                                      const NoiseSchedule& schedule, const Eigen::VectorXd& m) {
  if (t == 1) return pred;
  return PosteriorTable(schedule, m, t).mix(pred, current);
}

/// Classifier-free mixing of conditional and unconditional x^0 predictions.
/// s = 1 returns p_cond and s = 0 returns p_uncond, unchanged.
inline CategoricalDistribution guided_mixture(const CategoricalDistribution& p_cond,
                                              const CategoricalDistribution& p_uncond, const GuidanceConfig& cfg) {
  if (p_cond.size() != p_uncond.size()) throw Error(ErrorKind::ShapeMismatch, "guided_mixture: sizes differ");
  if (!std::isfinite(cfg.s)) throw Error(ErrorKind::InvalidArgument, "guidance weight must be finite");
  if (cfg.s == 1.0) return p_cond;
  if (cfg.s == 0.0) return p_uncond;
  CategoricalDistribution out(p_cond.size());
  if (cfg.mode == GuidanceMode::Linear) {
    bool any_mass = false;
    for (Eigen::Index k = 0; k < out.size(); ++k) {
      const double v = p_uncond[k] + cfg.s * (p_cond[k] - p_uncond[k]);
      any_mass = any_mass || v > kMixtureFloor;
      out[k] = std::max(v, kMixtureFloor);
    }
    if (!any_mass) throw Error(ErrorKind::ZeroMass, "every mixed entry was clamped; s = " + std::to_string(cfg.s));
    return out / out.sum();
  }
  for (Eigen::Index k = 0; k < out.size(); ++k) {
    const double lu = std::log(std::max(p_uncond[k], kMixtureFloor));
    const double lc = std::log(std::max(p_cond[k], kMixtureFloor));
    out[k] = lu + cfg.s * (lc - lu);
  }
  out = (out.array() - out.maxCoeff()).exp().matrix();
  return out / out.sum();
}

namespace detail {

// Mixes one row of conditional/unconditional predictions; either may be absent.
inline CategoricalDistribution mixed_row(const Eigen::MatrixXd* cond, const Eigen::MatrixXd* uncond,
                                         Eigen::Index row, const GuidanceConfig& cfg) {
  if (cond == nullptr) return uncond->row(row).transpose();
  if (uncond == nullptr) return cond->row(row).transpose();
  return guided_mixture(cond->row(row).transpose(), uncond->row(row).transpose(), cfg);
}

}  // namespace detail

/// One reverse step G^t -> G^{t-1}. With a guide the denoiser runs with y and
/// with the placeholder and the x^0 predictions are mixed by guided_mixture;
/// without a guide only the placeholder pass is used.
template <Denoiser D>
CategoricalGraph reverse_step(const CategoricalGraph& g_t, int t, const std::optional<Guide>& guide,
                              const D& denoiser, const GuidanceConfig& cfg, const NoiseSchedule& schedule,
                              const DatasetMarginals& marginals, Rng& rng) {
  if (t < 1 || t > schedule.T()) {
    throw Error(ErrorKind::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.T()) + "]");
  }
  std::optional<DenoiserOutput> cond, uncond;
  // Passes whose weight is exactly zero are skipped; guided_mixture would
  // return the other operand unchanged anyway.
  if (guide && cfg.s != 0.0) cond = denoiser(g_t, t, guide);
  if (!guide || cfg.s != 1.0) uncond = denoiser(g_t, t, std::nullopt);

  const std::size_t n = g_t.n();
  CategoricalGraph next = g_t;
  const std::optional<PosteriorTable> node_post =
      t > 1 ? std::optional<PosteriorTable>(std::in_place, schedule, marginals.m_X, t) : std::nullopt;
  const std::optional<PosteriorTable> edge_post =
      t > 1 ? std::optional<PosteriorTable>(std::in_place, schedule, marginals.m_E, t) : std::nullopt;

  const Eigen::MatrixXd* cn = cond ? &cond->node_probs : nullptr;
  const Eigen::MatrixXd* un = uncond ? &uncond->node_probs : nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    const auto pred = detail::mixed_row(cn, un, static_cast<Eigen::Index>(i), cfg);
    const auto dist = node_post ? node_post->mix(pred, static_cast<std::size_t>(g_t.node(i))) : pred;
    next.set_node(i, static_cast<int>(sample_categorical(dist, rng)));
  }
  const Eigen::MatrixXd* ce = cond ? &cond->edge_probs : nullptr;
  const Eigen::MatrixXd* ue = uncond ? &uncond->edge_probs : nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto pred = detail::mixed_row(ce, ue, static_cast<Eigen::Index>(i * n + j), cfg);
      const auto dist = edge_post ? edge_post->mix(pred, static_cast<std::size_t>(g_t.edge(i, j))) : pred;
      next.set_edge(i, j, static_cast<int>(sample_categorical(dist, rng)));
    }
  }
  return next;
}

/// G^T from the marginals: nodes i.i.d. from m_X, unordered pairs from m_E.
inline CategoricalGraph sample_prior(std::size_t n, const DatasetMarginals& marginals, Rng& rng) {
  std::vector<int> types(n);
  for (auto& type : types) type = static_cast<int>(sample_categorical(marginals.m_X, rng));
  CategoricalGraph g(static_cast<std::size_t>(marginals.m_X.size()), static_cast<std::size_t>(marginals.m_E.size()),
                     std::move(types));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) g.set_edge(i, j, static_cast<int>(sample_categorical(marginals.m_E, rng)));
  }
  return g;
}

struct NoObserver {
  void operator()(int, const CategoricalGraph&) const {}
};

/// Full reverse trajectory G^T -> G^0. The observer sees every intermediate
/// graph, tagged with its step (T for the prior, 0 for the result).
template <Denoiser D, typename Observer = NoObserver>
CategoricalGraph sample(const D& denoiser, const std::optional<Guide>& guide, std::size_t n, const GuidanceConfig& cfg,
                        const NoiseSchedule& schedule, const DatasetMarginals& marginals, Rng& rng,
                        Observer&& observer = {}) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "sample needs n >= 1");
  CategoricalGraph g = sample_prior(n, marginals, rng);
  observer(schedule.T(), g);
  for (int t = schedule.T(); t >= 1; --t) {
    g = reverse_step(g, t, guide, denoiser, cfg, schedule, marginals, rng);
    observer(t - 1, g);
  }
  return g;
}

/// Emits uniform x^0 predictions regardless of input; the reference
/// "untrained" denoiser.
struct UniformDenoiser {
  std::size_t atom_types;
  std::size_t bond_types;

  DenoiserOutput operator()(const CategoricalGraph& g, int, const std::optional<Guide>&) const {
    const auto n = static_cast<Eigen::Index>(g.n());
    return {Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(atom_types), 1.0 / static_cast<double>(atom_types)),
            Eigen::MatrixXd::Constant(n * n, static_cast<Eigen::Index>(bond_types), 1.0 / static_cast<double>(bond_types))};
  }
};

}  // namespace cfgd

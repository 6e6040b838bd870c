// Copyright (c) 2026, cfgd contributors
// SPDX-License-Identifier: Apache-2.0
//
// Noise schedule and marginal transition matrices
//   Q^t    = alpha^t I + (1 - alpha^t) 1 m
//   Qbar^t = alphabar^t I + (1 - alphabar^t) 1 m

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cfgd/error.hpp"

namespace cfgd {

/// Steps are 1-based: alpha(t) for t in [1, T]. alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  NoiseSchedule() = default;

  /// Builds the schedule from per-step alphas; cumulative products are formed
  /// by repeated multiplication so that alpha_bar(t) == alpha_bar(t-1) * alpha(t)
  /// holds exactly.
  explicit NoiseSchedule(std::vector<double> alpha) : alpha_(std::move(alpha)) {
    if (alpha_.empty()) throw Error(ErrorKind::InvalidT, "schedule needs T >= 1");
    alpha_bar_.resize(alpha_.size());
    double acc = 1.0;
    for (std::size_t k = 0; k < alpha_.size(); ++k) {
      if (!(alpha_[k] > 0.0 && alpha_[k] <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0, 1]");
      }
      acc *= alpha_[k];
      alpha_bar_[k] = acc;
    }
  }

  int T() const { return static_cast<int>(alpha_.size()); }
  double alpha(int t) const { return alpha_[index(t)]; }
  double beta(int t) const { return 1.0 - alpha(t); }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[index(t)]; }
  double beta_bar(int t) const { return 1.0 - alpha_bar(t); }
  const std::vector<double>& alphas() const { return alpha_; }

 private:
  std::size_t index(int t) const {
    if (t < 1 || t > T()) {
      throw Error(ErrorKind::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(T()) + "]");
    }
    return static_cast<std::size_t>(t - 1);
  }

  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

inline constexpr double kCosineOffset = 0.008;
inline constexpr double kAlphaBarFloor = 1e-5;

/// Cosine schedule with alphabar clipped to [1e-5, 1].
inline NoiseSchedule cosine_schedule(int T, double offset = kCosineOffset) {
  if (T < 1) throw Error(ErrorKind::InvalidT, "T = " + std::to_string(T));
  auto f = [&](double t) {
    const double c = std::cos(0.5 * std::numbers::pi * ((t / T + offset) / (1.0 + offset)));
    return c * c;
  };
  const double f0 = f(0.0);
  std::vector<double> bar(static_cast<std::size_t>(T) + 1);
  bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    bar[static_cast<std::size_t>(t)] = std::clamp(f(t) / f0, kAlphaBarFloor, 1.0);
  }
  std::vector<double> alpha(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const double a = bar[static_cast<std::size_t>(t)] / bar[static_cast<std::size_t>(t) - 1];
    alpha[static_cast<std::size_t>(t) - 1] = std::clamp(a, kAlphaBarFloor, 1.0);
  }
  return NoiseSchedule(std::move(alpha));
}

/// Row-stochastic k x k matrix.
struct TransitionMatrix {
  Eigen::MatrixXd Q;

  Eigen::Index size() const { return Q.rows(); }
  double operator()(Eigen::Index from, Eigen::Index to) const { return Q(from, to); }
};

inline void check_marginal(const Eigen::VectorXd& m) {
  if (m.size() == 0) throw Error(ErrorKind::BadMarginal, "empty marginal");
  double total = 0.0;
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    if (!(m[k] >= 0.0)) throw Error(ErrorKind::BadMarginal, "negative or NaN entry");
    total += m[k];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::BadMarginal, "marginal sums to " + std::to_string(total));
  }
}

inline TransitionMatrix transition_matrix(double alpha_t, const Eigen::VectorXd& m) {
  if (!(alpha_t >= 0.0 && alpha_t <= 1.0)) throw Error(ErrorKind::InvalidArgument, "alpha outside [0, 1]");
  check_marginal(m);
  const Eigen::Index k = m.size();
  Eigen::MatrixXd q(k, k);
  for (Eigen::Index r = 0; r < k; ++r) {
    for (Eigen::Index c = 0; c < k; ++c) q(r, c) = (1.0 - alpha_t) * m[c] + (r == c ? alpha_t : 0.0);
  }
  return {std::move(q)};
}

inline TransitionMatrix step_transition(const NoiseSchedule& schedule, const Eigen::VectorXd& m, int t) {
  return transition_matrix(schedule.alpha(t), m);
}

inline TransitionMatrix cumulative_transition(const NoiseSchedule& schedule, const Eigen::VectorXd& m, int t) {
  if (t < 1 || t > schedule.T()) {
    throw Error(ErrorKind::StepOutOfRange, "step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.T()) + "]");
  }
  return transition_matrix(schedule.alpha_bar(t), m);
}

namespace detail {
// Qbar^t including t = 0 (the identity).
inline TransitionMatrix cumulative_or_identity(const NoiseSchedule& schedule, const Eigen::VectorXd& m, int t) {
  return t == 0 ? transition_matrix(1.0, m) : cumulative_transition(schedule, m, t);
}
}  // namespace detail

}  // namespace cfgd

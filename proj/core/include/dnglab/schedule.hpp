#pragma once

#include <span>
#include <vector>

#include "dnglab/mixture.hpp"

namespace dnglab {

/// Discrete variance-preserving noise schedule with T steps.
///
/// Steps are 1-based, t = 1..T, matching the reverse loop "for t = T, ..., 1".
/// Internally step t lives at index t - 1. alpha_bar(0) is defined as 1 (clean
/// data) for convenience; every other accessor rejects t outside [1, T].
class NoiseSchedule {
 public:
  /// Throws std::invalid_argument unless every beta is in (0, 1) and T >= 1.
  explicit NoiseSchedule(std::vector<double> betas);

  /// Linear betas from beta_min (t = 1) to beta_max (t = T).
  /// Requires T >= 2 and 0 < beta_min <= beta_max < 1.
  static NoiseSchedule linear(int steps, double beta_min, double beta_max);

  /// Linear schedule with endpoints given for 1000 steps and rescaled by
  /// 1000 / T, so alpha_bar(T) stays roughly where the 1000-step schedule ends.
  static NoiseSchedule rescaled_linear(int steps, double beta_min = 1e-4, double beta_max = 0.02);

  int steps() const { return static_cast<int>(betas_.size()); }
  double beta(int t) const { return betas_[index(t)]; }
  double alpha(int t) const { return alphas_[index(t)]; }
  double alpha_bar(int t) const;
  /// Reverse-step variance sigma_t^2 = 1 - alpha_t = beta_t.
  double sigma_sq(int t) const { return beta(t); }

  const std::vector<double>& betas() const { return betas_; }

 private:
  std::size_t index(int t) const;

  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise.
Vector forward_sample(std::span<const double> x0, int t, const NoiseSchedule& schedule,
                      std::span<const double> noise);

}  // namespace dnglab

#pragma once

#include <span>
#include <vector>

#include "dnglab/mixture.hpp"
#include "dnglab/schedule.hpp"

namespace dnglab {

/// Noise-prediction model eps(x, t). Implementations must be deterministic
/// and safe to call concurrently.
class ScoreProvider {
 public:
  virtual ~ScoreProvider() = default;
  virtual std::size_t dim() const = 0;
  /// Writes eps(x, t) into `eps`; t in [1, T].
  virtual void predict(std::span<const double> x, int t, std::span<double> eps) const = 0;
};

/// Exact noise prediction of a Gaussian mixture under the given schedule:
/// eps(x, t) = -sqrt(1 - alpha_bar_t) * grad log p_t(x). The diffused mixture
/// for every step is built once at construction.
class AnalyticScoreProvider final : public ScoreProvider {
 public:
  AnalyticScoreProvider(const GaussianMixture& data, const NoiseSchedule& schedule);

  std::size_t dim() const override { return dim_; }
  void predict(std::span<const double> x, int t, std::span<double> eps) const override;

  const GaussianMixture& diffused(int t) const;

 private:
  std::size_t dim_;
  std::vector<GaussianMixture> per_step_;
  std::vector<double> noise_scale_;
};

}  // namespace dnglab

#include "dnglab/score_provider.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dnglab {

AnalyticScoreProvider::AnalyticScoreProvider(const GaussianMixture& data,
                                             const NoiseSchedule& schedule)
    : dim_(data.dim()) {
  per_step_.reserve(static_cast<std::size_t>(schedule.steps()));
  noise_scale_.reserve(static_cast<std::size_t>(schedule.steps()));
  for (int t = 1; t <= schedule.steps(); ++t) {
    const double ab = schedule.alpha_bar(t);
    per_step_.push_back(diffuse_mixture(data, ab));
    noise_scale_.push_back(-std::sqrt(1.0 - ab));
  }
}

const GaussianMixture& AnalyticScoreProvider::diffused(int t) const {
  if (t < 1 || t > static_cast<int>(per_step_.size())) {
    throw std::out_of_range("step " + std::to_string(t) + " out of range");
  }
  return per_step_[static_cast<std::size_t>(t - 1)];
}

void AnalyticScoreProvider::predict(std::span<const double> x, int t,
                                    std::span<double> eps) const {
  score_into(diffused(t), x, eps);
  const double k = noise_scale_[static_cast<std::size_t>(t - 1)];
  for (double& v : eps) v *= k;
}

}  // namespace dnglab

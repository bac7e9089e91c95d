#include "dnglab/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dnglab {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : betas_(std::move(betas)) {
  if (betas_.empty()) throw std::invalid_argument("schedule needs at least one step");
  alphas_.reserve(betas_.size());
  alpha_bars_.reserve(betas_.size());
  double running = 1.0;
  for (std::size_t i = 0; i < betas_.size(); ++i) {
    const double b = betas_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("beta at step " + std::to_string(i + 1) + " is outside (0, 1)");
    }
    alphas_.push_back(1.0 - b);
    running *= 1.0 - b;
    alpha_bars_.push_back(running);
  }
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_min, double beta_max) {
  if (steps < 2) throw std::invalid_argument("linear schedule needs T >= 2");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw std::invalid_argument("linear schedule needs 0 < beta_min <= beta_max < 1");
  }
  std::vector<double> betas(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
    betas[static_cast<std::size_t>(i)] = beta_min + frac * (beta_max - beta_min);
  }
  return NoiseSchedule(std::move(betas));
}

NoiseSchedule NoiseSchedule::rescaled_linear(int steps, double beta_min, double beta_max) {
  const double scale = 1000.0 / static_cast<double>(steps);
  return linear(steps, beta_min * scale, beta_max * scale);
}

std::size_t NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("step " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps()) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bars_[index(t)];
}

Vector forward_sample(std::span<const double> x0, int t, const NoiseSchedule& schedule,
                      std::span<const double> noise) {
  if (x0.size() != noise.size()) throw std::invalid_argument("x0 and noise lengths differ");
  if (t < 1 || t > schedule.steps()) {
    throw std::out_of_range("forward_sample step " + std::to_string(t) + " out of range");
  }
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double s = std::sqrt(1.0 - ab);
  Vector out(x0.size());
  for (std::size_t k = 0; k < x0.size(); ++k) out[k] = a * x0[k] + s * noise[k];
  return out;
}

}  // namespace dnglab

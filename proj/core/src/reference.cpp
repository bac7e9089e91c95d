#include "dnglab/reference.hpp"

namespace dnglab::reference {

MixtureSplit trimodal_mixture() {
  const double w = 1.0 / 3.0;
  return MixtureSplit(GaussianMixture({w, w, w}, {{-6.0}, {0.0}, {6.0}}, {0.25, 0.25, 0.25}), {0});
}

MixtureSplit class_removal_mixture() {
  std::vector<double> w(10, 0.1);
  std::vector<Vector> mu;
  for (int i = 0; i < 10; ++i) mu.push_back({-18.0 + 4.0 * i});
  std::vector<double> var(10, 0.25);
  return MixtureSplit(GaussianMixture(std::move(w), std::move(mu), std::move(var)), {0});
}

MixtureSplit three_point_mixture() {
  const double w = 1.0 / 3.0;
  return MixtureSplit(
      GaussianMixture({w, w, w}, {{-1.0, 1.0}, {1.0, 1.0}, {0.0, -1.0}}, {0.0, 0.0, 0.0}), {2});
}

std::optional<MixtureSplit> by_name(std::string_view name) {
  if (name == "trimodal") return trimodal_mixture();
  if (name == "class_removal") return class_removal_mixture();
  if (name == "three_point") return three_point_mixture();
  return std::nullopt;
}

}  // namespace dnglab::reference

#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace dnglab {

/// Standard-normal stream for one chain, keyed by (seed, chain). The stream
/// depends only on the key, so a batch gives the same chains under any
/// worker count or execution order.
class ChainRng {
 public:
  ChainRng(std::uint64_t seed, std::uint64_t chain);

  double normal() { return normal_(engine_); }
  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace dnglab

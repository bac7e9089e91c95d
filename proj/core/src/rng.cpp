#include "dnglab/rng.hpp"

namespace dnglab {

namespace {

std::mt19937_64 keyed_engine(std::uint64_t seed, std::uint64_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(chain >> 32),
                    0x646e67u};
  return std::mt19937_64(seq);
}

}  // namespace

ChainRng::ChainRng(std::uint64_t seed, std::uint64_t chain)
    : engine_(keyed_engine(seed, chain)), normal_(0.0, 1.0) {}

}  // namespace dnglab

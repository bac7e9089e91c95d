#pragma once

#include <optional>
#include <string_view>

#include "dnglab/mixture.hpp"

namespace dnglab::reference {

/// 1D, modes at -6, 0, +6 with equal weights and variance 0.25; the leftmost
/// mode is forbidden.
MixtureSplit trimodal_mixture();

/// 1D, ten equal-weight modes at -18, -14, ..., +18 with variance 0.25;
/// mode 0 (at -18) is forbidden, so the forbidden prior is 0.1.
MixtureSplit class_removal_mixture();

/// 2D delta peaks: allowed points (-1, 1) and (1, 1) above the forbidden point
/// (0, -1), equal weights. Index 2 is forbidden.
MixtureSplit three_point_mixture();

/// "trimodal", "class_removal" or "three_point"; nullopt for other names.
std::optional<MixtureSplit> by_name(std::string_view name);

}  // namespace dnglab::reference

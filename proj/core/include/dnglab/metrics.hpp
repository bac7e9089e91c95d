#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "dnglab/guidance.hpp"
#include "dnglab/mixture.hpp"
#include "dnglab/sampler.hpp"
#include "dnglab/schedule.hpp"

namespace dnglab {

/// Per-mode sample counts, classified against the clean (t = 0) mixture.
struct ClassHistogram {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  std::vector<std::size_t> forbidden_indices;

  std::size_t forbidden_count() const;
};

ClassHistogram class_histogram(std::span<const Vector> samples, const MixtureSplit& split);

/// 1 - fraction of samples classified into a forbidden mode.
/// Throws std::invalid_argument on empty input.
double safety(std::span<const Vector> samples, const MixtureSplit& split);

/// KL(q || uniform) where q is the histogram renormalized over allowed modes.
/// Forbidden mass is ignored here (it is what safety() reports).
/// Throws std::domain_error when no sample landed in an allowed mode.
double kl_to_ideal(const ClassHistogram& hist);

/// Group-mean posterior curves for the tracker check. Index k of each curve
/// belongs to step t = T - k. Groups: 0 = chains whose final sample is in a
/// forbidden mode, 1 = the rest.
struct TrackingCurves {
  static constexpr std::array<const char*, 2> kGroupNames{"forbidden", "allowed"};

  int steps = 0;
  std::array<std::size_t, 2> group_size{};
  std::array<std::vector<double>, 2> tracked_mean;
  std::array<std::vector<double>, 2> exact_mean;
  /// Mean over steps and non-empty groups of |tracked_mean - exact_mean|.
  double mae = 0.0;
};

/// Streaming form of posterior_tracking_error, so large batches can be
/// processed chunk by chunk without keeping every trajectory in memory.
class TrackingAccumulator {
 public:
  TrackingAccumulator(MixtureSplit split, const NoiseSchedule& schedule);

  /// Throws std::invalid_argument if the record lacks states or posterior traces.
  void add(const TrajectoryRecord& record);
  TrackingCurves finish() const;

 private:
  MixtureSplit split_;
  int steps_;
  std::vector<DiffusedSplit> diffused_;  // entry k belongs to step T - k
  TrackingCurves sums_;
};

/// Throws std::invalid_argument if any record lacks states or posterior traces.
TrackingCurves posterior_tracking_error(std::span<const TrajectoryRecord> records,
                                        const MixtureSplit& split, const NoiseSchedule& schedule);

/// Histogram of 1D samples against an analytic mixture. Only samples inside
/// [lo, hi) are binned; the target is the mixture mass of each bin (from its
/// CDF) renormalized over the range. Target bins are floored at 1e-12 in the KL.
/// With no sample in range the density is all zero and kl is +inf.
struct Histogram1D {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
  std::vector<double> density;      // counts / (n_in_range * width)
  std::vector<double> target_mass;  // renormalized, sums to 1
  std::size_t in_range = 0;
  double kl = 0.0;  // KL(empirical || target)
};

inline constexpr double kHistogramTargetFloor = 1e-12;

Histogram1D histogram_1d(std::span<const double> samples, const GaussianMixture& target,
                         double lo, double hi, std::size_t bins);

/// Mixture CDF in 1D.
double mixture_cdf(const GaussianMixture& gmm, double x);

struct GridSpec {
  double x_min = -2.0, x_max = 2.0;
  double y_min = -2.0, y_max = 2.0;
  std::size_t nx = 41, ny = 41;

  double x_at(std::size_t i) const;
  double y_at(std::size_t j) const;
};

/// Score-space field decomposition on a 2D grid (row-major, x fastest):
/// unconditional score, guidance term, and their sum.
struct FieldGrid {
  GridSpec grid;
  int t = 0;
  Scheme scheme = Scheme::None;
  double lambda0 = 0.0;
  std::vector<std::array<double, 2>> unconditional;
  std::vector<std::array<double, 2>> guidance;
  std::vector<std::array<double, 2>> total;
  std::vector<double> posterior;  // exact p(c-|x_t) at each point

  std::size_t index(std::size_t i, std::size_t j) const { return j * grid.nx + i; }
};

/// Guidance terms: CFG  lambda0 (s_r - s);  NP  -lambda0 (s_f - s);
/// DNG  -lambda0 p/(1-p) (s_f - s) with the exact posterior, evaluated as
/// -lambda0 p (s_f - s_r). Throws
/// std::invalid_argument unless the mixture is 2D and scheme is CFG, NP or DNG_Exact.
FieldGrid field_grid(const MixtureSplit& split, const NoiseSchedule& schedule, int t,
                     Scheme scheme, double lambda0, const GridSpec& grid);

}  // namespace dnglab

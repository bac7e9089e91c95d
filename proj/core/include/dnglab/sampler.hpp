#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dnglab/guidance.hpp"
#include "dnglab/mixture.hpp"
#include "dnglab/schedule.hpp"
#include "dnglab/score_provider.hpp"

namespace dnglab {

struct RunConfig {
  MixtureSplit split;
  NoiseSchedule schedule;
  GuidanceConfig guidance;
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  bool record_trajectories = false;
  bool record_noise = false;

  void validate() const;
};

/// One reverse chain. Per-step arrays are ordered along the reverse loop:
/// entry k belongs to step t = T - k. states has T + 1 entries (x_T ... x_0),
/// the per-step arrays have T.
struct TrajectoryRecord {
  std::size_t chain = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  Vector x0;

  std::vector<Vector> states;
  /// Scale applied at each step. For SLD this is the mean of the elementwise scale.
  std::vector<double> lambda;
  std::vector<Vector> lambda_elementwise;  // SLD only
  /// Posterior used to form lambda at each step (DNG schemes only).
  std::vector<double> posterior;
  std::vector<Vector> eps_uncond;  // record_noise only
  std::vector<Vector> eps_cond;

  bool has_trajectory() const { return !states.empty(); }
  const Vector& state_at(int t) const { return states.at(static_cast<std::size_t>(steps - t)); }
  double lambda_at(int t) const { return lambda.at(static_cast<std::size_t>(steps - t)); }
  double posterior_at(int t) const { return posterior.at(static_cast<std::size_t>(steps - t)); }
};

/// x_{t-1} = (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_t) + sqrt(beta_t) z.
Vector ddpm_step(std::span<const double> x_t, std::span<const double> eps_guided,
                 const NoiseSchedule& schedule, int t, std::span<const double> z);

/// Reverse DDPM sampler with guidance.
///
/// Per step t = T..1: both noise models are evaluated at x_t, the scale is
/// formed from the posterior carried over from the previous step, the guided
/// DDPM step produces x_{t-1}, and only then is the tracker updated with
/// x_{t-1} against the two means predicted from x_t. No noise is injected at
/// t = 1. The conditional model is the allowed mixture for CFG and the
/// forbidden mixture for every other scheme.
class Sampler {
 public:
  /// Analytic noise models built from config.split.
  explicit Sampler(RunConfig config);

  /// External noise models. DNG_Exact is unavailable in this mode because it
  /// needs the analytic posterior.
  Sampler(RunConfig config, std::shared_ptr<const ScoreProvider> uncond,
          std::shared_ptr<const ScoreProvider> cond);

  const RunConfig& config() const { return config_; }

  TrajectoryRecord run_chain(std::size_t chain) const;
  /// Records override for one call (used to trace a few chains of a larger batch).
  TrajectoryRecord run_chain(std::size_t chain, bool record) const;

  /// Chains 0..n_samples-1. workers = 0 picks std::thread::hardware_concurrency().
  std::vector<TrajectoryRecord> run_batch(unsigned workers = 0) const;
  /// Chains first..first+count-1, each seeded exactly as in run_batch.
  std::vector<TrajectoryRecord> run_range(std::size_t first, std::size_t count,
                                          unsigned workers = 0) const;

 private:
  double exact_log_odds_at(std::span<const double> x, int t) const;

  RunConfig config_;
  std::shared_ptr<const ScoreProvider> uncond_;
  std::shared_ptr<const ScoreProvider> cond_;
  std::shared_ptr<const AnalyticScoreProvider> forbidden_;
  std::shared_ptr<const AnalyticScoreProvider> allowed_;
};

TrajectoryRecord run_chain(const RunConfig& config, std::size_t chain);
std::vector<TrajectoryRecord> run_batch(const RunConfig& config, unsigned workers = 0);

/// Final samples of a batch, in chain order.
std::vector<Vector> final_samples(const std::vector<TrajectoryRecord>& records);

}  // namespace dnglab

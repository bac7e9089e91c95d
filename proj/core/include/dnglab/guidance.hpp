#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>

#include "dnglab/mixture.hpp"
#include "dnglab/schedule.hpp"

namespace dnglab {

enum class Scheme { None, CFG, NP, DNG_Exact, DNG_Tracked, SLD };

std::string_view to_string(Scheme scheme);
/// Accepts the enumerator names ("None", "CFG", "NP", "DNG_Exact",
/// "DNG_Tracked", "SLD"); throws std::invalid_argument otherwise.
Scheme parse_scheme(std::string_view name);

/// Safe-latent-diffusion style elementwise guidance. Defaults are the
/// class-removal values (threshold 0.04, scale 100, beta_m 0.2, s_m 0.1).
/// `scale` is the same constant sometimes written s_s.
struct SldConfig {
  double threshold = 0.04;
  double scale = 100.0;
  double momentum_beta = 0.2;
  double momentum_scale = 0.1;
  int warmup_steps = 0;

  void validate() const;
};

struct GuidanceConfig {
  Scheme scheme = Scheme::None;
  double lambda0 = 0.0;
  // Posterior tracker; only DNG_Tracked reads these.
  double prior = 0.25;
  double tau = 0.25;
  double delta = 0.0;
  double p_min = 1e-6;
  double p_max = 0.999;
  std::optional<SldConfig> sld;

  void validate() const;
};

/// Tracker hyperparameters (prior, temperature, offset) for the two dataset
/// regimes. GuidanceConfig defaults to the first.
struct TrackerPreset {
  double prior;
  double tau;
  double delta;
};
inline constexpr TrackerPreset kTrackerPresetMnist{0.25, 0.25, 0.0};
inline constexpr TrackerPreset kTrackerPresetCifar{0.01, 0.2, 0.0002};

/// Tracked log p(c-|x_t). The probability always stays inside [p_min, p_max].
struct PosteriorState {
  double log_p;
  double p_min;
  double p_max;

  static PosteriorState initial(double p0, double p_min, double p_max);
  double probability() const;
};

struct SldState {
  Vector momentum;
  int steps_seen = 0;

  explicit SldState(std::size_t dim) : momentum(dim, 0.0) {}
};

/// lambda0 * p / (1 - p). Throws std::domain_error unless p is in (0, 1).
double dynamic_lambda(double p, double lambda0);

/// Same scale from the log-odds log(p / (1 - p)), which stays accurate when
/// p is within rounding of 0 or 1.
double dynamic_lambda_from_log_odds(double log_odds, double lambda0);

/// CFG: eps_u + lambda (eps_c - eps_u), computed as (1 - lambda) eps_u +
/// lambda eps_c. NP, DNG_Exact, DNG_Tracked:
/// eps_u - lambda (eps_c - eps_u). None returns eps_u. SLD is elementwise and
/// rejected here.
void combine_noise_into(std::span<const double> eps_uncond, std::span<const double> eps_cond,
                        double lambda, Scheme scheme, std::span<double> out);
Vector combine_noise(std::span<const double> eps_uncond, std::span<const double> eps_cond,
                     double lambda, Scheme scheme);

/// Exact-posterior DNG for analytic mixtures, given the three noise
/// predictions and log p/(1-p). Since eps_u = p eps_f + (1 - p) eps_a holds
/// exactly there, eps_u - lambda0 p/(1-p) (eps_f - eps_u) is evaluated as
///   eps_u - lambda0 p (eps_f - eps_a)
/// which keeps full accuracy when p is within rounding of 1.
void exact_dng_noise_into(std::span<const double> eps_uncond, std::span<const double> eps_forbidden,
                          std::span<const double> eps_allowed, double log_odds, double lambda0,
                          std::span<double> out);
Vector exact_dng_noise(std::span<const double> eps_uncond, std::span<const double> eps_forbidden,
                       std::span<const double> eps_allowed, double log_odds, double lambda0);

/// Reverse-transition mean (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) eps) / sqrt(alpha_t).
void mean_from_noise_into(std::span<const double> x_t, std::span<const double> eps,
                          const NoiseSchedule& schedule, int t, std::span<double> out);
Vector mean_from_noise(std::span<const double> x_t, std::span<const double> eps,
                       const NoiseSchedule& schedule, int t);

/// One step of the Markov-chain posterior tracker:
///   log p += -tau / (2 sigma^2) (|x - mu_f|^2 - |x - mu_u|^2) + delta / (2 sigma^2)
/// followed by clamping into [p_min, p_max].
PosteriorState update_posterior(const PosteriorState& state, std::span<const double> x_new,
                                std::span<const double> mu_uncond,
                                std::span<const double> mu_forbidden, double sigma_sq,
                                double tau, double delta);

/// Elementwise SLD scale. With d = eps_u - eps_neg (signed):
///   raw_k = lambda0 * min(1, scale * |d_k|)  if d_k < threshold, else 0
///   momentum <- beta_m * momentum + (1 - beta_m) * raw
///   applied  = raw + s_m * momentum
/// During the first `warmup_steps` calls the applied scale is zero and the
/// momentum is left untouched.
std::pair<Vector, SldState> sld_lambda(std::span<const double> eps_uncond,
                                       std::span<const double> eps_neg, const SldConfig& cfg,
                                       double lambda0, SldState state);

}  // namespace dnglab

#include "dnglab/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dnglab {

namespace {

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": vector lengths differ (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) +
                                ")");
  }
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::None: return "None";
    case Scheme::CFG: return "CFG";
    case Scheme::NP: return "NP";
    case Scheme::DNG_Exact: return "DNG_Exact";
    case Scheme::DNG_Tracked: return "DNG_Tracked";
    case Scheme::SLD: return "SLD";
  }
  return "?";
}

Scheme parse_scheme(std::string_view name) {
  for (Scheme s : {Scheme::None, Scheme::CFG, Scheme::NP, Scheme::DNG_Exact, Scheme::DNG_Tracked,
                   Scheme::SLD}) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown guidance scheme '" + std::string(name) + "'");
}

void SldConfig::validate() const {
  if (!(threshold > 0.0)) throw std::invalid_argument("sld.threshold must be > 0");
  if (!(scale > 0.0)) throw std::invalid_argument("sld.scale must be > 0");
  if (!(momentum_beta >= 0.0 && momentum_beta < 1.0)) {
    throw std::invalid_argument("sld.momentum_beta must lie in [0, 1)");
  }
  if (!std::isfinite(momentum_scale)) throw std::invalid_argument("sld.momentum_scale must be finite");
  if (warmup_steps < 0) throw std::invalid_argument("sld.warmup_steps must be >= 0");
}

void GuidanceConfig::validate() const {
  if (!(lambda0 >= 0.0) || !std::isfinite(lambda0)) {
    throw std::invalid_argument("lambda0 must be finite and >= 0");
  }
  if (!(p_min > 0.0 && p_min <= p_max && p_max < 1.0)) {
    throw std::invalid_argument("clamps must satisfy 0 < p_min <= p_max < 1");
  }
  if (!(prior >= p_min && prior <= p_max)) {
    throw std::invalid_argument("prior must lie in [p_min, p_max]");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in (0, 1]");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw std::invalid_argument("delta must be >= 0");
  if (scheme == Scheme::SLD) {
    if (!sld) throw std::invalid_argument("scheme SLD requires an sld block");
    sld->validate();
  } else if (sld) {
    throw std::invalid_argument("sld block given for a non-SLD scheme");
  }
}

PosteriorState PosteriorState::initial(double p0, double p_min, double p_max) {
  if (!(p_min > 0.0 && p_min <= p_max && p_max < 1.0)) {
    throw std::invalid_argument("clamps must satisfy 0 < p_min <= p_max < 1");
  }
  if (!(p0 >= p_min && p0 <= p_max)) throw std::invalid_argument("p0 must lie in [p_min, p_max]");
  return PosteriorState{std::log(p0), p_min, p_max};
}

double PosteriorState::probability() const {
  return std::clamp(std::exp(log_p), p_min, p_max);
}

double dynamic_lambda(double p, double lambda0) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("dynamic_lambda needs p in (0, 1), got " + std::to_string(p));
  }
  return lambda0 * p / (1.0 - p);
}

double dynamic_lambda_from_log_odds(double log_odds, double lambda0) {
  return lambda0 * std::exp(log_odds);
}

void combine_noise_into(std::span<const double> eps_uncond, std::span<const double> eps_cond,
                        double lambda, Scheme scheme, std::span<double> out) {
  require_same_length(eps_uncond, eps_cond, "combine_noise");
  require_same_length(eps_uncond, out, "combine_noise");
  switch (scheme) {
    case Scheme::None:
      std::copy(eps_uncond.begin(), eps_uncond.end(), out.begin());
      return;
    case Scheme::CFG:
      // convex form: exact at lambda = 0 and lambda = 1
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 - lambda) * eps_uncond[i] + lambda * eps_cond[i];
      }
      return;
    case Scheme::NP:
    case Scheme::DNG_Exact:
    case Scheme::DNG_Tracked:
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = eps_uncond[i] - lambda * (eps_cond[i] - eps_uncond[i]);
      }
      return;
    default: throw std::invalid_argument("combine_noise does not handle elementwise SLD scales");
  }
}

void exact_dng_noise_into(std::span<const double> eps_uncond, std::span<const double> eps_forbidden,
                          std::span<const double> eps_allowed, double log_odds, double lambda0,
                          std::span<double> out) {
  require_same_length(eps_uncond, eps_forbidden, "exact_dng_noise");
  require_same_length(eps_uncond, eps_allowed, "exact_dng_noise");
  require_same_length(eps_uncond, out, "exact_dng_noise");
  if (std::isnan(log_odds)) throw std::domain_error("exact_dng_noise: log-odds is NaN");
  const double p = 1.0 / (1.0 + std::exp(-log_odds));
  const double k = lambda0 * p;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = eps_uncond[i] - k * (eps_forbidden[i] - eps_allowed[i]);
  }
}

Vector exact_dng_noise(std::span<const double> eps_uncond, std::span<const double> eps_forbidden,
                       std::span<const double> eps_allowed, double log_odds, double lambda0) {
  Vector out(eps_uncond.size());
  exact_dng_noise_into(eps_uncond, eps_forbidden, eps_allowed, log_odds, lambda0, out);
  return out;
}

Vector combine_noise(std::span<const double> eps_uncond, std::span<const double> eps_cond,
                     double lambda, Scheme scheme) {
  Vector out(eps_uncond.size());
  combine_noise_into(eps_uncond, eps_cond, lambda, scheme, out);
  return out;
}

void mean_from_noise_into(std::span<const double> x_t, std::span<const double> eps,
                          const NoiseSchedule& schedule, int t, std::span<double> out) {
  require_same_length(x_t, eps, "mean_from_noise");
  require_same_length(x_t, out, "mean_from_noise");
  const double alpha = schedule.alpha(t);
  const double coef = (1.0 - alpha) / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (x_t[i] - coef * eps[i]) * inv_sqrt_alpha;
  }
}

Vector mean_from_noise(std::span<const double> x_t, std::span<const double> eps,
                       const NoiseSchedule& schedule, int t) {
  Vector out(x_t.size());
  mean_from_noise_into(x_t, eps, schedule, t, out);
  return out;
}

PosteriorState update_posterior(const PosteriorState& state, std::span<const double> x_new,
                                std::span<const double> mu_uncond,
                                std::span<const double> mu_forbidden, double sigma_sq,
                                double tau, double delta) {
  if (!(sigma_sq > 0.0)) throw std::domain_error("update_posterior needs sigma_sq > 0");
  require_same_length(x_new, mu_uncond, "update_posterior");
  require_same_length(x_new, mu_forbidden, "update_posterior");
  double dist_f = 0.0;
  double dist_u = 0.0;
  for (std::size_t i = 0; i < x_new.size(); ++i) {
    const double df = x_new[i] - mu_forbidden[i];
    const double du = x_new[i] - mu_uncond[i];
    dist_f += df * df;
    dist_u += du * du;
  }
  const double inv = 1.0 / (2.0 * sigma_sq);
  const double log_p = state.log_p - tau * inv * (dist_f - dist_u) + delta * inv;
  PosteriorState next = state;
  next.log_p = std::clamp(log_p, std::log(state.p_min), std::log(state.p_max));
  return next;
}

std::pair<Vector, SldState> sld_lambda(std::span<const double> eps_uncond,
                                       std::span<const double> eps_neg, const SldConfig& cfg,
                                       double lambda0, SldState state) {
  require_same_length(eps_uncond, eps_neg, "sld_lambda");
  if (state.momentum.size() != eps_uncond.size()) {
    throw std::invalid_argument("sld_lambda: momentum has the wrong length");
  }
  Vector applied(eps_uncond.size(), 0.0);
  const bool warming_up = state.steps_seen < cfg.warmup_steps;
  ++state.steps_seen;
  if (warming_up) return {std::move(applied), std::move(state)};

  for (std::size_t i = 0; i < applied.size(); ++i) {
    const double diff = eps_uncond[i] - eps_neg[i];
    const double raw = diff < cfg.threshold ? lambda0 * std::min(1.0, cfg.scale * std::abs(diff)) : 0.0;
    double& m = state.momentum[i];
    m = cfg.momentum_beta * m + (1.0 - cfg.momentum_beta) * raw;
    applied[i] = raw + cfg.momentum_scale * m;
  }
  return {std::move(applied), std::move(state)};
}

}  // namespace dnglab

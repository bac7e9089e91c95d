#include "dnglab/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "dnglab/rng.hpp"

namespace dnglab {

namespace {

bool tracks_posterior(Scheme s) { return s == Scheme::DNG_Exact || s == Scheme::DNG_Tracked; }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void RunConfig::validate() const {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  guidance.validate();
}

Vector ddpm_step(std::span<const double> x_t, std::span<const double> eps_guided,
                 const NoiseSchedule& schedule, int t, std::span<const double> z) {
  if (z.size() != x_t.size()) throw std::invalid_argument("ddpm_step: z has the wrong length");
  Vector out = mean_from_noise(x_t, eps_guided, schedule, t);
  const double s = std::sqrt(schedule.beta(t));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * z[i];
  return out;
}

Sampler::Sampler(RunConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto& split = config_.split;
  uncond_ = std::make_shared<AnalyticScoreProvider>(split.full(), config_.schedule);
  forbidden_ = std::make_shared<AnalyticScoreProvider>(split.forbidden(), config_.schedule);
  allowed_ = std::make_shared<AnalyticScoreProvider>(split.allowed(), config_.schedule);
  if (config_.guidance.scheme == Scheme::CFG) {
    cond_ = allowed_;
  } else {
    cond_ = forbidden_;
  }
}

Sampler::Sampler(RunConfig config, std::shared_ptr<const ScoreProvider> uncond,
                 std::shared_ptr<const ScoreProvider> cond)
    : config_(std::move(config)), uncond_(std::move(uncond)), cond_(std::move(cond)) {
  config_.validate();
  if (!uncond_ || !cond_) throw std::invalid_argument("noise models must not be null");
  if (uncond_->dim() != config_.split.full().dim() || cond_->dim() != uncond_->dim()) {
    throw std::invalid_argument("noise model dimension does not match the mixture");
  }
  if (config_.guidance.scheme == Scheme::DNG_Exact) {
    throw std::invalid_argument("DNG_Exact needs the analytic mixture noise models");
  }
}

double Sampler::exact_log_odds_at(std::span<const double> x, int t) const {
  const double prior = config_.split.prior();
  return std::log(prior) - std::log1p(-prior) + log_density(forbidden_->diffused(t), x) -
         log_density(allowed_->diffused(t), x);
}

TrajectoryRecord Sampler::run_chain(std::size_t chain) const {
  return run_chain(chain, config_.record_trajectories);
}

TrajectoryRecord Sampler::run_chain(std::size_t chain, bool record) const {
  const auto& g = config_.guidance;
  const auto& schedule = config_.schedule;
  const int steps = schedule.steps();
  const std::size_t d = uncond_->dim();
  const bool needs_cond = g.scheme != Scheme::None;

  TrajectoryRecord rec;
  rec.chain = chain;
  rec.seed = config_.seed;
  rec.steps = steps;
  if (record) {
    const auto n = static_cast<std::size_t>(steps);
    rec.states.reserve(n + 1);
    rec.lambda.reserve(n);
    if (tracks_posterior(g.scheme)) rec.posterior.reserve(n);
  }

  ChainRng rng(config_.seed, chain);
  Vector x(d);
  rng.fill_normal(x);

  Vector eps_u(d), eps_c(d), eps_a(d), eps_g(d), z(d), x_next(d), mu_u(d), mu_f(d);
  Vector scales;
  PosteriorState tracker = PosteriorState::initial(g.prior, g.p_min, g.p_max);
  std::optional<SldState> sld_state;
  if (g.scheme == Scheme::SLD) sld_state.emplace(d);

  for (int t = steps; t >= 1; --t) {
    try {
      if (record) rec.states.push_back(x);
      uncond_->predict(x, t, eps_u);
      if (needs_cond) cond_->predict(x, t, eps_c);

      double lambda = 0.0;
      double post = 0.0;
      switch (g.scheme) {
        case Scheme::None:
          std::copy(eps_u.begin(), eps_u.end(), eps_g.begin());
          break;
        case Scheme::CFG:
        case Scheme::NP:
          lambda = g.lambda0;
          combine_noise_into(eps_u, eps_c, lambda, g.scheme, eps_g);
          break;
        case Scheme::DNG_Tracked:
          post = tracker.probability();
          lambda = dynamic_lambda(post, g.lambda0);
          combine_noise_into(eps_u, eps_c, lambda, g.scheme, eps_g);
          break;
        case Scheme::DNG_Exact: {
          const double lo = exact_log_odds_at(x, t);
          post = 1.0 / (1.0 + std::exp(-lo));
          lambda = dynamic_lambda_from_log_odds(lo, g.lambda0);
          allowed_->predict(x, t, eps_a);
          exact_dng_noise_into(eps_u, eps_c, eps_a, lo, g.lambda0, eps_g);
          break;
        }
        case Scheme::SLD: {
          auto [applied, next] = sld_lambda(eps_u, eps_c, *g.sld, g.lambda0, std::move(*sld_state));
          sld_state = std::move(next);
          for (std::size_t i = 0; i < d; ++i) eps_g[i] = eps_u[i] - applied[i] * (eps_c[i] - eps_u[i]);
          lambda = std::accumulate(applied.begin(), applied.end(), 0.0) / static_cast<double>(d);
          if (record) rec.lambda_elementwise.push_back(std::move(applied));
          break;
        }
      }
      if (record) {
        rec.lambda.push_back(lambda);
        if (tracks_posterior(g.scheme)) rec.posterior.push_back(post);
        if (config_.record_noise) {
          rec.eps_uncond.push_back(eps_u);
          if (needs_cond) rec.eps_cond.push_back(eps_c);
        }
      }

      if (t > 1) {
        rng.fill_normal(z);
      } else {
        std::fill(z.begin(), z.end(), 0.0);
      }
      mean_from_noise_into(x, eps_g, schedule, t, x_next);
      const double noise_scale = std::sqrt(schedule.beta(t));
      for (std::size_t i = 0; i < d; ++i) x_next[i] += noise_scale * z[i];
      if (!all_finite(x_next)) throw std::overflow_error("state became non-finite");

      if (g.scheme == Scheme::DNG_Tracked) {
        mean_from_noise_into(x, eps_u, schedule, t, mu_u);
        mean_from_noise_into(x, eps_c, schedule, t, mu_f);
        tracker = update_posterior(tracker, x_next, mu_u, mu_f, schedule.sigma_sq(t), g.tau, g.delta);
      }
      x.swap(x_next);
    } catch (const std::exception& e) {
      throw std::runtime_error("chain " + std::to_string(chain) + ", step " + std::to_string(t) +
                               ": " + e.what());
    }
  }
  if (record) rec.states.push_back(x);
  rec.x0 = std::move(x);
  return rec;
}

std::vector<TrajectoryRecord> Sampler::run_batch(unsigned workers) const {
  return run_range(0, config_.n_samples, workers);
}

std::vector<TrajectoryRecord> Sampler::run_range(std::size_t first, std::size_t n,
                                                 unsigned workers) const {
  std::vector<TrajectoryRecord> out(n);
  if (n == 0) return out;
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    for (std::size_t i = next++; i < n && !failed; i = next++) {
      try {
        out[i] = run_chain(first + i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

TrajectoryRecord run_chain(const RunConfig& config, std::size_t chain) {
  return Sampler(config).run_chain(chain);
}

std::vector<TrajectoryRecord> run_batch(const RunConfig& config, unsigned workers) {
  return Sampler(config).run_batch(workers);
}

std::vector<Vector> final_samples(const std::vector<TrajectoryRecord>& records) {
  std::vector<Vector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.x0);
  return out;
}

}  // namespace dnglab

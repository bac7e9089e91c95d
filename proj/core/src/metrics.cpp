#include "dnglab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dnglab {

std::size_t ClassHistogram::forbidden_count() const {
  std::size_t n = 0;
  for (std::size_t i : forbidden_indices) n += counts.at(i);
  return n;
}

ClassHistogram class_histogram(std::span<const Vector> samples, const MixtureSplit& split) {
  ClassHistogram h;
  h.counts.assign(split.full().size(), 0);
  h.forbidden_indices = split.forbidden_indices();
  for (const auto& x : samples) {
    ++h.counts[classify_mode(split.full(), x)];
    ++h.total;
  }
  return h;
}

double safety(std::span<const Vector> samples, const MixtureSplit& split) {
  if (samples.empty()) throw std::invalid_argument("safety needs at least one sample");
  const ClassHistogram h = class_histogram(samples, split);
  return 1.0 - static_cast<double>(h.forbidden_count()) / static_cast<double>(h.total);
}

double kl_to_ideal(const ClassHistogram& hist) {
  std::vector<std::size_t> allowed;
  for (std::size_t i = 0; i < hist.counts.size(); ++i) {
    if (std::find(hist.forbidden_indices.begin(), hist.forbidden_indices.end(), i) ==
        hist.forbidden_indices.end()) {
      allowed.push_back(hist.counts[i]);
    }
  }
  std::size_t mass = 0;
  for (std::size_t c : allowed) mass += c;
  if (mass == 0) throw std::domain_error("kl_to_ideal: no sample in an allowed mode");
  const double k = static_cast<double>(allowed.size());
  double kl = 0.0;
  for (std::size_t c : allowed) {
    if (c == 0) continue;
    const double q = static_cast<double>(c) / static_cast<double>(mass);
    kl += q * std::log(q * k);
  }
  return std::max(kl, 0.0);
}

TrackingAccumulator::TrackingAccumulator(MixtureSplit split, const NoiseSchedule& schedule)
    : split_(std::move(split)), steps_(schedule.steps()) {
  const auto n = static_cast<std::size_t>(steps_);
  diffused_.reserve(n);
  for (int t = steps_; t >= 1; --t) diffused_.push_back(diffuse_split(split_, schedule.alpha_bar(t)));
  sums_.steps = steps_;
  for (int g = 0; g < 2; ++g) {
    sums_.tracked_mean[g].assign(n, 0.0);
    sums_.exact_mean[g].assign(n, 0.0);
  }
}

void TrackingAccumulator::add(const TrajectoryRecord& r) {
  const auto n = static_cast<std::size_t>(steps_);
  if (r.steps != steps_ || r.states.size() != n + 1 || r.posterior.size() != n) {
    throw std::invalid_argument("record of chain " + std::to_string(r.chain) +
                                " lacks state or posterior traces");
  }
  const int g = split_.is_forbidden(classify_mode(split_.full(), r.x0)) ? 0 : 1;
  ++sums_.group_size[g];
  for (std::size_t k = 0; k < n; ++k) {
    sums_.tracked_mean[g][k] += r.posterior[k];
    sums_.exact_mean[g][k] += posterior(diffused_[k], r.states[k]);
  }
}

TrackingCurves TrackingAccumulator::finish() const {
  TrackingCurves c = sums_;
  const auto n = static_cast<std::size_t>(steps_);
  double err = 0.0;
  std::size_t terms = 0;
  for (int g = 0; g < 2; ++g) {
    if (c.group_size[g] == 0) continue;
    const double inv = 1.0 / static_cast<double>(c.group_size[g]);
    for (std::size_t k = 0; k < n; ++k) {
      c.tracked_mean[g][k] *= inv;
      c.exact_mean[g][k] *= inv;
      err += std::abs(c.tracked_mean[g][k] - c.exact_mean[g][k]);
      ++terms;
    }
  }
  if (terms == 0) throw std::invalid_argument("posterior_tracking_error needs records");
  c.mae = err / static_cast<double>(terms);
  return c;
}

TrackingCurves posterior_tracking_error(std::span<const TrajectoryRecord> records,
                                        const MixtureSplit& split, const NoiseSchedule& schedule) {
  if (records.empty()) throw std::invalid_argument("posterior_tracking_error needs records");
  TrackingAccumulator acc(split, schedule);
  for (const auto& r : records) acc.add(r);
  return acc.finish();
}

double mixture_cdf(const GaussianMixture& gmm, double x) {
  if (gmm.dim() != 1) throw std::invalid_argument("mixture_cdf needs a 1D mixture");
  double acc = 0.0;
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double mu = gmm.means()[i][0];
    const double var = gmm.variances()[i];
    double cdf;
    if (var <= 0.0) {
      cdf = x >= mu ? 1.0 : 0.0;
    } else {
      cdf = 0.5 * std::erfc(-(x - mu) / std::sqrt(2.0 * var));
    }
    acc += gmm.weights()[i] * cdf;
  }
  return acc;
}

Histogram1D histogram_1d(std::span<const double> samples, const GaussianMixture& target,
                         double lo, double hi, std::size_t bins) {
  if (target.dim() != 1) throw std::invalid_argument("histogram_1d needs a 1D target");
  if (!(hi > lo) || bins == 0) throw std::invalid_argument("histogram_1d needs lo < hi and bins > 0");
  Histogram1D h;
  h.lo = lo;
  h.hi = hi;
  h.counts.assign(bins, 0);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (double x : samples) {
    if (!(x >= lo && x < hi)) continue;
    auto b = static_cast<std::size_t>((x - lo) / width);
    b = std::min(b, bins - 1);
    ++h.counts[b];
    ++h.in_range;
  }

  h.target_mass.resize(bins);
  double prev = mixture_cdf(target, lo);
  double total = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double edge = b + 1 == bins ? hi : lo + static_cast<double>(b + 1) * width;
    const double cur = mixture_cdf(target, edge);
    h.target_mass[b] = std::max(cur - prev, 0.0);
    total += h.target_mass[b];
    prev = cur;
  }
  if (!(total > 0.0)) throw std::invalid_argument("histogram_1d: target has no mass in range");

  h.density.assign(bins, 0.0);
  if (h.in_range == 0) {
    h.kl = std::numeric_limits<double>::infinity();
    return h;
  }
  const double n = static_cast<double>(h.in_range);
  double kl = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    h.target_mass[b] /= total;
    const double q = static_cast<double>(h.counts[b]) / n;
    h.density[b] = q / width;
    if (h.counts[b] == 0) continue;
    kl += q * std::log(q / std::max(h.target_mass[b], kHistogramTargetFloor));
  }
  h.kl = kl;
  return h;
}

double GridSpec::x_at(std::size_t i) const {
  return nx == 1 ? x_min : x_min + (x_max - x_min) * static_cast<double>(i) / static_cast<double>(nx - 1);
}

double GridSpec::y_at(std::size_t j) const {
  return ny == 1 ? y_min : y_min + (y_max - y_min) * static_cast<double>(j) / static_cast<double>(ny - 1);
}

FieldGrid field_grid(const MixtureSplit& split, const NoiseSchedule& schedule, int t,
                     Scheme scheme, double lambda0, const GridSpec& grid) {
  if (split.full().dim() != 2) throw std::invalid_argument("field_grid needs a 2D mixture");
  if (scheme != Scheme::CFG && scheme != Scheme::NP && scheme != Scheme::DNG_Exact) {
    throw std::invalid_argument("field_grid supports CFG, NP and DNG_Exact");
  }
  if (grid.nx == 0 || grid.ny == 0) throw std::invalid_argument("field_grid: empty grid");
  const DiffusedSplit ds = diffuse_split(split, schedule.alpha_bar(t));

  FieldGrid f;
  f.grid = grid;
  f.t = t;
  f.scheme = scheme;
  f.lambda0 = lambda0;
  const std::size_t n = grid.nx * grid.ny;
  f.unconditional.resize(n);
  f.guidance.resize(n);
  f.total.resize(n);
  f.posterior.resize(n);

  Vector s(2), s_cond(2), s_allowed(2);
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const std::array<double, 2> x{grid.x_at(i), grid.y_at(j)};
      const std::size_t k = f.index(i, j);
      score_into(ds.full, x, s);
      f.posterior[k] = posterior(ds, x);
      std::array<double, 2> term{};
      switch (scheme) {
        case Scheme::CFG:
          score_into(ds.allowed, x, s_cond);
          for (int a = 0; a < 2; ++a) term[a] = lambda0 * (s_cond[a] - s[a]);
          break;
        case Scheme::NP:
          score_into(ds.forbidden, x, s_cond);
          for (int a = 0; a < 2; ++a) term[a] = -lambda0 * (s_cond[a] - s[a]);
          break;
        default: {
          score_into(ds.forbidden, x, s_cond);
          score_into(ds.allowed, x, s_allowed);
          // s_f - s = (1 - p)(s_f - s_r)
          const double scale = lambda0 * f.posterior[k];
          for (int a = 0; a < 2; ++a) term[a] = -scale * (s_cond[a] - s_allowed[a]);
          break;
        }
      }
      f.unconditional[k] = {s[0], s[1]};
      f.guidance[k] = term;
      f.total[k] = {s[0] + term[0], s[1] + term[1]};
    }
  }
  return f;
}

}  // namespace dnglab

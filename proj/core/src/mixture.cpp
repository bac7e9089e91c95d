#include "dnglab/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace dnglab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

void check_dim(const GaussianMixture& gmm, std::span<const double> x) {
  if (x.size() != gmm.dim()) {
    throw std::invalid_argument("point has dimension " + std::to_string(x.size()) +
                                ", mixture has dimension " + std::to_string(gmm.dim()));
  }
}

void check_nondegenerate(const GaussianMixture& gmm) {
  if (gmm.degenerate()) {
    throw std::domain_error("mixture has a zero-variance component; diffuse it first");
  }
}

// log w_i + log N(x; mu_i, var_i I); -inf for zero-weight components.
double component_log_term(const GaussianMixture& gmm, std::size_t i,
                          std::span<const double> x, double variance) {
  const double w = gmm.weights()[i];
  if (w <= 0.0) return -std::numeric_limits<double>::infinity();
  const double d = static_cast<double>(gmm.dim());
  return std::log(w) - 0.5 * d * (kLog2Pi + std::log(variance)) -
         0.5 * squared_distance(x, gmm.means()[i]) / variance;
}

GaussianMixture sub_mixture(const GaussianMixture& full, const std::vector<std::size_t>& idx,
                            double total) {
  std::vector<double> w;
  std::vector<Vector> mu;
  std::vector<double> var;
  for (std::size_t i : idx) {
    w.push_back(full.weights()[i] / total);
    mu.push_back(full.means()[i]);
    var.push_back(full.variances()[i]);
  }
  // Renormalization can leave the sum a few ulps off; fold the residue into
  // the largest weight so the sum-to-one invariant holds tightly.
  double sum = 0.0;
  for (double v : w) sum += v;
  auto it = std::max_element(w.begin(), w.end());
  *it += 1.0 - sum;
  return GaussianMixture(std::move(w), std::move(mu), std::move(var));
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                                 std::vector<double> variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  if (weights_.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (means_.size() != weights_.size() || variances_.size() != weights_.size()) {
    throw std::invalid_argument("weights, means and variances must have equal length");
  }
  const std::size_t d = means_.front().size();
  if (d == 0) throw std::invalid_argument("mixture dimension must be positive");
  double sum = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] >= 0.0) || !std::isfinite(weights_[i])) {
      throw std::invalid_argument("weight " + std::to_string(i) + " is negative or not finite");
    }
    if (means_[i].size() != d) {
      throw std::invalid_argument("mean " + std::to_string(i) + " has the wrong dimension");
    }
    for (double m : means_[i]) {
      if (!std::isfinite(m)) throw std::invalid_argument("mean " + std::to_string(i) + " is not finite");
    }
    if (!(variances_[i] >= 0.0) || !std::isfinite(variances_[i])) {
      throw std::invalid_argument("variance " + std::to_string(i) + " is negative or not finite");
    }
    sum += weights_[i];
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("weights must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

bool GaussianMixture::degenerate() const {
  return std::any_of(variances_.begin(), variances_.end(), [](double v) { return v <= 0.0; });
}

GaussianMixture diffuse_mixture(const GaussianMixture& gmm, double alpha_bar) {
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw std::invalid_argument("alpha_bar must lie in [0, 1]");
  }
  const double scale = std::sqrt(alpha_bar);
  std::vector<Vector> means = gmm.means();
  for (auto& m : means) {
    for (double& v : m) v *= scale;
  }
  std::vector<double> variances = gmm.variances();
  for (double& v : variances) v = 1.0 - alpha_bar + alpha_bar * v;
  return GaussianMixture(gmm.weights(), std::move(means), std::move(variances));
}

double log_density(const GaussianMixture& gmm, std::span<const double> x) {
  check_dim(gmm, x);
  check_nondegenerate(gmm);
  double max_term = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double term = component_log_term(gmm, i, x, gmm.variances()[i]);
    if (term == -std::numeric_limits<double>::infinity()) continue;
    if (term > max_term) {
      sum = sum * std::exp(max_term - term) + 1.0;
      max_term = term;
    } else {
      sum += std::exp(term - max_term);
    }
  }
  return max_term + std::log(sum);
}

Vector score(const GaussianMixture& gmm, std::span<const double> x) {
  Vector out(gmm.dim());
  score_into(gmm, x, out);
  return out;
}

void score_into(const GaussianMixture& gmm, std::span<const double> x, std::span<double> out) {
  check_dim(gmm, x);
  check_nondegenerate(gmm);
  if (out.size() != gmm.dim()) throw std::invalid_argument("score output has the wrong length");
  const std::size_t d = gmm.dim();

  // Single pass: responsibilities are accumulated relative to a running
  // maximum, rescaling the partial sums whenever the maximum moves.
  std::fill(out.begin(), out.end(), 0.0);
  double max_term = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double var = gmm.variances()[i];
    const double term = component_log_term(gmm, i, x, var);
    if (term == -std::numeric_limits<double>::infinity()) continue;
    double r;
    if (term > max_term) {
      const double shrink = std::exp(max_term - term);
      sum *= shrink;
      for (double& v : out) v *= shrink;
      max_term = term;
      r = 1.0;
    } else {
      r = std::exp(term - max_term);
    }
    sum += r;
    const auto& mu = gmm.means()[i];
    const double scale = r / var;
    for (std::size_t k = 0; k < d; ++k) out[k] += scale * (mu[k] - x[k]);
  }
  for (double& v : out) v /= sum;
}

Vector noise_from_score(std::span<const double> s, double alpha_bar) {
  if (!(alpha_bar >= 0.0 && alpha_bar < 1.0)) {
    throw std::domain_error("noise/score conversion needs alpha_bar in [0, 1)");
  }
  const double k = -std::sqrt(1.0 - alpha_bar);
  Vector eps(s.begin(), s.end());
  for (double& v : eps) v *= k;
  return eps;
}

Vector score_from_noise(std::span<const double> eps, double alpha_bar) {
  if (!(alpha_bar >= 0.0 && alpha_bar < 1.0)) {
    throw std::domain_error("noise/score conversion needs alpha_bar in [0, 1)");
  }
  const double k = -std::sqrt(1.0 - alpha_bar);
  Vector s(eps.begin(), eps.end());
  for (double& v : s) v /= k;
  return s;
}

std::size_t classify_mode(const GaussianMixture& gmm, std::span<const double> x) {
  check_dim(gmm, x);
  std::size_t best = 0;
  double best_term = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < gmm.size(); ++i) {
    const double var = std::max(gmm.variances()[i], kClassifyVarianceFloor);
    const double term = component_log_term(gmm, i, x, var);
    if (term > best_term) {
      best_term = term;
      best = i;
    }
  }
  return best;
}

MixtureSplit::MixtureSplit(GaussianMixture full, std::vector<std::size_t> forbidden_indices)
    : full_(std::move(full)),
      forbidden_indices_(std::move(forbidden_indices)),
      forbidden_(full_),
      allowed_(full_),
      prior_(0.0) {
  std::sort(forbidden_indices_.begin(), forbidden_indices_.end());
  if (std::adjacent_find(forbidden_indices_.begin(), forbidden_indices_.end()) !=
      forbidden_indices_.end()) {
    throw std::invalid_argument("duplicate forbidden index");
  }
  std::vector<std::size_t> allowed_indices;
  for (std::size_t i = 0; i < full_.size(); ++i) {
    if (!std::binary_search(forbidden_indices_.begin(), forbidden_indices_.end(), i)) {
      allowed_indices.push_back(i);
    }
  }
  if (!forbidden_indices_.empty() && forbidden_indices_.back() >= full_.size()) {
    throw std::invalid_argument("forbidden index " + std::to_string(forbidden_indices_.back()) +
                                " is out of range");
  }
  double w_forbidden = 0.0;
  for (std::size_t i : forbidden_indices_) w_forbidden += full_.weights()[i];
  double w_allowed = 0.0;
  for (std::size_t i : allowed_indices) w_allowed += full_.weights()[i];
  if (!(w_forbidden > 0.0) || !(w_allowed > 0.0)) {
    throw std::invalid_argument("forbidden and allowed parts must both carry positive weight");
  }
  forbidden_ = sub_mixture(full_, forbidden_indices_, w_forbidden);
  allowed_ = sub_mixture(full_, allowed_indices, w_allowed);
  prior_ = w_forbidden;
}

bool MixtureSplit::is_forbidden(std::size_t mode) const {
  return std::binary_search(forbidden_indices_.begin(), forbidden_indices_.end(), mode);
}

MixtureSplit MixtureSplit::complement() const {
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < full_.size(); ++i) {
    if (!is_forbidden(i)) others.push_back(i);
  }
  return MixtureSplit(full_, std::move(others));
}

DiffusedSplit diffuse_split(const MixtureSplit& split, double alpha_bar) {
  return DiffusedSplit{diffuse_mixture(split.full(), alpha_bar),
                       diffuse_mixture(split.forbidden(), alpha_bar),
                       diffuse_mixture(split.allowed(), alpha_bar), split.prior()};
}

double log_odds(const DiffusedSplit& split, std::span<const double> x) {
  return std::log(split.prior) - std::log1p(-split.prior) + log_density(split.forbidden, x) -
         log_density(split.allowed, x);
}

double posterior(const DiffusedSplit& split, std::span<const double> x) {
  const double p =
      std::exp(std::log(split.prior) + log_density(split.forbidden, x) - log_density(split.full, x));
  return std::clamp(p, 0.0, 1.0);
}

double exact_log_odds(const MixtureSplit& split, std::span<const double> x, double alpha_bar) {
  return log_odds(diffuse_split(split, alpha_bar), x);
}

double exact_posterior(const MixtureSplit& split, std::span<const double> x, double alpha_bar) {
  return posterior(diffuse_split(split, alpha_bar), x);
}

}  // namespace dnglab

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dnglab {

using Vector = std::vector<double>;

/// Isotropic Gaussian mixture  p(x) = sum_i w_i N(x; mu_i, var_i I).
///
/// Used for the data distribution, for the forbidden/allowed sub-mixtures and
/// for their diffused versions. A zero variance denotes a delta peak; such a
/// mixture has no density until it is diffused.
class GaussianMixture {
 public:
  /// Throws std::invalid_argument unless the weights are non-negative and sum
  /// to one within 1e-12, all lists are non-empty with equal length, every
  /// mean has the same dimension and every variance is >= 0.
  GaussianMixture(std::vector<double> weights, std::vector<Vector> means,
                  std::vector<double> variances);

  std::size_t dim() const { return means_.front().size(); }
  std::size_t size() const { return weights_.size(); }

  const std::vector<double>& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<double>& variances() const { return variances_; }

  bool degenerate() const;

 private:
  std::vector<double> weights_;
  std::vector<Vector> means_;
  std::vector<double> variances_;
};

/// Closed-form marginal of the variance-preserving forward process:
/// means scale by sqrt(alpha_bar), variances become 1 - alpha_bar + alpha_bar * var.
GaussianMixture diffuse_mixture(const GaussianMixture& gmm, double alpha_bar);

/// log sum_i w_i N(x; mu_i, var_i I), evaluated with log-sum-exp.
/// Throws std::domain_error for degenerate mixtures.
double log_density(const GaussianMixture& gmm, std::span<const double> x);

/// Exact score  grad_x log p(x) = sum_i r_i(x) (mu_i - x) / var_i.
Vector score(const GaussianMixture& gmm, std::span<const double> x);

/// Allocation-free variant of score(); `out` must have length dim().
void score_into(const GaussianMixture& gmm, std::span<const double> x,
                std::span<double> out);

/// eps = -sqrt(1 - alpha_bar) * s. Throws std::domain_error for alpha_bar >= 1.
Vector noise_from_score(std::span<const double> s, double alpha_bar);
Vector score_from_noise(std::span<const double> eps, double alpha_bar);

/// Index of the component with the largest log w_i + log N(x; mu_i, var_i I).
/// Zero variances are floored at kClassifyVarianceFloor. Ties go to the lowest index.
std::size_t classify_mode(const GaussianMixture& gmm, std::span<const double> x);

inline constexpr double kClassifyVarianceFloor = 1e-6;

/// A mixture partitioned into forbidden components and allowed components.
///
/// The forbidden and allowed sub-mixtures carry the original weights
/// renormalized within each part; prior() is the total forbidden weight.
class MixtureSplit {
 public:
  /// Throws std::invalid_argument if an index is out of range or duplicated,
  /// or if either part ends up with zero total weight.
  MixtureSplit(GaussianMixture full, std::vector<std::size_t> forbidden_indices);

  const GaussianMixture& full() const { return full_; }
  const GaussianMixture& forbidden() const { return forbidden_; }
  const GaussianMixture& allowed() const { return allowed_; }
  const std::vector<std::size_t>& forbidden_indices() const { return forbidden_indices_; }
  double prior() const { return prior_; }
  bool is_forbidden(std::size_t mode) const;

  /// The same mixture with forbidden and allowed roles swapped.
  MixtureSplit complement() const;

 private:
  GaussianMixture full_;
  std::vector<std::size_t> forbidden_indices_;
  GaussianMixture forbidden_;
  GaussianMixture allowed_;
  double prior_;
};

/// A split diffused to one noise level, so repeated posterior queries at the
/// same step skip re-diffusing the mixtures.
struct DiffusedSplit {
  GaussianMixture full;
  GaussianMixture forbidden;
  GaussianMixture allowed;
  double prior;
};

DiffusedSplit diffuse_split(const MixtureSplit& split, double alpha_bar);
double log_odds(const DiffusedSplit& split, std::span<const double> x);
double posterior(const DiffusedSplit& split, std::span<const double> x);

/// log [ p(c-|x) / (1 - p(c-|x)) ] at noise level alpha_bar, i.e.
/// log prior + log p_f,t(x) - log(1 - prior) - log p_r,t(x).
double exact_log_odds(const MixtureSplit& split, std::span<const double> x,
                      double alpha_bar);

/// Bayes posterior p(c-|x_t) = prior * p_f,t(x) / p_t(x), in [0, 1].
double exact_posterior(const MixtureSplit& split, std::span<const double> x,
                       double alpha_bar);

}  // namespace dnglab

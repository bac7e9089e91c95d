#pragma once

// Reference computations for the tests. Nothing here calls into dnglab's
// numerics: densities, scores and posteriors are recomputed from the raw
// mixture parameters in long double.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dnglab/mixture.hpp"

namespace oracle {

using dnglab::GaussianMixture;
using dnglab::MixtureSplit;
using dnglab::Vector;

/// Component parameters after forward diffusion, recomputed by hand.
struct Components {
  std::vector<long double> w;
  std::vector<std::vector<long double>> mu;
  std::vector<long double> var;
};

Components diffused(const GaussianMixture& g, long double alpha_bar);

/// Direct sum  sum_i w_i N(x; mu_i, var_i I)  in long double (no log-sum-exp).
long double density(const Components& c, std::span<const double> x);
long double log_density(const Components& c, std::span<const double> x);

/// Five-point central differences of log_density, step h per coordinate.
std::vector<long double> fd_score(const Components& c, std::span<const double> x, double h = 1e-3);

/// prior * p_f / (prior * p_f + (1 - prior) * p_r) from hand-diffused components.
long double posterior(const MixtureSplit& split, std::span<const double> x, long double alpha_bar);

/// Score of the allowed mixture, summed directly.
std::vector<long double> score(const Components& c, std::span<const double> x);

/// Adaptive Gauss-Kronrod integral of a 1D mixture density over the real line.
double integrate_density_1d(const GaussianMixture& g, double alpha_bar);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> v);

/// Kolmogorov-Smirnov statistic of the samples against `cdf`.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
/// Asymptotic p-value of D for n samples (Stephens' small-sample correction).
double ks_pvalue(double d, std::size_t n);

/// |count - n p| <= 3 sqrt(n p (1 - p)).
bool within_3_sigma(std::size_t count, std::size_t n, double p);

/// Random isotropic mixture with 2..5 components in `dim` dimensions and a
/// non-trivial forbidden subset.
MixtureSplit random_split(std::mt19937_64& rng, std::size_t dim);
/// Draw from the mixture diffused to alpha_bar.
Vector sample_diffused(std::mt19937_64& rng, const GaussianMixture& g, double alpha_bar);

double relative_error(std::span<const double> got, std::span<const long double> want);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& p);

}  // namespace oracle

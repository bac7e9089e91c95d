#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

Components diffused(const GaussianMixture& g, long double alpha_bar) {
  Components c;
  const long double s = std::sqrt(alpha_bar);
  for (std::size_t i = 0; i < g.size(); ++i) {
    c.w.push_back(g.weights()[i]);
    std::vector<long double> m;
    for (double v : g.means()[i]) m.push_back(s * v);
    c.mu.push_back(std::move(m));
    c.var.push_back(1.0L - alpha_bar + alpha_bar * g.variances()[i]);
  }
  return c;
}

long double density(const Components& c, std::span<const double> x) {
  const auto d = static_cast<long double>(x.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < c.w.size(); ++i) {
    long double r2 = 0.0L;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const long double diff = x[k] - c.mu[i][k];
      r2 += diff * diff;
    }
    total += c.w[i] * std::exp(-0.5L * r2 / c.var[i]) /
             std::pow(2.0L * std::numbers::pi_v<long double> * c.var[i], d / 2.0L);
  }
  return total;
}

long double log_density(const Components& c, std::span<const double> x) {
  return std::log(density(c, x));
}

std::vector<long double> fd_score(const Components& c, std::span<const double> x, double h) {
  std::vector<long double> g(x.size());
  std::vector<double> y(x.begin(), x.end());
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto at = [&](double offset) {
      y[k] = x[k] + offset;
      const long double v = log_density(c, y);
      y[k] = x[k];
      return v;
    };
    g[k] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0L * h);
  }
  return g;
}

std::vector<long double> score(const Components& c, std::span<const double> x) {
  const auto d = static_cast<long double>(x.size());
  std::vector<long double> num(x.size(), 0.0L);
  long double den = 0.0L;
  for (std::size_t i = 0; i < c.w.size(); ++i) {
    long double r2 = 0.0L;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const long double diff = x[k] - c.mu[i][k];
      r2 += diff * diff;
    }
    const long double p = c.w[i] * std::exp(-0.5L * r2 / c.var[i]) /
                          std::pow(2.0L * std::numbers::pi_v<long double> * c.var[i], d / 2.0L);
    den += p;
    for (std::size_t k = 0; k < x.size(); ++k) num[k] += p * (c.mu[i][k] - x[k]) / c.var[i];
  }
  for (auto& v : num) v /= den;
  return num;
}

long double posterior(const MixtureSplit& split, std::span<const double> x, long double alpha_bar) {
  const GaussianMixture& full = split.full();
  const Components all = diffused(full, alpha_bar);
  long double pf = 0.0L, pt = 0.0L;
  for (std::size_t i = 0; i < full.size(); ++i) {
    Components one;
    one.w = {1.0L};
    one.mu = {all.mu[i]};
    one.var = {all.var[i]};
    const long double term = all.w[i] * density(one, x);
    pt += term;
    if (split.is_forbidden(i)) pf += term;
  }
  return pf / pt;
}

double integrate_density_1d(const GaussianMixture& g, double alpha_bar) {
  const Components c = diffused(g, alpha_bar);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < c.w.size(); ++i) {
    const double sd = std::sqrt(static_cast<double>(c.var[i]));
    lo = std::min(lo, static_cast<double>(c.mu[i][0]) - 40 * sd);
    hi = std::max(hi, static_cast<double>(c.mu[i][0]) + 40 * sd);
  }
  auto f = [&](double x) {
    const double xs[1] = {x};
    return static_cast<double>(density(c, xs));
  };
  // Split at the means so no narrow peak falls between nodes.
  std::vector<double> cuts{lo, hi};
  for (const auto& m : c.mu) cuts.push_back(static_cast<double>(m[0]));
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> parts;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] > cuts[i]) {
      parts.push_back(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
          f, cuts[i], cuts[i + 1], 15, 1e-10));
    }
  }
  return compensated_sum(parts);
}

double compensated_sum(std::span<const double> v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      comp += (sum - t) + x;
    } else {
      comp += (x - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

bool within_3_sigma(std::size_t count, std::size_t n, double p) {
  const double mean = static_cast<double>(n) * p;
  const double sd = std::sqrt(static_cast<double>(n) * p * (1.0 - p));
  return std::abs(static_cast<double>(count) - mean) <= 3.0 * sd;
}

MixtureSplit random_split(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_int_distribution<std::size_t> count(2, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> loc(-3.0, 3.0);
  const std::size_t k = count(rng);
  std::vector<double> w(k);
  double total = 0.0;
  for (double& v : w) total += (v = 0.1 + unit(rng));
  for (double& v : w) v /= total;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) sum += w[i];
  w.back() = 1.0 - sum;
  std::vector<Vector> mu(k, Vector(dim));
  for (auto& m : mu) {
    for (double& v : m) v = loc(rng);
  }
  std::vector<double> var(k);
  for (double& v : var) v = 0.05 + unit(rng);
  std::vector<std::size_t> forbidden;
  std::uniform_int_distribution<std::size_t> nf(1, k - 1);
  const std::size_t m = nf(rng);
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  forbidden.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m));
  return MixtureSplit(GaussianMixture(std::move(w), std::move(mu), std::move(var)), forbidden);
}

Vector sample_diffused(std::mt19937_64& rng, const GaussianMixture& g, double alpha_bar) {
  std::discrete_distribution<std::size_t> pick(g.weights().begin(), g.weights().end());
  std::normal_distribution<double> z;
  const std::size_t i = pick(rng);
  const double sd = std::sqrt(1.0 - alpha_bar + alpha_bar * g.variances()[i]);
  Vector x(g.dim());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::sqrt(alpha_bar) * g.means()[i][k] + sd * z(rng);
  return x;
}

double relative_error(std::span<const double> got, std::span<const long double> want) {
  long double num = 0.0L, den = 0.0L;
  for (std::size_t k = 0; k < got.size(); ++k) {
    num += (got[k] - want[k]) * (got[k] - want[k]);
    den += want[k] * want[k];
  }
  return static_cast<double>(std::sqrt(num) / std::sqrt(den));
}

TempDir::TempDir(const std::string& tag) {
  static std::mt19937_64 rng{std::random_device{}()};
  path_ = std::filesystem::temp_directory_path() / ("dnglab_" + tag + "_" + std::to_string(rng()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace oracle

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnglab/guidance.hpp"
#include "dnglab/metrics.hpp"
#include "dnglab/mixture.hpp"

namespace dnglab {

enum class ExperimentKind { Fig1d, PosteriorCheck, ClassRemovalSweep, Fields2d };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

/// Configuration error naming the offending key path (e.g. "guidance.lambda0").
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Fig1d;
  MixtureSplit split;

  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;

  std::vector<Scheme> schemes{};
  /// lambda0 grid per scheme; every listed scheme has an entry.
  std::map<Scheme, std::vector<double>> lambda0{};
  /// Tracker/SLD hyperparameters shared by all arms (scheme and lambda0 are
  /// filled per run).
  GuidanceConfig guidance{};

  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::filesystem::path output = "out";
  unsigned workers = 0;
  std::size_t trace_chains = 8;

  double hist_lo = -10.0;
  double hist_hi = 10.0;
  std::size_t hist_bins = 200;

  int field_t = 250;
  GridSpec grid{-4.0, 4.0, -4.0, 4.0, 81, 81};

  NoiseSchedule schedule() const;
  /// Guidance block for one arm; SLD settings only attach to the SLD arm.
  GuidanceConfig guidance_for(Scheme scheme, double lambda0) const;
};

/// Built-in defaults for a kind (reference mixture, schemes, lambda grid).
ExperimentConfig default_experiment_config(ExperimentKind kind);

/// Strict JSON parsing on top of the kind's defaults; unknown keys and
/// invalid values throw ConfigError. When `expected` is given the file's
/// "kind" must match it (or be absent).
ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         std::optional<ExperimentKind> expected = std::nullopt);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<ExperimentKind> expected = std::nullopt);

/// One line of a run summary, keyed by (experiment, scheme, lambda0).
struct SummaryRow {
  std::string experiment;
  std::string scheme;
  double lambda0 = 0.0;
  std::map<std::string, double> metrics;
};

struct ExperimentResult {
  std::vector<std::filesystem::path> files;
  std::vector<SummaryRow> rows;
  std::filesystem::path summary_path;
};

/// Runs the experiment and writes its artifacts under config.output. Files
/// written before a failure are removed again.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct SummaryTable {
  std::vector<SummaryRow> rows;
  std::vector<std::string> problems;  // missing/corrupt summaries, duplicates
  std::size_t summaries_read = 0;
};

/// Merges every summary.json below `dir` into one table sorted by
/// (experiment, scheme, lambda0) and writes it to dir/summary.csv.
SummaryTable summarize(const std::filesystem::path& dir);

/// Column order of summary.csv.
inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols{"experiment", "scheme",   "lambda0",
                                             "safety",     "kl_to_ideal", "hist_kl",
                                             "forbidden_mass", "mae",  "n_samples",
                                             "seed"};
  return cols;
}

/// %.17g formatting used for every floating-point CSV field.
std::string format_double(double v);

}  // namespace dnglab

// dnglab: desk-scale guidance experiments on analytic Gaussian mixtures.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dnglab/experiment.hpp"

namespace {

constexpr const char* kOutputEnv = "DNGLAB_OUTPUT_DIR";

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> samples;
  std::optional<unsigned> workers;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "Base RNG seed");
  cmd->add_option("--out", flags.out, "Output directory");
  cmd->add_option("--samples", flags.samples, "Chains per arm")->check(CLI::PositiveNumber);
  cmd->add_option("--workers", flags.workers, "Worker threads (0 = hardware concurrency)");
}

int run(dnglab::ExperimentKind kind, const RunFlags& flags) {
  using namespace dnglab;
  ExperimentConfig cfg = flags.config.empty() ? default_experiment_config(kind)
                                              : load_experiment_config(flags.config, kind);
  // precedence: flag > environment > config file
  if (const char* env = std::getenv(kOutputEnv); env && *env) cfg.output = env;
  if (flags.out) cfg.output = *flags.out;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.samples) cfg.samples = *flags.samples;
  if (flags.workers) cfg.workers = *flags.workers;

  const ExperimentResult result = run_experiment(cfg);
  std::cout << to_string(kind) << ": wrote " << result.files.size() << " files to "
            << cfg.output.string() << '\n';
  for (const auto& row : result.rows) {
    std::cout << "  " << row.scheme << " lambda0=" << format_double(row.lambda0);
    for (const auto& [k, v] : row.metrics) std::cout << ' ' << k << '=' << format_double(v);
    std::cout << '\n';
  }
  return 0;
}

int summarize_dir(const std::string& dir) {
  const dnglab::SummaryTable table = dnglab::summarize(dir);
  if (table.summaries_read == 0 && table.problems.empty()) {
    std::cerr << "warning: no summaries found under " << dir << '\n';
  }
  for (const auto& p : table.problems) std::cerr << "skipped " << p << '\n';
  std::cout << table.rows.size() << " rows from " << table.summaries_read << " summaries -> "
            << (std::filesystem::path(dir) / "summary.csv").string() << '\n';
  return table.problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic negative guidance experiments on Gaussian mixtures"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    dnglab::ExperimentKind kind;
  };
  const Sub subs[] = {
      {"fig1d", "1D sample histograms for None/CFG/NP/DNG", dnglab::ExperimentKind::Fig1d},
      {"posterior-check", "Tracked vs exact posterior at zero guidance", dnglab::ExperimentKind::PosteriorCheck},
      {"class-removal", "Safety/KL sweep over lambda0", dnglab::ExperimentKind::ClassRemovalSweep},
      {"fields2d", "2D guidance field grids", dnglab::ExperimentKind::Fields2d},
  };
  RunFlags flags;
  std::optional<dnglab::ExperimentKind> chosen;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_run_flags(cmd, flags);
    cmd->callback([&chosen, kind = s.kind] { chosen = kind; });
  }
  std::string summary_dir;
  auto* sum = app.add_subcommand("summarize", "Merge summary.json files below DIR into DIR/summary.csv");
  sum->add_option("dir", summary_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (chosen) return run(*chosen, flags);
    return summarize_dir(summary_dir);
  } catch (const dnglab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

#include "dnglab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "dnglab/reference.hpp"
#include "dnglab/sampler.hpp"

namespace dnglab {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Fig1d: return "fig1d";
    case ExperimentKind::PosteriorCheck: return "posterior_check";
    case ExperimentKind::ClassRemovalSweep: return "class_removal_sweep";
    case ExperimentKind::Fields2d: return "fields2d";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::Fig1d, ExperimentKind::PosteriorCheck,
                 ExperimentKind::ClassRemovalSweep, ExperimentKind::Fields2d}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("kind", "unknown experiment kind '" + std::string(name) + "'");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

NoiseSchedule ExperimentConfig::schedule() const {
  return NoiseSchedule::linear(steps, beta_min, beta_max);
}

GuidanceConfig ExperimentConfig::guidance_for(Scheme scheme, double lambda) const {
  GuidanceConfig g = guidance;
  g.scheme = scheme;
  g.lambda0 = lambda;
  if (scheme == Scheme::SLD) {
    if (!g.sld) g.sld = SldConfig{};
  } else {
    g.sld.reset();
  }
  return g;
}

ExperimentConfig default_experiment_config(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Fig1d: {
      ExperimentConfig c{.kind = kind, .split = reference::trimodal_mixture()};
      c.schemes = {Scheme::None, Scheme::CFG, Scheme::NP, Scheme::DNG_Exact};
      for (Scheme s : c.schemes) c.lambda0[s] = {1.0};
      c.samples = 100000;
      c.output = "out/fig1d";
      return c;
    }
    case ExperimentKind::PosteriorCheck: {
      ExperimentConfig c{.kind = kind, .split = reference::trimodal_mixture()};
      c.schemes = {Scheme::DNG_Tracked};
      c.lambda0[Scheme::DNG_Tracked] = {0.0};
      c.guidance.prior = c.split.prior();
      c.guidance.tau = 1.0;
      c.guidance.delta = 0.0;
      c.beta_max = 0.05;
      c.samples = 10000;
      c.output = "out/posterior_check";
      return c;
    }
    case ExperimentKind::ClassRemovalSweep: {
      ExperimentConfig c{.kind = kind, .split = reference::class_removal_mixture()};
      c.schemes = {Scheme::NP, Scheme::DNG_Tracked};
      c.lambda0[Scheme::NP] = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
      c.lambda0[Scheme::DNG_Tracked] = {1.0, 2.0, 5.0, 10.0, 20.0};
      c.guidance.prior = 0.1;
      c.guidance.tau = 0.25;
      c.guidance.delta = 0.0;
      c.samples = 10000;
      c.output = "out/class_removal";
      return c;
    }
    case ExperimentKind::Fields2d: {
      ExperimentConfig c{.kind = kind, .split = reference::three_point_mixture()};
      c.schemes = {Scheme::CFG, Scheme::NP, Scheme::DNG_Exact};
      for (Scheme s : c.schemes) c.lambda0[s] = {2.0};
      c.samples = 1;
      c.output = "out/fields2d";
      return c;
    }
  }
  throw std::logic_error("unhandled experiment kind");
}

// ---------------------------------------------------------------------------
// Strict JSON parsing

namespace {

std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(join_key(path, key), "unknown key");
    }
  }
}

double as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError(key, "expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key, "expected an integer");
  return v.get<std::int64_t>();
}

std::size_t as_count(const json& v, const std::string& key) {
  const auto n = as_integer(v, key);
  if (n < 0) throw ConfigError(key, "must be >= 0");
  return static_cast<std::size_t>(n);
}

std::vector<double> as_number_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

std::pair<double, double> as_range(const json& v, const std::string& key) {
  const auto r = as_number_list(v, key);
  if (r.size() != 2 || !(r[0] < r[1])) throw ConfigError(key, "expected [lo, hi] with lo < hi");
  return {r[0], r[1]};
}

Scheme as_scheme(const json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key, "expected a scheme name");
  try {
    return parse_scheme(v.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

MixtureSplit parse_mixture(const json& v) {
  if (v.is_string()) {
    auto named = reference::by_name(v.get<std::string>());
    if (!named) throw ConfigError("mixture", "unknown reference mixture '" + v.get<std::string>() + "'");
    return *named;
  }
  check_keys(v, "mixture", {"weights", "means", "variances", "forbidden"});
  for (const char* k : {"weights", "means", "variances", "forbidden"}) {
    if (!v.contains(k)) throw ConfigError(std::string("mixture.") + k, "missing");
  }
  auto weights = as_number_list(v["weights"], "mixture.weights");
  auto variances = as_number_list(v["variances"], "mixture.variances");
  const json& jm = v["means"];
  if (!jm.is_array()) throw ConfigError("mixture.means", "expected an array");
  std::vector<Vector> means;
  for (std::size_t i = 0; i < jm.size(); ++i) {
    const std::string key = "mixture.means[" + std::to_string(i) + "]";
    if (jm[i].is_number()) {
      means.push_back({jm[i].get<double>()});
    } else {
      means.push_back(as_number_list(jm[i], key));
    }
  }
  const json& jf = v["forbidden"];
  if (!jf.is_array()) throw ConfigError("mixture.forbidden", "expected an array of mode indices");
  std::vector<std::size_t> forbidden;
  for (std::size_t i = 0; i < jf.size(); ++i) {
    forbidden.push_back(as_count(jf[i], "mixture.forbidden[" + std::to_string(i) + "]"));
  }
  try {
    return MixtureSplit(GaussianMixture(std::move(weights), std::move(means), std::move(variances)),
                        std::move(forbidden));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("mixture", e.what());
  }
}

void parse_guidance(const json& g, ExperimentConfig& c, bool& prior_given) {
  check_keys(g, "guidance", {"schemes", "lambda0", "prior", "tau", "delta", "p_min", "p_max", "sld"});
  if (g.contains("schemes")) {
    const json& js = g["schemes"];
    if (!js.is_array() || js.empty()) throw ConfigError("guidance.schemes", "expected a non-empty array");
    c.schemes.clear();
    for (std::size_t i = 0; i < js.size(); ++i) {
      const Scheme s = as_scheme(js[i], "guidance.schemes[" + std::to_string(i) + "]");
      if (std::find(c.schemes.begin(), c.schemes.end(), s) != c.schemes.end()) {
        throw ConfigError("guidance.schemes", "duplicate scheme " + std::string(to_string(s)));
      }
      c.schemes.push_back(s);
    }
  }
  if (g.contains("lambda0")) {
    const json& jl = g["lambda0"];
    c.lambda0.clear();
    if (jl.is_number()) {
      for (Scheme s : c.schemes) c.lambda0[s] = {jl.get<double>()};
    } else if (jl.is_array()) {
      auto grid = as_number_list(jl, "guidance.lambda0");
      if (grid.empty()) throw ConfigError("guidance.lambda0", "must not be empty");
      for (Scheme s : c.schemes) c.lambda0[s] = grid;
    } else if (jl.is_object()) {
      for (const auto& [name, list] : jl.items()) {
        const std::string key = "guidance.lambda0." + name;
        Scheme s;
        try {
          s = parse_scheme(name);
        } catch (const std::invalid_argument& e) {
          throw ConfigError(key, e.what());
        }
        if (std::find(c.schemes.begin(), c.schemes.end(), s) == c.schemes.end()) {
          throw ConfigError(key, "scheme is not listed in guidance.schemes");
        }
        auto grid = list.is_number() ? std::vector<double>{list.get<double>()} : as_number_list(list, key);
        if (grid.empty()) throw ConfigError(key, "must not be empty");
        c.lambda0[s] = std::move(grid);
      }
    } else {
      throw ConfigError("guidance.lambda0", "expected a number, an array or a per-scheme object");
    }
  }
  for (Scheme s : c.schemes) {
    auto it = c.lambda0.find(s);
    if (it == c.lambda0.end()) {
      throw ConfigError("guidance.lambda0", "no lambda0 grid for scheme " + std::string(to_string(s)));
    }
    if (it->second.empty()) throw ConfigError("guidance.lambda0", "must not be empty");
    for (double l : it->second) {
      if (!(l >= 0.0) || !std::isfinite(l)) throw ConfigError("guidance.lambda0", "values must be finite and >= 0");
    }
  }
  if (g.contains("prior")) {
    c.guidance.prior = as_number(g["prior"], "guidance.prior");
    prior_given = true;
  }
  if (g.contains("tau")) c.guidance.tau = as_number(g["tau"], "guidance.tau");
  if (g.contains("delta")) c.guidance.delta = as_number(g["delta"], "guidance.delta");
  if (g.contains("p_min")) c.guidance.p_min = as_number(g["p_min"], "guidance.p_min");
  if (g.contains("p_max")) c.guidance.p_max = as_number(g["p_max"], "guidance.p_max");
  if (g.contains("sld")) {
    const json& js = g["sld"];
    check_keys(js, "guidance.sld", {"threshold", "scale", "momentum_beta", "momentum_scale", "warmup_steps"});
    SldConfig sld;
    if (js.contains("threshold")) sld.threshold = as_number(js["threshold"], "guidance.sld.threshold");
    if (js.contains("scale")) sld.scale = as_number(js["scale"], "guidance.sld.scale");
    if (js.contains("momentum_beta")) sld.momentum_beta = as_number(js["momentum_beta"], "guidance.sld.momentum_beta");
    if (js.contains("momentum_scale")) sld.momentum_scale = as_number(js["momentum_scale"], "guidance.sld.momentum_scale");
    if (js.contains("warmup_steps")) {
      sld.warmup_steps = static_cast<int>(as_integer(js["warmup_steps"], "guidance.sld.warmup_steps"));
    }
    try {
      sld.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("guidance.sld", e.what());
    }
    c.guidance.sld = sld;
  }
}

void validate_config(const ExperimentConfig& c) {
  try {
    (void)c.schedule();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("schedule", e.what());
  }
  if (c.samples < 1) throw ConfigError("samples", "must be >= 1");
  if (c.schemes.empty()) throw ConfigError("guidance.schemes", "must not be empty");
  for (Scheme s : c.schemes) {
    for (double l : c.lambda0.at(s)) {
      try {
        c.guidance_for(s, l).validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError("guidance", e.what());
      }
    }
  }
  const std::size_t dim = c.split.full().dim();
  switch (c.kind) {
    case ExperimentKind::Fig1d:
      if (dim != 1) throw ConfigError("mixture", "fig1d needs a 1D mixture");
      if (!(c.hist_lo < c.hist_hi) || c.hist_bins == 0) {
        throw ConfigError("histogram", "needs lo < hi and bins > 0");
      }
      break;
    case ExperimentKind::PosteriorCheck:
      if (c.schemes.size() != 1 || c.schemes.front() != Scheme::DNG_Tracked) {
        throw ConfigError("guidance.schemes", "posterior_check runs the DNG_Tracked tracker only");
      }
      break;
    case ExperimentKind::ClassRemovalSweep:
      break;
    case ExperimentKind::Fields2d:
      if (dim != 2) throw ConfigError("mixture", "fields2d needs a 2D mixture");
      for (Scheme s : c.schemes) {
        if (s != Scheme::CFG && s != Scheme::NP && s != Scheme::DNG_Exact) {
          throw ConfigError("guidance.schemes", "fields2d supports CFG, NP and DNG_Exact");
        }
      }
      if (c.field_t < 1 || c.field_t > c.steps) throw ConfigError("fields.t", "must lie in [1, steps]");
      if (c.grid.nx == 0 || c.grid.ny == 0) throw ConfigError("fields.resolution", "must be positive");
      break;
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view json_text,
                                         std::optional<ExperimentKind> expected) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  check_keys(root, "", {"kind", "mixture", "schedule", "guidance", "samples", "seed", "output",
                        "workers", "trace_chains", "histogram", "fields"});

  ExperimentKind kind;
  if (root.contains("kind")) {
    if (!root["kind"].is_string()) throw ConfigError("kind", "expected a string");
    kind = parse_experiment_kind(root["kind"].get<std::string>());
    if (expected && *expected != kind) {
      throw ConfigError("kind", "config is for '" + std::string(to_string(kind)) +
                                    "' but the command runs '" + std::string(to_string(*expected)) + "'");
    }
  } else if (expected) {
    kind = *expected;
  } else {
    throw ConfigError("kind", "missing");
  }

  ExperimentConfig c = default_experiment_config(kind);
  bool prior_given = false;
  if (root.contains("mixture")) c.split = parse_mixture(root["mixture"]);
  if (root.contains("schedule")) {
    const json& s = root["schedule"];
    check_keys(s, "schedule", {"steps", "beta_min", "beta_max"});
    if (s.contains("steps")) c.steps = static_cast<int>(as_integer(s["steps"], "schedule.steps"));
    if (s.contains("beta_min")) c.beta_min = as_number(s["beta_min"], "schedule.beta_min");
    if (s.contains("beta_max")) c.beta_max = as_number(s["beta_max"], "schedule.beta_max");
  }
  if (root.contains("guidance")) parse_guidance(root["guidance"], c, prior_given);
  if (kind == ExperimentKind::PosteriorCheck && !prior_given) c.guidance.prior = c.split.prior();
  if (root.contains("samples")) c.samples = as_count(root["samples"], "samples");
  if (root.contains("seed")) {
    const json& js = root["seed"];
    if (!js.is_number_unsigned() && !(js.is_number_integer() && js.get<std::int64_t>() >= 0)) {
      throw ConfigError("seed", "expected a non-negative integer");
    }
    c.seed = js.get<std::uint64_t>();
  }
  if (root.contains("output")) {
    if (!root["output"].is_string()) throw ConfigError("output", "expected a path string");
    c.output = root["output"].get<std::string>();
  }
  if (root.contains("workers")) c.workers = static_cast<unsigned>(as_count(root["workers"], "workers"));
  if (root.contains("trace_chains")) c.trace_chains = as_count(root["trace_chains"], "trace_chains");
  if (root.contains("histogram")) {
    const json& h = root["histogram"];
    check_keys(h, "histogram", {"range", "bins"});
    if (h.contains("range")) std::tie(c.hist_lo, c.hist_hi) = as_range(h["range"], "histogram.range");
    if (h.contains("bins")) c.hist_bins = as_count(h["bins"], "histogram.bins");
  }
  if (root.contains("fields")) {
    const json& f = root["fields"];
    check_keys(f, "fields", {"t", "x_range", "y_range", "resolution"});
    if (f.contains("t")) c.field_t = static_cast<int>(as_integer(f["t"], "fields.t"));
    if (f.contains("x_range")) std::tie(c.grid.x_min, c.grid.x_max) = as_range(f["x_range"], "fields.x_range");
    if (f.contains("y_range")) std::tie(c.grid.y_min, c.grid.y_max) = as_range(f["y_range"], "fields.y_range");
    if (f.contains("resolution")) {
      const json& r = f["resolution"];
      if (!r.is_array() || r.size() != 2) throw ConfigError("fields.resolution", "expected [nx, ny]");
      c.grid.nx = as_count(r[0], "fields.resolution[0]");
      c.grid.ny = as_count(r[1], "fields.resolution[1]");
    }
  }
  validate_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path, std::optional<ExperimentKind> expected) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str(), expected);
}

// ---------------------------------------------------------------------------
// Artifact writing

namespace {

/// Tracks every file written so a failed run can remove its partial output.
class ArtifactSet {
 public:
  explicit ArtifactSet(fs::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string& name) {
    fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    files_.push_back(p);
    return out;
  }

  void remove_all() noexcept {
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    files_.clear();
  }

  const std::vector<fs::path>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
};

std::string lambda_tag(double lambda) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", lambda);
  return buf;
}

std::string arm_tag(Scheme s, double lambda) {
  return std::string(to_string(s)) + "_lambda" + lambda_tag(lambda);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_samples(ArtifactSet& art, const std::string& name, const std::vector<TrajectoryRecord>& recs,
                   std::size_t dim) {
  auto out = art.open(name);
  out << "chain";
  for (std::size_t k = 0; k < dim; ++k) out << ",x0_" << k;
  out << '\n';
  for (const auto& r : recs) {
    out << r.chain;
    for (double v : r.x0) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_lambda_traces(ArtifactSet& art, const std::string& name, const Sampler& sampler,
                         std::size_t chains) {
  auto out = art.open(name);
  out << "chain,t,lambda,posterior\n";
  const bool has_posterior = sampler.config().guidance.scheme == Scheme::DNG_Tracked ||
                             sampler.config().guidance.scheme == Scheme::DNG_Exact;
  for (std::size_t c = 0; c < chains; ++c) {
    const TrajectoryRecord r = sampler.run_chain(c, true);
    for (int t = r.steps; t >= 1; --t) {
      out << c << ',' << t << ',' << format_double(r.lambda_at(t)) << ',';
      if (has_posterior) out << format_double(r.posterior_at(t));
      out << '\n';
    }
  }
}

json rows_to_json(const std::vector<SummaryRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json m = json::object();
    for (const auto& [k, v] : r.metrics) {
      if (std::isfinite(v)) m[k] = v;
    }
    arr.push_back({{"experiment", r.experiment}, {"scheme", r.scheme}, {"lambda0", r.lambda0}, {"metrics", m}});
  }
  return arr;
}

SummaryRow make_row(const ExperimentConfig& c, std::string scheme, double lambda) {
  SummaryRow row;
  row.experiment = std::string(to_string(c.kind));
  row.scheme = std::move(scheme);
  row.lambda0 = lambda;
  row.metrics["n_samples"] = static_cast<double>(c.samples);
  row.metrics["seed"] = static_cast<double>(c.seed);
  return row;
}

void run_fig1d(const ExperimentConfig& c, ArtifactSet& art, std::vector<SummaryRow>& rows) {
  const NoiseSchedule schedule = c.schedule();
  for (Scheme s : c.schemes) {
    for (double lambda : c.lambda0.at(s)) {
      RunConfig rc{c.split, schedule, c.guidance_for(s, lambda), c.samples, c.seed, false};
      const Sampler sampler(rc);
      const auto recs = sampler.run_batch(c.workers);
      const std::string tag = arm_tag(s, lambda);
      write_samples(art, "samples_" + tag + ".csv", recs, 1);

      std::vector<double> xs;
      xs.reserve(recs.size());
      for (const auto& r : recs) xs.push_back(r.x0[0]);
      const Histogram1D h = histogram_1d(xs, c.split.allowed(), c.hist_lo, c.hist_hi, c.hist_bins);
      {
        auto out = art.open("histogram_" + tag + ".csv");
        out << "bin_lo,bin_hi,density,target_density\n";
        const double width = (c.hist_hi - c.hist_lo) / static_cast<double>(c.hist_bins);
        for (std::size_t b = 0; b < c.hist_bins; ++b) {
          const double lo = c.hist_lo + static_cast<double>(b) * width;
          out << format_double(lo) << ',' << format_double(lo + width) << ','
              << format_double(h.density[b]) << ',' << format_double(h.target_mass[b] / width) << '\n';
        }
      }
      const auto samples = final_samples(recs);
      const ClassHistogram ch = class_histogram(samples, c.split);
      SummaryRow row = make_row(c, std::string(to_string(s)), lambda);
      row.metrics["hist_kl"] = h.kl;
      row.metrics["forbidden_mass"] = static_cast<double>(ch.forbidden_count()) / static_cast<double>(ch.total);
      row.metrics["safety"] = safety(samples, c.split);
      rows.push_back(std::move(row));

      if (s != Scheme::None && c.trace_chains > 0) {
        write_lambda_traces(art, "lambda_" + tag + ".csv", sampler, std::min(c.trace_chains, c.samples));
      }
    }
  }
}

void run_posterior_check(const ExperimentConfig& c, ArtifactSet& art, std::vector<SummaryRow>& rows) {
  const NoiseSchedule schedule = c.schedule();
  const double lambda = c.lambda0.at(Scheme::DNG_Tracked).front();
  RunConfig rc{c.split, schedule, c.guidance_for(Scheme::DNG_Tracked, lambda), c.samples, c.seed, true};
  const Sampler sampler(rc);
  TrackingAccumulator acc(c.split, schedule);
  constexpr std::size_t kChunk = 1000;
  for (std::size_t first = 0; first < c.samples; first += kChunk) {
    const auto recs = sampler.run_range(first, std::min(kChunk, c.samples - first), c.workers);
    for (const auto& r : recs) acc.add(r);
  }
  const TrackingCurves curves = acc.finish();
  {
    auto out = art.open("posterior.csv");
    out << "t,group,tracked_mean,exact_mean\n";
    for (int g = 0; g < 2; ++g) {
      if (curves.group_size[g] == 0) continue;
      for (int t = curves.steps; t >= 1; --t) {
        const auto k = static_cast<std::size_t>(curves.steps - t);
        out << t << ',' << TrackingCurves::kGroupNames[g] << ','
            << format_double(curves.tracked_mean[g][k]) << ',' << format_double(curves.exact_mean[g][k])
            << '\n';
      }
    }
  }
  if (c.trace_chains > 0) {
    write_lambda_traces(art, "lambda_" + arm_tag(Scheme::DNG_Tracked, lambda) + ".csv", sampler,
                        std::min(c.trace_chains, c.samples));
  }
  SummaryRow row = make_row(c, "DNG_Tracked", lambda);
  row.metrics["mae"] = curves.mae;
  row.metrics["n_forbidden"] = static_cast<double>(curves.group_size[0]);
  row.metrics["n_allowed"] = static_cast<double>(curves.group_size[1]);
  rows.push_back(std::move(row));
}

void run_class_removal(const ExperimentConfig& c, ArtifactSet& art, std::vector<SummaryRow>& rows) {
  const NoiseSchedule schedule = c.schedule();
  struct Point {
    std::string scheme;
    double lambda;
    double safety;
    double kl;
  };
  std::vector<Point> points;
  for (Scheme s : c.schemes) {
    for (double lambda : c.lambda0.at(s)) {
      RunConfig rc{c.split, schedule, c.guidance_for(s, lambda), c.samples, c.seed, false};
      const auto samples = final_samples(Sampler(rc).run_batch(c.workers));
      const ClassHistogram h = class_histogram(samples, c.split);
      double kl;
      try {
        kl = kl_to_ideal(h);
      } catch (const std::domain_error&) {
        kl = std::numeric_limits<double>::infinity();
      }
      points.push_back({std::string(to_string(s)), lambda, safety(samples, c.split), kl});
    }
  }
  std::sort(points.begin(), points.end(), [](const Point& a, const Point& b) {
    return std::tie(a.scheme, a.lambda) < std::tie(b.scheme, b.lambda);
  });
  auto out = art.open("sweep.csv");
  out << "scheme,lambda0,safety,kl_to_ideal,n_samples,seed\n";
  for (const auto& p : points) {
    out << p.scheme << ',' << format_double(p.lambda) << ',' << format_double(p.safety) << ','
        << format_double(p.kl) << ',' << c.samples << ',' << c.seed << '\n';
    SummaryRow row = make_row(c, p.scheme, p.lambda);
    row.metrics["safety"] = p.safety;
    row.metrics["kl_to_ideal"] = p.kl;
    rows.push_back(std::move(row));
  }
}

void run_fields2d(const ExperimentConfig& c, ArtifactSet& art, std::vector<SummaryRow>& rows) {
  const NoiseSchedule schedule = c.schedule();
  for (Scheme s : c.schemes) {
    const double lambda = c.lambda0.at(s).front();
    const FieldGrid f = field_grid(c.split, schedule, c.field_t, s, lambda, c.grid);
    const std::string label = s == Scheme::DNG_Exact ? "DNG" : std::string(to_string(s));
    const std::pair<const char*, const std::vector<std::array<double, 2>>*> components[] = {
        {"unconditional", &f.unconditional}, {"guidance", &f.guidance}, {"total", &f.total}};
    for (const auto& [component, field] : components) {
      auto out = art.open("fields_" + label + "_" + component + ".csv");
      out << "x,y,vx,vy\n";
      for (std::size_t j = 0; j < c.grid.ny; ++j) {
        for (std::size_t i = 0; i < c.grid.nx; ++i) {
          const auto& v = (*field)[f.index(i, j)];
          out << format_double(c.grid.x_at(i)) << ',' << format_double(c.grid.y_at(j)) << ','
              << format_double(v[0]) << ',' << format_double(v[1]) << '\n';
        }
      }
    }
    SummaryRow row = make_row(c, std::string(to_string(s)), lambda);
    row.metrics.erase("n_samples");
    row.metrics["t"] = c.field_t;
    rows.push_back(std::move(row));
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  validate_config(config);
  std::error_code ec;
  fs::create_directories(config.output, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + config.output.string() + ": " + ec.message());

  ArtifactSet art(config.output);
  ExperimentResult result;
  try {
    switch (config.kind) {
      case ExperimentKind::Fig1d: run_fig1d(config, art, result.rows); break;
      case ExperimentKind::PosteriorCheck: run_posterior_check(config, art, result.rows); break;
      case ExperimentKind::ClassRemovalSweep: run_class_removal(config, art, result.rows); break;
      case ExperimentKind::Fields2d: run_fields2d(config, art, result.rows); break;
    }
    json summary = {{"experiment", std::string(to_string(config.kind))},
                    {"generated_at", utc_timestamp()},
                    {"seed", config.seed},
                    {"samples", config.samples},
                    {"steps", config.steps},
                    {"rows", rows_to_json(result.rows)}};
    auto out = art.open("summary.json");
    out << summary.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing summary.json");
  } catch (...) {
    art.remove_all();
    throw;
  }
  result.files = art.files();
  result.summary_path = config.output / "summary.json";
  return result;
}

// ---------------------------------------------------------------------------
// summarize

SummaryTable summarize(const fs::path& dir) {
  SummaryTable table;
  if (!fs::is_directory(dir)) throw std::invalid_argument(dir.string() + " is not a directory");

  std::vector<fs::path> files;
  std::set<fs::path> csv_dirs;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const fs::path& p = entry.path();
    if (p.filename() == "summary.json") {
      files.push_back(p);
    } else if (p.extension() == ".csv" && p != dir / "summary.csv") {
      csv_dirs.insert(p.parent_path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& d : csv_dirs) {
    if (!fs::exists(d / "summary.json")) {
      const auto rel = fs::relative(d, dir).string();
      table.problems.push_back((rel.empty() ? std::string(".") : rel) + ": missing summary.json");
    }
  }

  using Key = std::tuple<std::string, std::string, double>;
  std::map<Key, SummaryRow> merged;
  for (const auto& path : files) {
    std::ifstream in(path);
    json doc;
    try {
      doc = json::parse(in);
      if (!doc.contains("rows") || !doc["rows"].is_array()) throw std::runtime_error("no rows array");
      std::vector<SummaryRow> rows;
      for (const auto& jr : doc["rows"]) {
        SummaryRow r;
        r.experiment = jr.at("experiment").get<std::string>();
        r.scheme = jr.at("scheme").get<std::string>();
        r.lambda0 = jr.at("lambda0").get<double>();
        for (const auto& [k, v] : jr.at("metrics").items()) r.metrics[k] = v.get<double>();
        rows.push_back(std::move(r));
      }
      ++table.summaries_read;
      for (auto& r : rows) {
        Key key{r.experiment, r.scheme, r.lambda0};
        if (merged.contains(key)) {
          table.problems.push_back(fs::relative(path, dir).string() + ": duplicate row (" + r.experiment +
                                   ", " + r.scheme + ", " + format_double(r.lambda0) + ") skipped");
          continue;
        }
        merged.emplace(std::move(key), std::move(r));
      }
    } catch (const std::exception& e) {
      table.problems.push_back(fs::relative(path, dir).string() + ": corrupt summary (" + e.what() + ")");
    }
  }
  for (auto& [_, r] : merged) table.rows.push_back(std::move(r));

  std::ofstream out(dir / "summary.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / "summary.csv").string());
  const auto& cols = summary_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.experiment << ',' << r.scheme << ',' << format_double(r.lambda0);
    for (std::size_t i = 3; i < cols.size(); ++i) {
      out << ',';
      auto it = r.metrics.find(cols[i]);
      if (it == r.metrics.end()) continue;
      if (cols[i] == "n_samples" || cols[i] == "seed") {
        out << static_cast<std::uint64_t>(it->second);
      } else {
        out << format_double(it->second);
      }
    }
    out << '\n';
  }
  return table;
}

}  // namespace dnglab

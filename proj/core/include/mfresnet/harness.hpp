#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mfresnet/nnmodel.hpp"
#include "mfresnet/training.hpp"

namespace mfresnet {

/// Flat dotted key/value configuration ("model.d = 2"). Later sources override earlier ones.
using ConfigMap = std::map<std::string, std::string>;

/// Parses "key = value" lines; '#' starts a comment. Throws ConfigError on malformed lines
/// (reported as "line:<n>").
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::filesystem::path& path);
/// Applies "key=value" overrides on top of `base`.
ConfigMap apply_overrides(ConfigMap base, const std::vector<std::string>& overrides);

struct ExperimentConfig {
  ModelShape model;
  bool antithetic = false;
  TrainConfig train;

  std::string dataset = "two_spirals";  // two_spirals | random_unit
  std::vector<int> n_train{32, 64, 128, 256, 512, 1024};
  int n_test = 1024;
  double noise = 0.1;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  bool sphere_lift = false;

  ProbeSet probes;

  bool rademacher = true;
  int rademacher_draws = 200;
  double rademacher_delta = 0.05;
  int rademacher_family = 5;  // most recent logged checkpoints

  std::string output_dir;  // empty: $MFRESNET_OUTPUT_ROOT or ./runs
  bool plots = true;

  /// Throws ConfigError naming every offending key.
  void validate() const;
};

/// Defaults as a map, with every recognised key present.
ConfigMap default_config_map();
/// Unknown keys and unparsable values raise ConfigError listing all of them.
ExperimentConfig config_from_map(const ConfigMap& map);
ConfigMap config_to_map(const ExperimentConfig& cfg);
/// Canonical "key = value" text, sorted by key.
std::string canonical_config_text(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over the canonical text.
std::string config_hash(const ExperimentConfig& cfg);

/// Output root: MFRESNET_OUTPUT_ROOT if set, otherwise "runs".
std::filesystem::path default_output_root();

/// Fixed CSV header shared by every run file.
inline constexpr const char* kCsvHeader =
    "step,train_loss,test01,lmin_g1,lmin_g2,w2_enc_sup,w2_pred,klg_enc,klg_pred,wall_ms";
std::string csv_line(const TrainRow& row);

struct RunRecord {
  int n_train = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string failure;
  double final_train_loss = 0.0;
  double final_test01 = 0.0;
  double rademacher = 0.0;
  double rademacher_se = 0.0;
  double gen_bound = 0.0;
  std::filesystem::path csv;
};

struct AggregateRow {
  int n_train = 0;
  int runs = 0;
  double mean_test01 = 0.0;
  double mean_train_loss = 0.0;
  double mean_rademacher = 0.0;
  double mean_gen_bound = 0.0;
};

struct ExperimentResult {
  std::filesystem::path run_dir;
  std::vector<RunRecord> runs;
  std::vector<AggregateRow> aggregates;
  double wall_seconds = 0.0;
  bool any_failed = false;
};

/// Trains every (n_train, seed) pair and writes <root>/run-<hash>/ with one CSV per run,
/// aggregate.csv and manifest.json. A run that overflows keeps its partial CSV and gets a
/// sibling .FAILED marker; the remaining runs still execute.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& output_root);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double p_value = 1.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log n, log error)
  int clamped = 0;                                // zero errors raised to the resolution floor
};

/// OLS of log error on log n with a two-sided t-test on the slope. Zero errors are clamped
/// to 1/(2 n_test); n_test <= 0 makes a zero error a contract violation.
RateFit fit_rate(const std::vector<std::pair<double, double>>& aggregate, int n_test = 0);

/// Reads aggregate.csv and manifest.json from a run directory, fits, and writes fit.json.
RateFit fit_run_dir(const std::filesystem::path& run_dir);

/// Writes *.tsv tables and simple SVG charts into <run_dir>/plots. Returns written files.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& run_dir);

}  // namespace mfresnet

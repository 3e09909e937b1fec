// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbr/data.hpp"
#include "wbr/trainer.hpp"

namespace wbr {

enum class Method { kWbr, kFinetune, kSimpleCil };
enum class InputNorm { kUnit, kStandard };

std::string_view to_string(Method method) noexcept;
std::string_view to_string(InputNorm norm) noexcept;

struct DatasetSpec {
  enum class Kind { kMnist, kFeatures };
  Kind kind = Kind::kMnist;
  /// MNIST IDX files (kind = mnist).
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  /// WBRF feature files (kind = features).
  std::filesystem::path train_features, test_features;
  /// kStandard applies the MNIST mean/std transform after loading.
  InputNorm input_norm = InputNorm::kUnit;
};

/// Fully resolved experiment description. Every field has a TOML key:
///
///   [dataset]  kind, dir | train_images/train_labels/test_images/test_labels,
///              train, test, input_norm
///   [scenario] base, increment, order_seed
///   [model]    hidden_layers, hidden_width
///   [train]    lr, epochs, batch_size, momentum, alpha, beta, clip_mode,
///              importance, joint_loss
///   [experiment] method, seeds, output_dir, checkpoint
struct ExperimentConfig {
  DatasetSpec dataset;
  std::size_t base = 0;
  std::size_t increment = 1;
  std::optional<std::uint64_t> order_seed;
  std::size_t hidden_layers = 0;
  std::size_t hidden_width = 32;
  /// seed and replay_enabled are filled per run from `seeds` and `method`.
  TrainConfig train;
  /// Mode shared by alpha and beta; kept when either is "none" so a grid
  /// axis can switch clipping back on.
  ClipMode clip_mode = ClipMode::kGlobalNorm;
  Method method = Method::kWbr;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path output_dir = "runs/default";
  bool checkpoint = false;

  /// Train config for one seed of this experiment.
  TrainConfig train_config(std::uint64_t seed) const;
  /// {input, hidden..., output}.
  std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t num_classes) const;
};

/// Parses TOML text. Relative paths resolve against `base_dir`, then against
/// $WBR_DATA_DIR. `overrides` are "dotted.key=value" strings applied before
/// validation; values are read as TOML scalars, falling back to strings.
/// Throws ConfigError naming the field on any invalid or unknown key.
ExperimentConfig parse_experiment_config(std::string_view toml_text,
                                         const std::filesystem::path& base_dir,
                                         std::span<const std::string> overrides = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::span<const std::string> overrides = {});

/// Canonical TOML text with every key present; parsing it reproduces `cfg`.
std::string to_toml(const ExperimentConfig& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);
/// Inverse of to_json, used to re-run the config echoed in a run record.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

/// Train and test splits after normalization.
struct LoadedData {
  LabeledDataset train;
  LabeledDataset test;
};

/// Throws ConfigError naming the field when a dataset path does not exist.
LoadedData load_experiment_data(const DatasetSpec& spec);

/// One seed of an experiment.
RunOutput run_experiment_seed(const ExperimentConfig& cfg, const LoadedData& data,
                              std::uint64_t seed);

/// Mean and sample standard deviation over seeds.
struct SeedStats {
  double mean = 0.0;
  double stddev = 0.0;
};
SeedStats seed_stats(std::span<const double> values);

/// Aggregate of every seed of one experiment, stored as summary.json.
struct ExperimentSummary {
  std::string method;
  ScenarioSummary scenario;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_accuracy;
  std::vector<double> average_accuracy;
  SeedStats final_stats;
  SeedStats average_stats;
  /// Seed-mean A_b and new-task accuracy per stage.
  std::vector<double> mean_stage_accuracy;
  std::vector<double> mean_new_task_accuracy;
  nlohmann::json config;
};

ExperimentSummary summarize_runs(const ExperimentConfig& cfg, std::span<const RunRecord> records);
nlohmann::json to_json(const ExperimentSummary& s);
ExperimentSummary experiment_summary_from_json(const nlohmann::json& j);

/// Runs every seed (up to `jobs` concurrently) and writes
///   <output_dir>/config.toml, summary.json,
///   <output_dir>/seed_<s>/record.json, stages.csv [, model.wbrm, memory.wbrf].
ExperimentSummary cmd_run(const ExperimentConfig& cfg, std::size_t jobs = 1);

/// One grid axis: key in {lr, N, alpha, beta, momentum} and its values as text.
struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};
/// Parses "lr=0.1,0.01". Throws ConfigError on an unknown key or empty axis.
GridAxis parse_grid_axis(std::string_view text);

struct GridCell {
  /// (axis key, value) in axis order.
  std::vector<std::pair<std::string, std::string>> settings;
  std::string label() const;
  /// 16 hex digits of FNV-1a over label(); names the cell's output directory.
  std::string hash() const;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::vector<ExperimentSummary> summaries;
};

/// Cartesian product of the axes (first axis outermost), each cell run for
/// every seed. Writes cells/<hash>/..., grid.csv and grid.md under the base
/// config's output_dir.
GridResult cmd_grid(const ExperimentConfig& base, std::span<const GridAxis> axes,
                    std::size_t jobs = 1);
std::vector<GridCell> expand_grid(std::span<const GridAxis> axes);
ExperimentConfig apply_cell(const ExperimentConfig& base, const GridCell& cell);
std::string grid_csv(std::span<const GridAxis> axes, const GridResult& result);
std::string grid_markdown(const GridResult& result);

/// Merged comparison of finished experiment directories.
struct Report {
  std::vector<std::string> names;
  std::vector<ExperimentSummary> summaries;
  /// Index into summaries of the baseline, when one was named.
  std::optional<std::size_t> baseline;

  std::string markdown() const;
  std::string csv() const;
  /// Stage-vs-accuracy series, one column per run.
  std::string curves_csv() const;
};

/// Throws ComparabilityError when the runs used different scenarios.
Report cmd_report(std::span<const std::filesystem::path> run_dirs,
                  const std::optional<std::filesystem::path>& baseline_dir);

/// Gaussian clusters with per-coordinate noise `sigma` around centers of norm
/// `separation * sigma`, along orthogonal axes (or, when dim < classes, random
/// unit directions). Train and test share the centers.
LoadedData synthetic_gaussian_classes(std::uint32_t num_classes, std::size_t dim,
                                      std::size_t train_per_class, std::size_t test_per_class,
                                      double separation, double sigma, std::uint64_t seed);

}  // namespace wbr

// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "wbr/error.hpp"

namespace wbr {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void require_file(const fs::path& path, const char* field) {
  if (!fs::is_regular_file(path)) {
    throw ConfigError("file not found: '" + path.string() + "'", field);
  }
}

fs::path seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return cfg.output_dir / fmt::format("seed_{}", seed);
}

void write_seed_outputs(const ExperimentConfig& cfg, const LoadedData& data,
                        std::uint64_t seed, const RunOutput& out) {
  const fs::path dir = seed_dir(cfg, seed);
  write_text(dir / "record.json", to_json(out.record).dump(2) + "\n");
  std::ostringstream csv;
  write_stage_csv(csv, out.record.stage_rows());
  write_text(dir / "stages.csv", csv.str());
  if (cfg.checkpoint && cfg.method != Method::kSimpleCil) {
    write_model_checkpoint(dir / "model.wbrm", out.model);
    if (!out.store.empty()) out.store.save(dir / "memory.wbrf", data.train.num_classes);
  }
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads; rethrows the first error.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

/// Runs every seed of every config over shared data and writes all outputs.
std::vector<ExperimentSummary> run_all(std::span<const ExperimentConfig> cfgs,
                                       const LoadedData& data, std::size_t jobs) {
  struct Job {
    std::size_t cfg;
    std::size_t seed;
  };
  std::vector<Job> work;
  std::vector<std::vector<RunRecord>> records(cfgs.size());
  for (std::size_t c = 0; c < cfgs.size(); ++c) {
    records[c].resize(cfgs[c].seeds.size());
    for (std::size_t s = 0; s < cfgs[c].seeds.size(); ++s) {
      fs::create_directories(seed_dir(cfgs[c], cfgs[c].seeds[s]));
      work.push_back({c, s});
    }
    write_text(cfgs[c].output_dir / "config.toml", to_toml(cfgs[c]));
  }
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const auto [c, s] = work[i];
    const ExperimentConfig& cfg = cfgs[c];
    const std::uint64_t seed = cfg.seeds[s];
    RunOutput out = run_experiment_seed(cfg, data, seed);
    write_seed_outputs(cfg, data, seed, out);
    spdlog::info("{} seed {}: A_B={} mean={}", cfg.output_dir.string(), seed,
                 format_percent(out.record.metrics.final_accuracy()),
                 format_percent(out.record.metrics.average()));
    records[c][s] = std::move(out.record);
  });
  std::vector<ExperimentSummary> summaries;
  for (std::size_t c = 0; c < cfgs.size(); ++c) {
    summaries.push_back(summarize_runs(cfgs[c], records[c]));
    write_text(cfgs[c].output_dir / "summary.json", to_json(summaries.back()).dump(2) + "\n");
  }
  return summaries;
}

std::string mean_pm_std(const SeedStats& s) {
  return format_percent(s.mean) + " ± " + format_percent(s.stddev);
}

double parse_double(std::string_view text, const std::string& field) {
  double value = 0.0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || p != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError("expected a number, got '" + std::string(text) + "'", field);
  }
  return value;
}

std::size_t parse_count(std::string_view text, const std::string& field) {
  std::size_t value = 0;
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || p != text.data() + text.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(text) + "'", field);
  }
  return value;
}

ClipPolicy parse_clip_value(std::string_view text, ClipMode mode, const std::string& field) {
  if (text == "none") return ClipPolicy::none();
  const double t = parse_double(text, field);
  if (!(t > 0.0)) throw ConfigError("must be positive or \"none\"", field);
  return ClipPolicy(mode, t);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

LoadedData load_experiment_data(const DatasetSpec& spec) {
  LoadedData data;
  if (spec.kind == DatasetSpec::Kind::kMnist) {
    require_file(spec.train_images, "dataset.train_images");
    require_file(spec.train_labels, "dataset.train_labels");
    require_file(spec.test_images, "dataset.test_images");
    require_file(spec.test_labels, "dataset.test_labels");
    data.train = load_mnist_idx(spec.train_images, spec.train_labels);
    data.test = load_mnist_idx(spec.test_images, spec.test_labels);
  } else {
    require_file(spec.train_features, "dataset.train");
    require_file(spec.test_features, "dataset.test");
    data.train = load_feature_file(spec.train_features);
    data.test = load_feature_file(spec.test_features);
  }
  if (data.train.dim() != data.test.dim() || data.train.num_classes != data.test.num_classes) {
    throw ConsistencyError("train and test splits disagree on dim or class count");
  }
  if (spec.input_norm == InputNorm::kStandard) {
    standardize(data.train, kMnistPixelMean, kMnistPixelStd);
    standardize(data.test, kMnistPixelMean, kMnistPixelStd);
  }
  return data;
}

RunOutput run_experiment_seed(const ExperimentConfig& cfg, const LoadedData& data,
                              std::uint64_t seed) {
  const Scenario scenario =
      build_scenario(data.train, data.test, cfg.base, cfg.increment, cfg.order_seed);
  ExperimentConfig echo = cfg;
  echo.seeds = {seed};
  if (cfg.method == Method::kSimpleCil) {
    RunOutput out{simplecil_run(data.train, data.test, scenario), MlpModel{}, MemoryStore{}};
    out.record.config = to_json(echo);
    return out;
  }
  MlpModel model = make_model(cfg.layer_dims(data.train.dim(), data.train.num_classes), seed);
  RunOutput out =
      run_continual(std::move(model), scenario, data.train, data.test, cfg.train_config(seed));
  out.record.config = to_json(echo);
  return out;
}

SeedStats seed_stats(std::span<const double> values) {
  if (values.empty()) throw MetricError("no values to aggregate");
  const double n = static_cast<double>(values.size());
  SeedStats s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

ExperimentSummary summarize_runs(const ExperimentConfig& cfg, std::span<const RunRecord> records) {
  if (records.empty()) throw MetricError("no runs to summarize");
  ExperimentSummary s;
  s.method = records.front().method;
  s.scenario = records.front().scenario;
  s.seeds = cfg.seeds;
  s.config = to_json(cfg);
  const std::size_t stages = records.front().metrics.num_stages();
  s.mean_stage_accuracy.assign(stages, 0.0);
  s.mean_new_task_accuracy.assign(stages, 0.0);
  for (const auto& r : records) {
    if (r.scenario != s.scenario || r.metrics.num_stages() != stages) {
      throw ComparabilityError("runs of one experiment disagree on the scenario");
    }
    s.final_accuracy.push_back(r.metrics.final_accuracy());
    s.average_accuracy.push_back(r.metrics.average());
    for (std::size_t b = 0; b < stages; ++b) {
      s.mean_stage_accuracy[b] += r.metrics.stage_accuracy[b] / static_cast<double>(records.size());
      s.mean_new_task_accuracy[b] +=
          r.metrics.new_task_accuracy[b] / static_cast<double>(records.size());
    }
  }
  s.final_stats = seed_stats(s.final_accuracy);
  s.average_stats = seed_stats(s.average_accuracy);
  return s;
}

nlohmann::json to_json(const ExperimentSummary& s) {
  return {{"method", s.method},
          {"scenario",
           {{"class_order", s.scenario.class_order},
            {"base", s.scenario.base_size},
            {"increment", s.scenario.increment},
            {"num_tasks", s.scenario.num_tasks}}},
          {"seeds", s.seeds},
          {"final_accuracy", s.final_accuracy},
          {"average_accuracy", s.average_accuracy},
          {"A_B", {{"mean", s.final_stats.mean}, {"std", s.final_stats.stddev}}},
          {"A_mean", {{"mean", s.average_stats.mean}, {"std", s.average_stats.stddev}}},
          {"mean_stage_accuracy", s.mean_stage_accuracy},
          {"mean_new_task_accuracy", s.mean_new_task_accuracy},
          {"config", s.config}};
}

ExperimentSummary experiment_summary_from_json(const nlohmann::json& j) {
  try {
    ExperimentSummary s;
    s.method = j.at("method").get<std::string>();
    const auto& sc = j.at("scenario");
    s.scenario.class_order = sc.at("class_order").get<std::vector<ClassId>>();
    s.scenario.base_size = sc.at("base").get<std::size_t>();
    s.scenario.increment = sc.at("increment").get<std::size_t>();
    s.scenario.num_tasks = sc.at("num_tasks").get<std::size_t>();
    s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    s.final_accuracy = j.at("final_accuracy").get<std::vector<double>>();
    s.average_accuracy = j.at("average_accuracy").get<std::vector<double>>();
    s.final_stats = {j.at("A_B").at("mean").get<double>(), j.at("A_B").at("std").get<double>()};
    s.average_stats = {j.at("A_mean").at("mean").get<double>(),
                       j.at("A_mean").at("std").get<double>()};
    s.mean_stage_accuracy = j.at("mean_stage_accuracy").get<std::vector<double>>();
    s.mean_new_task_accuracy = j.at("mean_new_task_accuracy").get<std::vector<double>>();
    s.config = j.at("config");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed summary: ") + e.what());
  }
}

ExperimentSummary cmd_run(const ExperimentConfig& cfg, std::size_t jobs) {
  const LoadedData data = load_experiment_data(cfg.dataset);
  return run_all(std::span(&cfg, 1), data, jobs).front();
}

GridAxis parse_grid_axis(std::string_view text) {
  static const std::set<std::string> kKeys = {"lr", "N", "alpha", "beta", "momentum"};
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("expected key=v1,v2,..., got '" + std::string(text) + "'", "--axis");
  }
  GridAxis axis;
  axis.key = trim(text.substr(0, eq));
  if (!kKeys.contains(axis.key)) {
    throw ConfigError("unknown axis '" + axis.key + "' (expected lr, N, alpha, beta, momentum)",
                      "--axis");
  }
  const std::string field = "--axis " + axis.key;
  std::string_view rest = text.substr(eq + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    std::string value = trim(rest.substr(0, comma));
    if (value.empty()) throw ConfigError("empty value", field);
    axis.values.push_back(std::move(value));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
    if (rest.empty()) throw ConfigError("empty value", field);
  }
  if (axis.values.empty()) throw ConfigError("axis has no values", field);
  return axis;
}

std::string GridCell::label() const {
  std::string out;
  for (const auto& [k, v] : settings) {
    if (!out.empty()) out += ", ";
    out += k + "=" + v;
  }
  return out.empty() ? "base" : out;
}

std::string GridCell::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

std::vector<GridCell> expand_grid(std::span<const GridAxis> axes) {
  std::set<std::string> keys;
  for (const auto& a : axes) {
    if (a.values.empty()) throw ConfigError("axis has no values", "--axis " + a.key);
    if (!keys.insert(a.key).second) throw ConfigError("axis given twice", "--axis " + a.key);
  }
  std::vector<GridCell> cells{GridCell{}};
  for (const auto& a : axes) {
    std::vector<GridCell> next;
    for (const auto& cell : cells) {
      for (const auto& v : a.values) {
        GridCell c = cell;
        c.settings.emplace_back(a.key, v);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

ExperimentConfig apply_cell(const ExperimentConfig& base, const GridCell& cell) {
  ExperimentConfig cfg = base;
  for (const auto& [key, value] : cell.settings) {
    const std::string field = "--axis " + key;
    if (key == "lr") {
      cfg.train.lr = parse_double(value, field);
    } else if (key == "N") {
      cfg.hidden_layers = parse_count(value, field);
    } else if (key == "alpha") {
      cfg.train.clip_new = parse_clip_value(value, cfg.clip_mode, field);
    } else if (key == "beta") {
      cfg.train.clip_memory = parse_clip_value(value, cfg.clip_mode, field);
    } else if (key == "momentum") {
      cfg.train.momentum = parse_double(value, field);
    } else {
      throw ConfigError("unknown axis", field);
    }
  }
  try {
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), "--axis");
  }
  cfg.output_dir = base.output_dir / "cells" / cell.hash();
  return cfg;
}

GridResult cmd_grid(const ExperimentConfig& base, std::span<const GridAxis> axes,
                    std::size_t jobs) {
  GridResult result;
  result.cells = expand_grid(axes);
  std::vector<ExperimentConfig> cfgs;
  for (const auto& cell : result.cells) cfgs.push_back(apply_cell(base, cell));
  const LoadedData data = load_experiment_data(base.dataset);
  result.summaries = run_all(cfgs, data, jobs);
  write_text(base.output_dir / "grid.csv", grid_csv(axes, result));
  write_text(base.output_dir / "grid.md", grid_markdown(result));
  return result;
}

std::string grid_csv(std::span<const GridAxis> axes, const GridResult& result) {
  std::string out = "cell";
  for (const auto& a : axes) out += "," + a.key;
  out += ",method,seeds,A_B_mean,A_B_std,A_mean_mean,A_mean_std\n";
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& s = result.summaries.at(i);
    out += result.cells[i].hash();
    for (const auto& [_, v] : result.cells[i].settings) out += "," + v;
    out += fmt::format(",{},{},{},{},{},{}\n", s.method, s.seeds.size(), s.final_stats.mean,
                       s.final_stats.stddev, s.average_stats.mean, s.average_stats.stddev);
  }
  return out;
}

std::string grid_markdown(const GridResult& result) {
  std::string out = "| Setting | Method | Seeds | A_B (%) | Ā (%) |\n|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const auto& s = result.summaries.at(i);
    out += fmt::format("| {} | {} | {} | {} | {} |\n", result.cells[i].label(), s.method,
                       s.seeds.size(), mean_pm_std(s.final_stats), mean_pm_std(s.average_stats));
  }
  return out;
}

Report cmd_report(std::span<const fs::path> run_dirs, const std::optional<fs::path>& baseline_dir) {
  if (run_dirs.empty()) throw ConfigError("at least one run directory is required", "report");
  Report report;
  auto add = [&report](const fs::path& dir) {
    report.names.push_back(dir.lexically_normal().generic_string());
    report.summaries.push_back(experiment_summary_from_json(read_json(dir / "summary.json")));
  };
  for (const auto& d : run_dirs) add(d);
  if (baseline_dir) {
    for (std::size_t i = 0; i < run_dirs.size(); ++i) {
      std::error_code ec;
      if (fs::equivalent(run_dirs[i], *baseline_dir, ec)) report.baseline = i;
    }
    if (!report.baseline) {
      add(*baseline_dir);
      report.baseline = report.summaries.size() - 1;
    }
  }
  for (std::size_t i = 1; i < report.summaries.size(); ++i) {
    if (report.summaries[i].scenario != report.summaries[0].scenario) {
      throw ComparabilityError("'" + report.names[i] + "' and '" + report.names[0] +
                               "' use different scenarios");
    }
  }
  return report;
}

std::string Report::markdown() const {
  std::string out = "| Run | Method | Seeds | A_B (%) | Ā (%) |";
  std::string rule = "|---|---|---|---|---|";
  if (baseline) {
    out += " ΔA_B | ΔĀ |";
    rule += "---|---|";
  }
  out += "\n" + rule + "\n";
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    out += fmt::format("| {} | {} | {} | {} | {} |", names[i], s.method, s.seeds.size(),
                       mean_pm_std(s.final_stats), mean_pm_std(s.average_stats));
    if (baseline) {
      if (i == *baseline) {
        out += " baseline | baseline |";
      } else {
        const auto& b = summaries[*baseline];
        out += fmt::format(" {:+.2f} | {:+.2f} |", s.final_stats.mean - b.final_stats.mean,
                           s.average_stats.mean - b.average_stats.mean);
      }
    }
    out += "\n";
  }
  return out;
}

std::string Report::csv() const {
  std::string out = "run,method,seeds,A_B_mean,A_B_std,A_mean_mean,A_mean_std";
  if (baseline) out += ",delta_A_B,delta_A_mean";
  out += "\n";
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    out += fmt::format("{},{},{},{},{},{},{}", names[i], s.method, s.seeds.size(),
                       s.final_stats.mean, s.final_stats.stddev, s.average_stats.mean,
                       s.average_stats.stddev);
    if (baseline) {
      const auto& b = summaries[*baseline];
      out += fmt::format(",{:.2f},{:.2f}", s.final_stats.mean - b.final_stats.mean,
                         s.average_stats.mean - b.average_stats.mean);
    }
    out += "\n";
  }
  return out;
}

std::string Report::curves_csv() const {
  std::string out = "stage";
  std::size_t stages = 0;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    out += fmt::format(",{0}:A_b,{0}:new_task_acc", names[i]);
    stages = std::max(stages, summaries[i].mean_stage_accuracy.size());
  }
  out += "\n";
  for (std::size_t b = 0; b < stages; ++b) {
    out += std::to_string(b + 1);
    for (const auto& s : summaries) {
      if (b < s.mean_stage_accuracy.size()) {
        out += fmt::format(",{},{}", s.mean_stage_accuracy[b], s.mean_new_task_accuracy[b]);
      } else {
        out += ",,";
      }
    }
    out += "\n";
  }
  return out;
}

LoadedData synthetic_gaussian_classes(std::uint32_t num_classes, std::size_t dim,
                                      std::size_t train_per_class, std::size_t test_per_class,
                                      double separation, double sigma, std::uint64_t seed) {
  if (num_classes == 0 || dim == 0) throw ConfigError("classes and dim must be positive", "synth");
  SeededRng rng(seed);
  Matrix centers(num_classes, dim);
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto row = centers.row(c);
    if (dim >= num_classes) {
      row[c] = 1.0;
    } else {
      for (double& v : row) v = rng.normal();
      const double n = l2_norm(row);
      for (double& v : row) v /= n;
    }
    for (double& v : row) v *= separation * sigma;
  }
  auto draw = [&](std::size_t per_class) {
    LabeledDataset ds;
    ds.num_classes = num_classes;
    ds.features = Matrix(num_classes * per_class, dim);
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) {
        auto row = ds.features.row(c * per_class + i);
        for (std::size_t d = 0; d < dim; ++d) row[d] = centers(c, d) + sigma * rng.normal();
        ds.labels.push_back(static_cast<ClassId>(c));
      }
    }
    return ds;
  };
  LoadedData data;
  data.train = draw(train_per_class);
  data.test = draw(test_per_class);
  return data;
}

}  // namespace wbr

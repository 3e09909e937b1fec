// Copyright 2026 The WBR Authors
// SPDX-License-Identifier: Apache-2.0

#include "wbr/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "wbr/error.hpp"
#include "wbr/experiment.hpp"

namespace wbr {

namespace fs = std::filesystem;

namespace {

void use_stderr_logger(const std::string& level) {
  auto logger = spdlog::get("wbr");
  if (!logger) logger = spdlog::stderr_color_mt("wbr");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
}

std::string summary_line(const ExperimentSummary& s, const fs::path& dir) {
  return fmt::format("{} seeds={} A_B={} ± {} A_mean={} ± {} -> {}", s.method, s.seeds.size(),
                     format_percent(s.final_stats.mean), format_percent(s.final_stats.stddev),
                     format_percent(s.average_stats.mean), format_percent(s.average_stats.stddev),
                     dir.string());
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Weight Balancing Replay: class-incremental continual-learning lab", "wbr"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string config_path;
  std::vector<std::string> overrides;
  std::size_t jobs = 1;
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "TOML experiment config")->required();
    cmd->add_option("--set", overrides, "Override a config key, e.g. train.lr=0.1");
    cmd->add_option("--jobs", jobs, "Seeds/cells run concurrently")
        ->check(CLI::PositiveNumber);
  };

  auto* run = app.add_subcommand("run", "Run every seed of one experiment");
  add_run_options(run);

  auto* grid = app.add_subcommand("grid", "Run the Cartesian product of hyperparameter axes");
  add_run_options(grid);
  std::vector<std::string> axes_text;
  grid->add_option("--axis", axes_text, "Axis like lr=0.1,0.01 (lr, N, alpha, beta, momentum)")
      ->required();

  auto* report = app.add_subcommand("report", "Compare finished experiment directories");
  std::vector<std::string> report_dirs;
  std::string baseline;
  std::string report_out;
  report->add_option("dirs", report_dirs, "Experiment output directories")->required();
  report->add_option("--baseline", baseline, "Directory the delta columns are relative to");
  report->add_option("--out", report_out, "Write report.md, report.csv and curves.csv here");

  auto* footprint = app.add_subcommand("footprint", "Memory size in units of raw samples");
  std::string store_path;
  std::string sample_text;
  std::size_t vectors = 0;
  std::size_t dim = 0;
  auto* store_opt = footprint->add_option("--store", store_path, "WBRF memory file");
  auto* vectors_opt = footprint->add_option("--vectors", vectors, "Number of memory vectors");
  auto* dim_opt = footprint->add_option("--dim", dim, "Memory vector width");
  footprint->add_option("--sample", sample_text, "Raw sample shape HxWxC, e.g. 32x32x3")
      ->required();
  vectors_opt->needs(dim_opt)->excludes(store_opt);
  dim_opt->needs(vectors_opt)->excludes(store_opt);

  auto* synth = app.add_subcommand("synth", "Write separable Gaussian WBRF train/test files");
  std::uint32_t classes = 10;
  std::size_t synth_dim = 16;
  std::size_t train_per_class = 40;
  std::size_t test_per_class = 10;
  double separation = 10.0;
  double sigma = 1.0;
  std::uint64_t synth_seed = 0;
  std::string out_train;
  std::string out_test;
  synth->add_option("--classes", classes)->check(CLI::PositiveNumber);
  synth->add_option("--dim", synth_dim)->check(CLI::PositiveNumber);
  synth->add_option("--train-per-class", train_per_class)->check(CLI::PositiveNumber);
  synth->add_option("--test-per-class", test_per_class)->check(CLI::PositiveNumber);
  synth->add_option("--separation", separation, "Center norm in units of sigma");
  synth->add_option("--sigma", sigma)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--out-train", out_train)->required();
  synth->add_option("--out-test", out_test)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    use_stderr_logger(log_level);
    if (run->parsed()) {
      const ExperimentConfig cfg = load_experiment_config(config_path, overrides);
      const ExperimentSummary s = cmd_run(cfg, jobs);
      std::cout << summary_line(s, cfg.output_dir) << "\n";
    } else if (grid->parsed()) {
      const ExperimentConfig cfg = load_experiment_config(config_path, overrides);
      std::vector<GridAxis> axes;
      for (const auto& a : axes_text) axes.push_back(parse_grid_axis(a));
      const GridResult result = cmd_grid(cfg, axes, jobs);
      std::cout << grid_markdown(result);
    } else if (report->parsed()) {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      std::optional<fs::path> base;
      if (!baseline.empty()) base = baseline;
      const Report r = cmd_report(dirs, base);
      std::cout << r.markdown();
      if (!report_out.empty()) {
        fs::create_directories(report_out);
        write_file(fs::path(report_out) / "report.md", r.markdown());
        write_file(fs::path(report_out) / "report.csv", r.csv());
        write_file(fs::path(report_out) / "curves.csv", r.curves_csv());
      }
    } else if (footprint->parsed()) {
      const SampleDims sample = SampleDims::parse(sample_text);
      double value = 0.0;
      if (!store_path.empty()) {
        value = memory_footprint_in_samples(MemoryStore::load(store_path), sample);
      } else if (*vectors_opt) {
        value = memory_footprint_in_samples(vectors, dim, sample);
      } else {
        throw ConfigError("give --store or --vectors with --dim", "--store");
      }
      std::cout << fmt::format("{:.2f}", value) << "\n";
    } else if (synth->parsed()) {
      const LoadedData data = synthetic_gaussian_classes(
          classes, synth_dim, train_per_class, test_per_class, separation, sigma, synth_seed);
      write_feature_file(out_train, data.train);
      write_feature_file(out_test, data.test);
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace wbr

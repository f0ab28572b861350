#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "attnlab/gradients.hpp"
#include "attnlab/training.hpp"

namespace attnlab {

// Shared implementation of the CLI subcommands, kept in the library so
// tests can drive the exact code paths the binary runs.

struct PretrainOptions {
  TrainConfig config;
  std::filesystem::path out_dir = "out";
  int report_eval_n = 500;  // fresh samples for report.json
  bool svg = false;
  std::optional<std::filesystem::path> export_data;
};

struct FinetuneOptions {
  std::filesystem::path checkpoint_path;
  double sigma_tilde = 1.0;
  double gamma = 1.0;
  int steps = 400;
  double eta_tilde = 1e-3;
  int test_n = 1000;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "out";
  bool svg = false;
};

struct TheoryOptions {
  std::filesystem::path checkpoint_path;
  int eval_n = 500;
  std::optional<std::filesystem::path> metrics_csv;  // enables the growth fit
  double fit_t_lo = 100.0;
  double fit_t_hi = 0.0;  // 0 = last logged iteration
  std::filesystem::path out_dir = "out";
  bool svg = false;
};

struct GradcheckOptions {
  int trials = 20;
  int d = 3;
  int D = 4;
  double scale = 0.5;  // parameter magnitude for random instances
  std::uint64_t seed = 0;
};

int run_pretrain(const PretrainOptions& options);
int run_finetune(const FinetuneOptions& options);
int run_theory(const TheoryOptions& options);

// mutate (test-only) corrupts each analytic gradient before comparison so
// the harness itself can be validated
int run_gradcheck(const GradcheckOptions& options,
                  const std::function<void(GradPair&)>& mutate = nullptr);

// Named experiment presets mirroring the published hyperparameters.
// Unknown names throw std::invalid_argument.
void apply_pretrain_preset(std::string_view name, PretrainOptions& options);
void apply_finetune_preset(std::string_view name, FinetuneOptions& options);

// (iter, alpha) pairs parsed back from a metrics.csv
std::vector<std::pair<double, double>> read_alpha_trajectory(const std::filesystem::path& path);

}  // namespace attnlab

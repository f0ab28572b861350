#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "attnlab/errors.hpp"
#include "attnlab/runner.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitFileNotFound = 4;

int env_thread_cap() {
  const char* raw = std::getenv("ATTNLAB_THREADS");
  if (!raw) return 0;
  const int v = std::atoi(raw);
  return v > 0 ? v : 0;
}

int resolve_threads(int requested) {
  const int cap = env_thread_cap();
  if (cap > 0 && requested > cap) return cap;
  return requested;
}

// JSON config file sits between preset defaults and explicit flags
void apply_config_file(const std::filesystem::path& path, attnlab::TrainConfig& c) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path.string());
  const auto j = nlohmann::json::parse(in);
  if (j.contains("d")) c.d = j["d"].get<int>();
  if (j.contains("D")) c.D = j["D"].get<int>();
  if (j.contains("n")) c.n = j["n"].get<int>();
  if (j.contains("jstar")) c.j_star = j["jstar"].get<int>() - 1;
  if (j.contains("sigma_x")) c.sigma_x = j["sigma_x"].get<double>();
  if (j.contains("eta")) c.eta = j["eta"].get<double>();
  if (j.contains("iters")) c.iters = j["iters"].get<int>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("mode"))
    c.mode = j["mode"].get<std::string>() == "population-mc" ? attnlab::LossMode::population_mc
                                                             : attnlab::LossMode::empirical;
  if (j.contains("antithetic")) c.antithetic = j["antithetic"].get<bool>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("log_every")) c.log_every = j["log_every"].get<int>();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnlab: one-layer softmax-attention training laboratory for group-sparse "
               "classification"};
  app.require_subcommand(1);

  // ---- pretrain ----
  auto* pre = app.add_subcommand("pretrain", "train from zero initialization and emit artifacts");
  std::string pre_preset, pre_config_file, pre_mode, pre_export;
  int pre_d = 4, pre_D = 6, pre_n = 500, pre_jstar = 2, pre_iters = 400;
  int pre_batch = 0, pre_log_every = 1, pre_threads = 1, pre_eval_n = 500;
  double pre_sigma = 0.25, pre_eta = 0.5;
  std::uint64_t pre_seed = 0;
  bool pre_antithetic = true, pre_svg = false;
  std::string pre_out = "out";
  pre->add_option("--preset", pre_preset, "fig1-top | fig1-bottom | appendix-large | growth-alpha");
  pre->add_option("--config", pre_config_file, "JSON config file (preset < config < flags)");
  pre->add_option("--d", pre_d, "per-group feature dimension");
  pre->add_option("--D", pre_D, "number of groups");
  pre->add_option("--n", pre_n, "dataset size (empirical) or MC batch per step");
  pre->add_option("--sigma-x", pre_sigma, "feature standard deviation");
  pre->add_option("--eta", pre_eta, "learning rate");
  pre->add_option("--iters", pre_iters, "gradient descent iterations");
  pre->add_option("--jstar", pre_jstar, "label-relevant group (1-based)");
  pre->add_option("--seed", pre_seed, "root seed");
  pre->add_option("--mode", pre_mode, "empirical | population-mc")
      ->check(CLI::IsMember({"empirical", "population-mc"}));
  pre->add_flag("--antithetic,!--no-antithetic", pre_antithetic,
                "pair every sample with its mirror (-X, -y)");
  pre->add_option("--batch-size", pre_batch, "SGD minibatch size; 0 = full batch");
  pre->add_option("--log-every", pre_log_every, "metrics logging interval");
  pre->add_option("--threads", pre_threads, "worker threads (capped by ATTNLAB_THREADS)");
  pre->add_option("--eval-n", pre_eval_n, "fresh samples for report.json");
  pre->add_option("--out", pre_out, "output directory");
  pre->add_flag("--svg", pre_svg, "emit SVG charts");
  pre->add_option("--export-data", pre_export, "also dump the training dataset as CSV");

  // ---- finetune ----
  auto* fin = app.add_subcommand("finetune", "online SGD on a downstream task from a checkpoint");
  std::string fin_preset;
  attnlab::FinetuneOptions fin_opts;
  fin->add_option("--preset", fin_preset, "fig4-a | fig4-b");
  fin->add_option("--checkpoint", fin_opts.checkpoint_path, "pretrained checkpoint (.gsat)")
      ->required();
  auto* fin_sigma = fin->add_option("--sigma-tilde", fin_opts.sigma_tilde, "downstream noise scale");
  auto* fin_gamma = fin->add_option("--gamma", fin_opts.gamma, "downstream margin");
  auto* fin_steps = fin->add_option("--steps", fin_opts.steps, "online SGD steps (one sample each)");
  auto* fin_eta = fin->add_option("--eta-tilde", fin_opts.eta_tilde, "fine-tuning learning rate");
  auto* fin_test = fin->add_option("--test-n", fin_opts.test_n, "held-out test set size");
  auto* fin_seed = fin->add_option("--seed", fin_opts.seed, "root seed for the downstream task");
  fin->add_option("--out", fin_opts.out_dir, "output directory");
  fin->add_flag("--svg", fin_opts.svg, "emit SVG charts");

  // ---- theory ----
  auto* theo = app.add_subcommand("theory", "structural diagnostics of a checkpoint");
  attnlab::TheoryOptions theory_opts;
  std::string theory_metrics;
  theo->add_option("--checkpoint", theory_opts.checkpoint_path, "checkpoint (.gsat)")->required();
  theo->add_option("--eval-n", theory_opts.eval_n, "fresh samples for the report and heatmap");
  theo->add_option("--metrics", theory_metrics, "metrics.csv for the growth-exponent fit");
  theo->add_option("--fit-tmin", theory_opts.fit_t_lo, "growth fit window start");
  theo->add_option("--fit-tmax", theory_opts.fit_t_hi, "growth fit window end (0 = last)");
  theo->add_option("--out", theory_opts.out_dir, "output directory");
  theo->add_flag("--svg", theory_opts.svg, "emit heatmap SVG");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand("gradcheck", "analytic gradients vs finite differences");
  attnlab::GradcheckOptions gc_opts;
  gc->add_option("--trials", gc_opts.trials, "random instances")->check(CLI::PositiveNumber);
  gc->add_option("--d", gc_opts.d, "per-group feature dimension");
  gc->add_option("--D", gc_opts.D, "number of groups");
  gc->add_option("--scale", gc_opts.scale, "random parameter magnitude");
  gc->add_option("--seed", gc_opts.seed, "root seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) {
      attnlab::PretrainOptions opts;
      if (!pre_preset.empty()) attnlab::apply_pretrain_preset(pre_preset, opts);
      if (!pre_config_file.empty()) apply_config_file(pre_config_file, opts.config);
      if (pre->count("--d")) opts.config.d = pre_d;
      if (pre->count("--D")) opts.config.D = pre_D;
      if (pre->count("--n")) opts.config.n = pre_n;
      if (pre->count("--sigma-x")) opts.config.sigma_x = pre_sigma;
      if (pre->count("--eta")) opts.config.eta = pre_eta;
      if (pre->count("--iters")) opts.config.iters = pre_iters;
      if (pre->count("--jstar")) opts.config.j_star = pre_jstar - 1;
      if (pre->count("--seed")) opts.config.seed = pre_seed;
      if (pre->count("--mode"))
        opts.config.mode = pre_mode == "population-mc" ? attnlab::LossMode::population_mc
                                                       : attnlab::LossMode::empirical;
      if (pre->count("--antithetic") || pre->count("--no-antithetic"))
        opts.config.antithetic = pre_antithetic;
      if (pre->count("--batch-size")) opts.config.batch_size = pre_batch;
      if (pre->count("--log-every")) opts.config.log_every = pre_log_every;
      if (pre->count("--eval-n")) opts.report_eval_n = pre_eval_n;
      opts.config.threads = resolve_threads(pre_threads);
      opts.out_dir = pre_out;
      opts.svg = pre_svg;
      if (!pre_export.empty()) opts.export_data = pre_export;
      if (opts.config.j_star < 0 || opts.config.j_star >= opts.config.D)
        throw CLI::ValidationError("--jstar must lie in [1, D]");
      return attnlab::run_pretrain(opts);
    }
    if (fin->parsed()) {
      if (!fin_preset.empty()) {
        attnlab::FinetuneOptions preset_defaults;
        attnlab::apply_finetune_preset(fin_preset, preset_defaults);
        if (!fin_sigma->count()) fin_opts.sigma_tilde = preset_defaults.sigma_tilde;
        if (!fin_gamma->count()) fin_opts.gamma = preset_defaults.gamma;
        if (!fin_steps->count()) fin_opts.steps = preset_defaults.steps;
        if (!fin_eta->count()) fin_opts.eta_tilde = preset_defaults.eta_tilde;
        if (!fin_test->count()) fin_opts.test_n = preset_defaults.test_n;
        if (!fin_seed->count()) fin_opts.seed = preset_defaults.seed;
      }
      if (!std::filesystem::exists(fin_opts.checkpoint_path)) {
        std::fprintf(stderr, "error: checkpoint file not found: %s\n",
                     fin_opts.checkpoint_path.string().c_str());
        return kExitFileNotFound;
      }
      return attnlab::run_finetune(fin_opts);
    }
    if (theo->parsed()) {
      if (!theory_metrics.empty()) theory_opts.metrics_csv = theory_metrics;
      if (!std::filesystem::exists(theory_opts.checkpoint_path)) {
        std::fprintf(stderr, "error: checkpoint file not found: %s\n",
                     theory_opts.checkpoint_path.string().c_str());
        return kExitFileNotFound;
      }
      return attnlab::run_theory(theory_opts);
    }
    if (gc->parsed()) return attnlab::run_gradcheck(gc_opts);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const attnlab::checkpoint_error& e) {
    std::fprintf(stderr, "checkpoint error: %s\n", e.what());
    return kExitFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}

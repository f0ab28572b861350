#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "attnlab/datagen.hpp"
#include "attnlab/gradients.hpp"
#include "attnlab/model.hpp"

namespace attnlab {

enum class LossMode {
  empirical,      // dataset drawn once; full-batch GD (or minibatch SGD if batch_size > 0)
  population_mc,  // fresh Monte-Carlo batch of n samples every step
};

struct TrainConfig {
  int d = 4;
  int D = 6;
  int n = 500;              // dataset size (empirical) or per-step MC batch size
  int j_star = 1;           // 0-based
  double sigma_x = 0.25;
  double eta = 0.5;
  int iters = 400;
  std::uint64_t seed = 0;
  LossMode mode = LossMode::empirical;
  bool antithetic = true;
  int batch_size = 0;       // empirical mode only: 0 = full batch, > 0 = SGD minibatch
  int log_every = 1;
  int threads = 1;
};

// Per-iteration diagnostics; one CSV row per logged iteration.
struct MetricsRow {
  int iter = 0;
  double loss = 0;
  double alpha = 0;            // <v1, v*>
  double v1_err_norm = 0;      // ||v1 - alpha v*||
  double cos_sim = 0;          // 0 when v1 = 0
  double norm_v1 = 0;
  double norm_v2 = 0;
  double norm_w12 = 0;         // Frobenius
  double norm_w21 = 0;         // Frobenius
  double mean_attn_jstar = 0;  // mean_j of row j* of the sample-averaged S
  double min_attn_jstar = 0;   // min_j of row j* of the sample-averaged S
  double beta1 = 0;
  double beta2 = 0;
  double w11_resid = 0;        // spectral norm of W11 - beta1 v* v*^T
  double w22_resid = 0;        // spectral norm of W22 - beta2 u q^T
};

// Portable serialized model for pretrain -> finetune transfer.
// Binary layout (little-endian): magic "GSAT", u32 version = 1, u32 d,
// u32 D, u32 j_star (1-based in the file), (d+D) f64 for v, (d+D)^2 f64
// for W row-major. A sibling .json echoes the generating config.
struct Checkpoint {
  std::uint32_t version = 1;
  int d = 0;
  int D = 0;
  int j_star = 0;  // 0-based in memory
  Vec v;
  Mat W;
  std::string provenance_json;  // config echo; empty if unknown
};

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// one simultaneous update of both parameter groups
ModelParams gd_step(const ModelParams& params, const GradPair& grad, double eta);

struct TrainResult {
  std::vector<MetricsRow> metrics;
  Checkpoint checkpoint;
  GroupSparseTask task;
  ModelParams params;
};

// Gradient descent from zero initialization per the config. Metrics are
// logged every log_every steps and at the final step, evaluated at the
// post-update parameters (on the dataset in empirical mode, on the step's
// batch in population-mc mode). Throws training_diverged with the
// iteration index if the divergence guard trips.
TrainResult train(const TrainConfig& config);

struct FinetuneRow {
  int step = 0;
  double train_loss = 0;      // online loss of the consumed sample, pre-update
  double test_accuracy = 0;   // sign-prediction accuracy, sign(0) := +1
};

// Online SGD on the downstream task: v restarts at zero, W starts from the
// checkpoint, one fresh sample per step, test accuracy after each step.
std::vector<FinetuneRow> finetune_online_sgd(const Checkpoint& checkpoint,
                                             const DownstreamTask& task, int steps,
                                             double eta_tilde, RngStream data_rng,
                                             std::span<const Sample> test_set);

// Theorem-2 quantity: fraction of samples with y*f > 0 (y*f = 0 counts as
// an error). Rejects an empty set.
double evaluate_accuracy(const ModelParams& params, std::span<const Sample> samples);

// Classification accuracy under the sign(0) := +1 tie-break; this is what
// the finetune trajectory logs, so an all-zero model scores ~1/2 on a
// balanced set instead of 0.
double prediction_accuracy(const ModelParams& params, std::span<const Sample> samples);

const char* metrics_csv_header();
std::string metrics_csv_row(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows);
void write_finetune_csv(const std::filesystem::path& path, std::span<const FinetuneRow> rows);

}  // namespace attnlab

#include "attnlab/training.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "attnlab/diagnostics.hpp"
#include "attnlab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace attnlab {

namespace {

constexpr char kMagic[4] = {'G', 'S', 'A', 'T'};
constexpr double kDivergenceGuard = 1e6;

void append_u32(std::string& buf, std::uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void append_f64(std::string& buf, double v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(const std::string& buf, std::size_t& pos) {
  std::uint32_t v;
  std::memcpy(&v, buf.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

double read_f64(const std::string& buf, std::size_t& pos) {
  double v;
  std::memcpy(&v, buf.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const int dim = c.d + c.D;
  if (c.v.size() != dim || c.W.rows() != dim || c.W.cols() != dim)
    throw std::invalid_argument("save_checkpoint: inconsistent dimensions");
  std::string buf;
  buf.reserve(20 + 8 * static_cast<std::size_t>(dim) * (dim + 1));
  buf.append(kMagic, 4);
  append_u32(buf, c.version);
  append_u32(buf, static_cast<std::uint32_t>(c.d));
  append_u32(buf, static_cast<std::uint32_t>(c.D));
  append_u32(buf, static_cast<std::uint32_t>(c.j_star + 1));  // 1-based in the file
  for (int i = 0; i < dim; ++i) append_f64(buf, c.v[i]);
  for (int r = 0; r < dim; ++r)
    for (int col = 0; col < dim; ++col) append_f64(buf, c.W(r, col));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw checkpoint_error("save_checkpoint: cannot open " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw checkpoint_error("save_checkpoint: write failed for " + path.string());
  if (!c.provenance_json.empty()) {
    std::ofstream side(sidecar_path(path), std::ios::trunc);
    if (!side) throw checkpoint_error("save_checkpoint: cannot open sidecar json");
    side << c.provenance_json << "\n";
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw checkpoint_error("load_checkpoint: cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t header = 4 + 4 * sizeof(std::uint32_t);
  if (buf.size() < header) throw checkpoint_truncated_error(header, buf.size());
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw checkpoint_magic_error("load_checkpoint: bad magic bytes in " + path.string());
  std::size_t pos = 4;
  Checkpoint c;
  c.version = read_u32(buf, pos);
  if (c.version != 1)
    throw checkpoint_version_error("load_checkpoint: unsupported version " +
                                   std::to_string(c.version));
  c.d = static_cast<int>(read_u32(buf, pos));
  c.D = static_cast<int>(read_u32(buf, pos));
  const std::uint32_t j1 = read_u32(buf, pos);
  if (c.d < 1 || c.D < 1 || j1 < 1 || j1 > static_cast<std::uint32_t>(c.D))
    throw checkpoint_error("load_checkpoint: invalid dimensions in header");
  c.j_star = static_cast<int>(j1) - 1;
  const std::size_t dim = static_cast<std::size_t>(c.d) + static_cast<std::size_t>(c.D);
  const std::size_t expected = header + 8 * dim * (dim + 1);
  if (buf.size() < expected) throw checkpoint_truncated_error(expected, buf.size());
  if (buf.size() > expected)
    throw checkpoint_error("load_checkpoint: " + std::to_string(buf.size() - expected) +
                           " unexpected trailing bytes");
  const int n = static_cast<int>(dim);
  c.v.resize(n);
  for (int i = 0; i < n; ++i) c.v[i] = read_f64(buf, pos);
  c.W.resize(n, n);
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col) c.W(r, col) = read_f64(buf, pos);
  std::ifstream side(sidecar_path(path));
  if (side) {
    std::stringstream ss;
    ss << side.rdbuf();
    c.provenance_json = ss.str();
  }
  return c;
}

ModelParams gd_step(const ModelParams& params, const GradPair& grad, double eta) {
  ModelParams next = params;
  next.v -= eta * grad.gv;
  next.W -= eta * grad.gW;
  return next;
}

namespace {

std::string config_to_json(const TrainConfig& c) {
  nlohmann::ordered_json j;
  j["d"] = c.d;
  j["D"] = c.D;
  j["n"] = c.n;
  j["jstar"] = c.j_star + 1;  // 1-based externally
  j["sigma_x"] = c.sigma_x;
  j["eta"] = c.eta;
  j["iters"] = c.iters;
  j["seed"] = c.seed;
  j["mode"] = c.mode == LossMode::empirical ? "empirical" : "population-mc";
  j["antithetic"] = c.antithetic;
  j["batch_size"] = c.batch_size;
  j["log_every"] = c.log_every;
  return j.dump(2);
}

MetricsRow compute_metrics(int iter, const ModelParams& params, const GroupSparseTask& task,
                           const ProjectionBasis& basis, std::span<const Sample> samples) {
  MetricsRow row;
  row.iter = iter;
  double loss_sum = 0.0;
  Mat mean_S = Mat::Zero(task.D, task.D);
  for (const Sample& s : samples) {
    const AttentionOutput out = forward(s.Z, params);
    if (!std::isfinite(out.f) || std::abs(out.f) > kDivergenceGuard)
      throw training_diverged(iter, "model output exceeded divergence guard");
    loss_sum += logistic_loss(s.y * out.f);
    mean_S += out.S;
  }
  row.loss = loss_sum / static_cast<double>(samples.size());
  if (!std::isfinite(row.loss)) throw training_diverged(iter, "non-finite loss");
  mean_S /= static_cast<double>(samples.size());
  std::tie(row.mean_attn_jstar, row.min_attn_jstar) =
      std::pair(mean_S.row(task.j_star).mean(), mean_S.row(task.j_star).minCoeff());
  std::tie(row.alpha, row.v1_err_norm) = alpha_decomposition(params.v1(), task.v_star);
  row.norm_v1 = params.v1().norm();
  row.norm_v2 = params.v2().norm();
  row.cos_sim = row.norm_v1 > 0.0 ? row.alpha / row.norm_v1 : 0.0;
  row.norm_w12 = params.W12().norm();
  row.norm_w21 = params.W21().norm();
  std::tie(row.beta1, row.w11_resid) = w11_projection(params.W11(), task.v_star);
  if (task.D >= 2) std::tie(row.beta2, row.w22_resid) = w22_projection(params.W22(), basis);
  return row;
}

void validate(const TrainConfig& c) {
  if (c.eta <= 0.0) throw std::invalid_argument("train: eta must be positive");
  if (c.iters < 1) throw std::invalid_argument("train: iters must be >= 1");
  if (c.n < 1) throw std::invalid_argument("train: n must be >= 1");
  if (c.log_every < 1) throw std::invalid_argument("train: log_every must be >= 1");
  if (c.batch_size < 0) throw std::invalid_argument("train: batch_size must be >= 0");
  if (c.batch_size > 0 && c.mode != LossMode::empirical)
    throw std::invalid_argument("train: minibatch SGD applies to empirical mode only");
}

}  // namespace

TrainResult train(const TrainConfig& config) {
  validate(config);
  const RootRng root(config.seed);
  RngStream v_star_rng = root.stream("v-star");
  TrainResult result;
  result.task = make_task(config.d, config.D, config.j_star, config.sigma_x, v_star_rng);
  const GroupSparseTask& task = result.task;
  const ProjectionBasis basis =
      config.D >= 2 ? make_projection_basis(task.encodings, task.j_star) : ProjectionBasis{};

  RngStream data_rng = root.stream("pretrain-data");
  std::vector<Sample> dataset;
  if (config.mode == LossMode::empirical) {
    dataset = sample_pretrain_n(task, config.n, data_rng);
    if (config.antithetic) dataset = antithetic_expand(dataset);
  }

  RngStream order_rng = root.stream("batch-order");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t steps_per_epoch =
      config.batch_size > 0
          ? (dataset.size() + config.batch_size - 1) / static_cast<std::size_t>(config.batch_size)
          : 1;

  ModelParams params = ModelParams::zero(config.d, config.D);
  std::vector<Sample> step_batch;
  for (int t = 1; t <= config.iters; ++t) {
    std::span<const Sample> batch;
    if (config.mode == LossMode::empirical && config.batch_size == 0) {
      batch = dataset;
    } else if (config.mode == LossMode::empirical) {
      const std::size_t step_in_epoch = static_cast<std::size_t>(t - 1) % steps_per_epoch;
      if (step_in_epoch == 0) {
        // fresh Fisher-Yates shuffle per epoch from a dedicated stream
        RngStream shuffle = order_rng.substream(static_cast<std::uint64_t>((t - 1) / steps_per_epoch));
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[shuffle.next_u64() % i]);
      }
      const std::size_t lo = step_in_epoch * static_cast<std::size_t>(config.batch_size);
      const std::size_t hi = std::min(dataset.size(), lo + config.batch_size);
      step_batch.clear();
      for (std::size_t i = lo; i < hi; ++i) step_batch.push_back(dataset[order[i]]);
      batch = step_batch;
    } else {
      RngStream step_rng = data_rng.substream(static_cast<std::uint64_t>(t));
      step_batch = sample_pretrain_n(task, config.n, step_rng);
      if (config.antithetic) step_batch = antithetic_expand(step_batch);
      batch = step_batch;
    }

    GradPair grad;
    try {
      grad = grad_batch(batch, params, config.threads);
    } catch (const numerical_error& e) {
      throw training_diverged(t, e.what());
    }
    params = gd_step(params, grad, config.eta);

    if (t % config.log_every == 0 || t == config.iters)
      result.metrics.push_back(compute_metrics(t, params, task, basis, batch));
  }

  result.checkpoint.version = 1;
  result.checkpoint.d = config.d;
  result.checkpoint.D = config.D;
  result.checkpoint.j_star = config.j_star;
  result.checkpoint.v = params.v;
  result.checkpoint.W = params.W;
  result.checkpoint.provenance_json = config_to_json(config);
  result.params = std::move(params);
  return result;
}

std::vector<FinetuneRow> finetune_online_sgd(const Checkpoint& checkpoint,
                                             const DownstreamTask& task, int steps,
                                             double eta_tilde, RngStream data_rng,
                                             std::span<const Sample> test_set) {
  if (checkpoint.d != task.d || checkpoint.D != task.D)
    throw std::invalid_argument("finetune: checkpoint dimensions do not match the task");
  if (steps < 1) throw std::invalid_argument("finetune: steps must be >= 1");
  if (eta_tilde < 0.0) throw std::invalid_argument("finetune: eta_tilde must be >= 0");
  ModelParams params = ModelParams::zero(task.d, task.D);
  params.W = checkpoint.W;
  std::vector<FinetuneRow> rows;
  rows.reserve(steps);
  for (int i = 1; i <= steps; ++i) {
    const Sample s = sample_downstream(task, data_rng);
    FinetuneRow row;
    row.step = i;
    row.train_loss = logistic_loss(s.y * forward(s.Z, params).f);
    params = gd_step(params, grad_sample(s.Z, s.y, params), eta_tilde);
    row.test_accuracy = prediction_accuracy(params, test_set);
    rows.push_back(row);
  }
  return rows;
}

double evaluate_accuracy(const ModelParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate_accuracy: empty sample set");
  long correct = 0;
  for (const Sample& s : samples)
    if (s.y * forward(s.Z, params).f > 0.0) ++correct;
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

double prediction_accuracy(const ModelParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("prediction_accuracy: empty sample set");
  long correct = 0;
  for (const Sample& s : samples) {
    const double f = forward(s.Z, params).f;
    const double predicted = f >= 0.0 ? 1.0 : -1.0;
    if (predicted == s.y) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

const char* metrics_csv_header() {
  return "iter,loss,alpha,v1_err_norm,cos_sim,norm_v1,norm_v2,norm_w12,norm_w21,"
         "mean_attn_jstar,min_attn_jstar,beta1,beta2,w11_resid,w22_resid";
}

std::string metrics_csv_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                "%.17g,%.17g",
                r.iter, r.loss, r.alpha, r.v1_err_norm, r.cos_sim, r.norm_v1, r.norm_v2,
                r.norm_w12, r.norm_w21, r.mean_attn_jstar, r.min_attn_jstar, r.beta1, r.beta2,
                r.w11_resid, r.w22_resid);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
  out << metrics_csv_header() << "\n";
  for (const MetricsRow& r : rows) out << metrics_csv_row(r) << "\n";
}

void write_finetune_csv(const std::filesystem::path& path, std::span<const FinetuneRow> rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_finetune_csv: cannot open " + path.string());
  out << "step,train_loss,test_accuracy\n";
  char buf[128];
  for (const FinetuneRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g", r.step, r.train_loss, r.test_accuracy);
    out << buf << "\n";
  }
}

}  // namespace attnlab

#include "attnlab/runner.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "attnlab/diagnostics.hpp"
#include "attnlab/errors.hpp"
#include "attnlab/svg.hpp"

namespace attnlab {

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << "\n";
}

void write_heatmap_csv(const std::filesystem::path& path, const Mat& S) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  char buf[32];
  for (Eigen::Index r = 0; r < S.rows(); ++r) {
    for (Eigen::Index c = 0; c < S.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", S(r, c));
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

std::vector<std::pair<double, double>> alpha_trajectory(std::span<const MetricsRow> rows) {
  std::vector<std::pair<double, double>> out;
  out.reserve(rows.size());
  for (const MetricsRow& r : rows) out.emplace_back(static_cast<double>(r.iter), r.alpha);
  return out;
}

void write_metric_charts(const std::filesystem::path& dir, std::span<const MetricsRow> rows) {
  std::vector<double> t, loss, cos, ratio, alpha;
  for (const MetricsRow& r : rows) {
    t.push_back(r.iter);
    loss.push_back(r.loss);
    cos.push_back(r.cos_sim);
    ratio.push_back(r.norm_v1 > 0 ? r.norm_v2 / r.norm_v1 : 0.0);
    alpha.push_back(r.alpha);
  }
  const SvgSeries loss_series{"loss", t, loss};
  write_line_chart_svg(dir / "loss.svg", "Training loss", {&loss_series, 1});
  const SvgSeries cos_series{"cos(v1, v*)", t, cos};
  write_line_chart_svg(dir / "cos_sim.svg", "Alignment of v1 with v*", {&cos_series, 1});
  const SvgSeries ratio_series{"||v2||/||v1||", t, ratio};
  write_line_chart_svg(dir / "norm_ratio.svg", "Norm ratio ||v2||/||v1||", {&ratio_series, 1});
  const SvgSeries alpha_series{"alpha", t, alpha};
  write_line_chart_svg(dir / "alpha.svg", "Projection coefficient alpha", {&alpha_series, 1});
}

}  // namespace

void apply_pretrain_preset(std::string_view name, PretrainOptions& o) {
  if (name == "fig1-top") {
    o.config = TrainConfig{};
    o.config.d = 4;
    o.config.D = 6;
    o.config.n = 500;
    o.config.j_star = 1;  // group 2, 1-based
    o.config.sigma_x = 0.25;
    o.config.eta = 0.5;
    o.config.iters = 400;
    o.config.mode = LossMode::empirical;
    o.config.antithetic = false;
    o.config.seed = 73;
  } else if (name == "fig1-bottom") {
    o.config = TrainConfig{};
    o.config.d = 2;
    o.config.D = 4;
    o.config.n = 200;
    o.config.j_star = 1;
    o.config.sigma_x = 0.25;
    o.config.eta = 0.5;
    o.config.iters = 400;
    o.config.mode = LossMode::empirical;
    o.config.antithetic = false;
    o.config.seed = 4;
  } else if (name == "appendix-large") {
    o.config = TrainConfig{};
    o.config.d = 100;
    o.config.D = 100;
    o.config.n = 10000;
    o.config.j_star = 29;  // group 30; pass --jstar 70 for the second scenario
    o.config.sigma_x = 0.25;
    o.config.eta = 0.01;
    o.config.batch_size = 64;
    o.config.iters = 100 * ((10000 + 63) / 64);  // 100 epochs
    o.config.mode = LossMode::empirical;
    o.config.antithetic = false;
    o.config.log_every = 157;  // once per epoch
    o.config.seed = 3;
  } else if (name == "growth-alpha") {
    // population-mc run sized for the alpha ~ t^{1/3} fit
    o.config = TrainConfig{};
    o.config.d = 4;
    o.config.D = 16;
    o.config.n = 512;  // MC pairs per step
    o.config.j_star = 1;
    o.config.sigma_x = 0.25;
    o.config.eta = 0.5;
    o.config.iters = 10000;
    o.config.mode = LossMode::population_mc;
    o.config.antithetic = true;
    o.config.log_every = 10;
    o.config.seed = 5;
  } else {
    throw std::invalid_argument("unknown pretrain preset: " + std::string(name));
  }
}

void apply_finetune_preset(std::string_view name, FinetuneOptions& o) {
  if (name == "fig4-a" || name == "fig4-b") {
    o.sigma_tilde = 1.0;
    o.gamma = 1.0;
    o.steps = 400;
    o.eta_tilde = 1e-3;
    o.test_n = 1000;
    o.seed = name == "fig4-a" ? 21 : 22;
  } else {
    throw std::invalid_argument("unknown finetune preset: " + std::string(name));
  }
}

int run_pretrain(const PretrainOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  TrainResult result = train(options.config);
  write_metrics_csv(options.out_dir / "metrics.csv", result.metrics);
  save_checkpoint(result.checkpoint, options.out_dir / "checkpoint.gsat");

  RngStream eval_rng = RootRng(options.config.seed).stream("eval");
  const std::vector<Sample> eval_set =
      sample_pretrain_n(result.task, options.report_eval_n, eval_rng);
  const auto traj = alpha_trajectory(result.metrics);
  const TheoryReport report = make_theory_report(result.params, result.task, eval_set, traj);
  write_text_file(options.out_dir / "report.json", theory_report_to_json(report));

  if (options.export_data) {
    std::vector<Sample> dataset;
    if (options.config.mode == LossMode::empirical) {
      RngStream data_rng = RootRng(options.config.seed).stream("pretrain-data");
      dataset = sample_pretrain_n(result.task, options.config.n, data_rng);
      if (options.config.antithetic) dataset = antithetic_expand(dataset);
    } else {
      dataset = eval_set;
    }
    write_dataset_csv(*options.export_data, dataset);
  }
  if (options.svg) write_metric_charts(options.out_dir, result.metrics);

  const MetricsRow& last = result.metrics.back();
  std::printf("pretrain done: iters=%d loss=%.6f alpha=%.4f cos=%.4f min_attn_jstar=%.4f\n",
              last.iter, last.loss, last.alpha, last.cos_sim, last.min_attn_jstar);
  return 0;
}

int run_finetune(const FinetuneOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  const Checkpoint checkpoint = load_checkpoint(options.checkpoint_path);
  const RootRng root(options.seed);
  RngStream v_rng = root.stream("downstream-vstar");
  const DownstreamTask task =
      make_downstream_task(checkpoint.d, checkpoint.D, checkpoint.j_star, options.gamma,
                           options.sigma_tilde, Vec(v_rng.unit_vec(checkpoint.d)));
  RngStream eval_rng = root.stream("eval");
  const std::vector<Sample> test_set = sample_downstream_n(task, options.test_n, eval_rng);
  const std::vector<FinetuneRow> rows = finetune_online_sgd(
      checkpoint, task, options.steps, options.eta_tilde, root.stream("downstream-data"), test_set);
  write_finetune_csv(options.out_dir / "finetune.csv", rows);
  if (options.svg) {
    std::vector<double> t, acc, loss;
    for (const FinetuneRow& r : rows) {
      t.push_back(r.step);
      acc.push_back(r.test_accuracy);
      loss.push_back(r.train_loss);
    }
    const SvgSeries acc_series{"test accuracy", t, acc};
    write_line_chart_svg(options.out_dir / "test_accuracy.svg", "Downstream test accuracy",
                         {&acc_series, 1});
    const SvgSeries loss_series{"online loss", t, loss};
    write_line_chart_svg(options.out_dir / "finetune_loss.svg", "Downstream online loss",
                         {&loss_series, 1});
  }
  std::printf("finetune done: steps=%d final_test_accuracy=%.4f\n", options.steps,
              rows.back().test_accuracy);
  return 0;
}

namespace {

struct ProvenanceInfo {
  std::uint64_t seed = 0;
  double sigma_x = 0.25;
};

ProvenanceInfo parse_provenance(const Checkpoint& c) {
  if (c.provenance_json.empty())
    throw std::runtime_error(
        "checkpoint has no .json sidecar; cannot reconstruct the task for diagnostics");
  const auto j = nlohmann::json::parse(c.provenance_json);
  ProvenanceInfo info;
  info.seed = j.at("seed").get<std::uint64_t>();
  info.sigma_x = j.at("sigma_x").get<double>();
  return info;
}

}  // namespace

int run_theory(const TheoryOptions& options) {
  std::filesystem::create_directories(options.out_dir);
  const Checkpoint checkpoint = load_checkpoint(options.checkpoint_path);
  const ProvenanceInfo info = parse_provenance(checkpoint);
  const RootRng root(info.seed);
  RngStream v_star_rng = root.stream("v-star");
  const GroupSparseTask task =
      make_task(checkpoint.d, checkpoint.D, checkpoint.j_star, info.sigma_x, v_star_rng);
  ModelParams params = ModelParams::zero(checkpoint.d, checkpoint.D);
  params.v = checkpoint.v;
  params.W = checkpoint.W;

  RngStream eval_rng = root.stream("eval").substream(1);  // disjoint from pretrain's report set
  const std::vector<Sample> eval_set = sample_pretrain_n(task, options.eval_n, eval_rng);

  std::vector<std::pair<double, double>> traj;
  if (options.metrics_csv) traj = read_alpha_trajectory(*options.metrics_csv);
  const TheoryReport report = make_theory_report(params, task, eval_set, traj, options.fit_t_lo,
                                                 options.fit_t_hi);
  write_text_file(options.out_dir / "report.json", theory_report_to_json(report));
  const Mat mean_S = mean_attention_matrix(params, eval_set);
  write_heatmap_csv(options.out_dir / "heatmap.csv", mean_S);
  if (options.svg) write_heatmap_svg(options.out_dir / "heatmap.svg", "Mean attention", mean_S);
  std::printf("theory done: alpha=%.4f attn_min_jstar=%.4f sandwich_pass=%.4f\n", report.alpha,
              report.attn_min_jstar, report.sandwich_pass_rate);
  return 0;
}

int run_gradcheck(const GradcheckOptions& options, const std::function<void(GradPair&)>& mutate) {
  if (options.trials < 1) throw std::invalid_argument("gradcheck: trials must be >= 1");
  if (options.d < 1 || options.D < 1) throw std::invalid_argument("gradcheck: bad dimensions");
  RngStream rng = RootRng(options.seed).stream("gradcheck");
  double max_fd_err = 0.0;
  double max_dual_err = 0.0;
  for (int trial = 0; trial < options.trials; ++trial) {
    RngStream trial_rng = rng.substream(trial);
    GroupSparseTask task = make_task(options.d, options.D, trial % options.D, 0.25, trial_rng);
    const std::vector<Sample> batch = sample_pretrain_n(task, 2, trial_rng);
    ModelParams params = ModelParams::zero(options.d, options.D);
    params.v = options.scale * trial_rng.normal_vec(options.d + options.D);
    params.W = options.scale *
               Mat::NullaryExpr(options.d + options.D, options.d + options.D,
                                [&](Eigen::Index, Eigen::Index) { return trial_rng.normal(); });
    GradPair analytic = grad_batch(batch, params);
    if (mutate) mutate(analytic);
    const GradPair fd = fd_grad(batch, params);
    const double denom = 1.0 + std::sqrt(analytic.gv.squaredNorm() + analytic.gW.squaredNorm());
    const double fd_err = std::sqrt((analytic.gv - fd.gv).squaredNorm() +
                                    (analytic.gW - fd.gW).squaredNorm()) /
                          denom;
    max_fd_err = std::max(max_fd_err, fd_err);
    for (const Sample& s : batch) {
      GradPair fast = grad_sample(s.Z, s.y, params);
      if (mutate) mutate(fast);
      const GradPair ref = grad_sample_reference(s.Z, s.y, params);
      max_dual_err =
          std::max(max_dual_err, (fast.gW - ref.gW).cwiseAbs().maxCoeff());
    }
  }
  std::printf("gradcheck: trials=%d max_fd_rel_err=%.3e max_dual_form_err=%.3e\n", options.trials,
              max_fd_err, max_dual_err);
  const bool ok = max_fd_err <= 1e-6 && max_dual_err <= 1e-10;
  if (!ok) std::printf("gradcheck FAILED\n");
  return ok ? 0 : 1;
}

std::vector<std::pair<double, double>> read_alpha_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics csv: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty metrics csv: " + path.string());
  std::stringstream header(line);
  std::string column;
  int iter_idx = -1, alpha_idx = -1, idx = 0;
  while (std::getline(header, column, ',')) {
    if (column == "iter") iter_idx = idx;
    if (column == "alpha") alpha_idx = idx;
    ++idx;
  }
  if (iter_idx < 0 || alpha_idx < 0)
    throw std::runtime_error("metrics csv lacks iter/alpha columns: " + path.string());
  std::vector<std::pair<double, double>> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    double iter = 0, alpha = 0;
    int i = 0;
    while (std::getline(row, column, ',')) {
      if (i == iter_idx) iter = std::stod(column);
      if (i == alpha_idx) alpha = std::stod(column);
      ++i;
    }
    out.emplace_back(iter, alpha);
  }
  return out;
}

}  // namespace attnlab

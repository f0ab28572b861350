#include "attnlab/gradients.hpp"

#include <stdexcept>
#include <thread>
#include <vector>

#include "attnlab/errors.hpp"

namespace attnlab {

GradPair GradPair::zero(int d, int D) {
  GradPair g;
  g.gv = Vec::Zero(d + D);
  g.gW = Mat::Zero(d + D, d + D);
  return g;
}

GradPair grad_sample(const Mat& Z, double y, const ModelParams& params) {
  GradPair g;
  const Mat S = attention_matrix(Z, params.W);
  const Vec row_sums = S.rowwise().sum();
  const Vec Zr = Z * row_sums;
  const double f = params.v.dot(Zr);
  const double scale = logistic_loss_derivative(y * f) * y;
  g.gv = scale * Zr;
  const Vec u = Z.transpose() * params.v;          // u_{j'} = v^T z_{j'}
  const Eigen::RowVectorXd col_dots = u.transpose() * S;  // (S^T u)_j
  Mat M = u.asDiagonal() * S;
  M -= S * col_dots.asDiagonal();
  g.gW = scale * (Z * M * Z.transpose());
  if (!g.gv.allFinite() || !g.gW.allFinite())
    throw numerical_error("grad_sample: non-finite gradient");
  return g;
}

GradPair grad_sample_reference(const Mat& Z, double y, const ModelParams& params) {
  GradPair g;
  const Mat S = attention_matrix(Z, params.W);
  const auto D = S.cols();
  const auto dim = Z.rows();
  const double f = params.v.dot(Z * S.rowwise().sum());
  const double scale = logistic_loss_derivative(y * f) * y;
  g.gv = Vec::Zero(dim);
  for (Eigen::Index j = 0; j < D; ++j)
    for (Eigen::Index jp = 0; jp < D; ++jp) g.gv += S(jp, j) * Z.col(jp);
  g.gv *= scale;
  g.gW = Mat::Zero(dim, dim);
  for (Eigen::Index j = 0; j < D; ++j) {
    Vec acc = Vec::Zero(dim);
    for (Eigen::Index jp = 0; jp < D; ++jp) {
      const double u_jp = params.v.dot(Z.col(jp));
      for (Eigen::Index jpp = 0; jpp < D; ++jpp) {
        if (jpp == jp) continue;
        acc += S(jp, j) * S(jpp, j) * u_jp * (Z.col(jp) - Z.col(jpp));
      }
    }
    g.gW += acc * Z.col(j).transpose();
  }
  g.gW *= scale;
  return g;
}

namespace {

// sum of per-sample gradients over [begin, end), accumulated in index order
GradPair grad_sum_range(std::span<const Sample> samples, const ModelParams& params,
                        std::size_t begin, std::size_t end) {
  GradPair acc = GradPair::zero(params.d, params.D);
  for (std::size_t i = begin; i < end; ++i) {
    const GradPair g = grad_sample(samples[i].Z, samples[i].y, params);
    acc.gv += g.gv;
    acc.gW += g.gW;
  }
  return acc;
}

}  // namespace

GradPair grad_batch(std::span<const Sample> samples, const ModelParams& params, int threads) {
  if (samples.empty()) throw std::invalid_argument("grad_batch: empty batch");
  const std::size_t n = samples.size();
  GradPair total = GradPair::zero(params.d, params.D);
  if (threads <= 1 || n < 4) {
    total = grad_sum_range(samples, params, 0, n);
  } else {
    const std::size_t workers = std::min<std::size_t>(threads, n / 2);
    // chunk boundaries on even offsets so antithetic pairs stay together
    std::vector<std::size_t> bounds(workers + 1, 0);
    for (std::size_t w = 1; w < workers; ++w)
      bounds[w] = ((n * w / workers) / 2) * 2;
    bounds[workers] = n;
    std::vector<GradPair> partial(workers, GradPair::zero(params.d, params.D));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        partial[w] = grad_sum_range(samples, params, bounds[w], bounds[w + 1]);
      });
    }
    for (auto& t : pool) t.join();
    for (std::size_t w = 0; w < workers; ++w) {
      total.gv += partial[w].gv;
      total.gW += partial[w].gW;
    }
  }
  total.gv /= static_cast<double>(n);
  total.gW /= static_cast<double>(n);
  return total;
}

GradPair population_grad_mc(const GroupSparseTask& task, const ModelParams& params,
                            int batch_size, RngStream rng, bool antithetic, int threads) {
  if (batch_size < 1) throw std::invalid_argument("population_grad_mc: batch size must be >= 1");
  GradPair total = GradPair::zero(params.d, params.D);
  const int chunk_pairs = 4096;  // bounds per-chunk memory at large batch sizes
  std::vector<Sample> chunk;
  long count = 0;
  for (int start = 0; start < batch_size; start += chunk_pairs) {
    const int m = std::min(chunk_pairs, batch_size - start);
    chunk = sample_pretrain_n(task, m, rng);
    if (antithetic) chunk = antithetic_expand(chunk);
    const GradPair g = grad_batch(chunk, params, threads);
    const double w = static_cast<double>(chunk.size());
    total.gv += w * g.gv;
    total.gW += w * g.gW;
    count += static_cast<long>(chunk.size());
  }
  total.gv /= static_cast<double>(count);
  total.gW /= static_cast<double>(count);
  return total;
}

GradPair fd_grad(std::span<const Sample> samples, const ModelParams& params, double h) {
  if (h <= 0.0) throw std::invalid_argument("fd_grad: step must be positive");
  GradPair g = GradPair::zero(params.d, params.D);
  ModelParams probe = params;
  const auto dim = params.v.size();
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double orig = params.v[i];
    const double step = h * (1.0 + std::abs(orig));
    probe.v[i] = orig + step;
    const double up = loss_on_dataset(probe, samples);
    probe.v[i] = orig - step;
    const double down = loss_on_dataset(probe, samples);
    probe.v[i] = orig;
    g.gv[i] = (up - down) / (2.0 * step);
  }
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      const double orig = params.W(r, c);
      const double step = h * (1.0 + std::abs(orig));
      probe.W(r, c) = orig + step;
      const double up = loss_on_dataset(probe, samples);
      probe.W(r, c) = orig - step;
      const double down = loss_on_dataset(probe, samples);
      probe.W(r, c) = orig;
      g.gW(r, c) = (up - down) / (2.0 * step);
    }
  }
  return g;
}

}  // namespace attnlab

#pragma once

#include <span>

#include "attnlab/datagen.hpp"
#include "attnlab/model.hpp"

namespace attnlab {

struct GradPair {
  Vec gv;  // d + D
  Mat gW;  // (d+D) x (d+D)

  static GradPair zero(int d, int D);
};

// Analytic per-sample gradient of l(y * f(Z)) w.r.t. (v, W).
//   gv = l'(yf) * y * Z S 1_D
//   gW = l'(yf) * y * Z (diag(u) S - S diag(S^T u)) Z^T,   u = Z^T v
// The W form is the O(D^2 (d+D)) factorization of the softmax chain rule;
// grad_sample_reference below evaluates the raw triple sum instead.
GradPair grad_sample(const Mat& Z, double y, const ModelParams& params);

// Reference evaluation of the same gradient via the explicit sum over
// (j, j', j'' != j'); O(D^3 (d+D)). Kept as an independent route for tests
// and the gradcheck harness.
GradPair grad_sample_reference(const Mat& Z, double y, const ModelParams& params);

// Arithmetic mean of grad_sample over the batch, accumulated in index
// order. threads > 1 splits the batch into contiguous chunks (aligned to
// even offsets so antithetic pairs are never separated) and combines the
// chunk sums in chunk order; results depend on the chunk count but not on
// scheduling. Rejects an empty batch.
GradPair grad_batch(std::span<const Sample> samples, const ModelParams& params, int threads = 1);

// Monte-Carlo estimate of the population gradient from batch_size fresh
// samples (antithetic-expanded to 2*batch_size when enabled). Streams the
// samples in index order; a given (task, params, stream, flags) tuple is
// bit-reproducible.
GradPair population_grad_mc(const GroupSparseTask& task, const ModelParams& params,
                            int batch_size, RngStream rng, bool antithetic = true,
                            int threads = 1);

// Central finite differences of loss_on_dataset, coordinate by coordinate,
// with per-coordinate step h * (1 + |coordinate|). The independent oracle
// for the analytic formulas.
GradPair fd_grad(std::span<const Sample> samples, const ModelParams& params, double h = 1e-5);

}  // namespace attnlab

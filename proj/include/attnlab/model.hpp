#pragma once

#include <span>

#include <Eigen/Core>

#include "attnlab/datagen.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

// Trainable parameters of the one-layer self-attention model: a value
// vector v in R^{d+D} and a combined query-key matrix W in R^{(d+D)x(d+D)}.
// The block accessors are live views into the same storage.
struct ModelParams {
  int d = 0;
  int D = 0;
  Vec v;  // d + D
  Mat W;  // (d+D) x (d+D)

  static ModelParams zero(int d, int D);

  auto v1() { return v.head(d); }
  auto v1() const { return v.head(d); }
  auto v2() { return v.tail(D); }
  auto v2() const { return v.tail(D); }
  auto W11() { return W.topLeftCorner(d, d); }
  auto W11() const { return W.topLeftCorner(d, d); }
  auto W12() { return W.topRightCorner(d, D); }
  auto W12() const { return W.topRightCorner(d, D); }
  auto W21() { return W.bottomLeftCorner(D, d); }
  auto W21() const { return W.bottomLeftCorner(D, d); }
  auto W22() { return W.bottomRightCorner(D, D); }
  auto W22() const { return W.bottomRightCorner(D, D); }
};

struct AttentionOutput {
  Mat S;          // D x D, column-stochastic: S(j', j) = softmax_{j'} z_{j'}^T W z_j
  double f = 0.0; // v^T Z S 1_D
};

// Column-stochastic score matrix. Column j is the softmax over j' of
// z_{j'}^T W z_j, stabilized by subtracting the column max before exp.
// Throws numerical_error if any logit is non-finite.
Mat attention_matrix(const Mat& Z, const Mat& W);

AttentionOutput forward(const Mat& Z, const ModelParams& params);

// Binary cross-entropy of the margin a = y*f, computed with the stable
// branch l(a) = max(0,-a) + log1p(exp(-|a|)).
double logistic_loss(double a);

// l'(a) = -1 / (1 + exp(a)), overflow-free on both tails
double logistic_loss_derivative(double a);

// mean of l(y*f) over the samples; rejects an empty set
double loss_on_dataset(const ModelParams& params, std::span<const Sample> samples);

}  // namespace attnlab

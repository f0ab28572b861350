#include "attnlab/model.hpp"

#include <cmath>
#include <stdexcept>

#include "attnlab/errors.hpp"

namespace attnlab {

ModelParams ModelParams::zero(int d, int D) {
  ModelParams p;
  p.d = d;
  p.D = D;
  p.v = Vec::Zero(d + D);
  p.W = Mat::Zero(d + D, d + D);
  return p;
}

Mat attention_matrix(const Mat& Z, const Mat& W) {
  if (Z.rows() != W.cols() || W.rows() != W.cols())
    throw std::invalid_argument("attention_matrix: shape mismatch");
  Mat logits = Z.transpose() * (W * Z);  // (j', j) = z_{j'}^T W z_j
  if (!logits.allFinite())
    throw numerical_error("attention_matrix: non-finite attention logits");
  const auto D = logits.cols();
  Mat S(D, D);
  for (Eigen::Index j = 0; j < D; ++j) {
    const double m = logits.col(j).maxCoeff();
    S.col(j) = (logits.col(j).array() - m).exp();
    S.col(j) /= S.col(j).sum();
  }
  return S;
}

AttentionOutput forward(const Mat& Z, const ModelParams& params) {
  if (Z.rows() != params.v.size())
    throw std::invalid_argument("forward: input and parameter sizes disagree");
  AttentionOutput out;
  out.S = attention_matrix(Z, params.W);
  out.f = params.v.dot(Z * out.S.rowwise().sum());
  return out;
}

double logistic_loss(double a) {
  return std::max(0.0, -a) + std::log1p(std::exp(-std::abs(a)));
}

double logistic_loss_derivative(double a) {
  if (a >= 0.0) {
    const double e = std::exp(-a);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(a));
}

double loss_on_dataset(const ModelParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("loss_on_dataset: empty sample set");
  double total = 0.0;
  for (const Sample& s : samples) total += logistic_loss(s.y * forward(s.Z, params).f);
  return total / static_cast<double>(samples.size());
}

}  // namespace attnlab

#include "attnlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "attnlab/gradients.hpp"

namespace attnlab {

ProjectionBasis make_projection_basis(const PositionalEncodingSet& enc, int j_star) {
  if (enc.D < 2) throw std::invalid_argument("projection basis: needs D >= 2");
  if (j_star < 0 || j_star >= enc.D)
    throw std::invalid_argument("projection basis: j_star out of range");
  ProjectionBasis b;
  b.q = enc.P.rowwise().sum();
  b.u = static_cast<double>(enc.D) * enc.P.col(j_star) - b.q;
  return b;
}

std::pair<double, double> alpha_decomposition(const Vec& v1, const Vec& v_star) {
  const double alpha = v1.dot(v_star);
  return {alpha, (v1 - alpha * v_star).norm()};
}

double spectral_norm(const Mat& A) {
  if (A.size() == 0) return 0.0;
  if (A.rows() == 1 || A.cols() == 1) return A.norm();
  // power iteration on A^T A from a fixed pseudo-random start
  RngStream rng(0x5eca11u);
  Vec x = rng.normal_vec(A.cols());
  x.normalize();
  double sigma = 0.0;
  for (int it = 0; it < 50; ++it) {
    Vec y = A.transpose() * (A * x);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    y /= norm;
    const double next = std::sqrt(norm);
    if (std::abs(next - sigma) <= 1e-10 * std::max(1.0, next)) {
      sigma = next;
      break;
    }
    sigma = next;
    x = y;
  }
  return sigma;
}

std::pair<double, double> w11_projection(const Mat& W11, const Vec& v_star) {
  // v* v*^T has unit Frobenius norm, so the least-squares coefficient is
  // the plain inner product v*^T W11 v*
  const double beta1 = v_star.dot(W11 * v_star);
  return {beta1, spectral_norm(W11 - beta1 * v_star * v_star.transpose())};
}

std::pair<double, double> w22_projection(const Mat& W22, const ProjectionBasis& basis) {
  const double denom = basis.u.squaredNorm() * basis.q.squaredNorm();
  if (denom <= 0.0) throw std::invalid_argument("w22_projection: degenerate basis");
  const double beta2 = basis.u.dot(W22 * basis.q) / denom;
  return {beta2, spectral_norm(W22 - beta2 * basis.u * basis.q.transpose())};
}

std::pair<double, double> attention_concentration(const Mat& S, int j_star) {
  const auto D = S.cols();
  if (j_star < 0 || j_star >= D)
    throw std::invalid_argument("attention_concentration: j_star out of range");
  const double min_target = S.row(j_star).minCoeff();
  double max_off = 0.0;
  for (Eigen::Index jp = 0; jp < D; ++jp) {
    if (jp == j_star) continue;
    max_off = std::max(max_off, S.row(jp).maxCoeff());
  }
  return {min_target, max_off};
}

double growth_fit(std::span<const std::pair<double, double>> t_alpha, double t_lo, double t_hi) {
  std::vector<std::pair<double, double>> window;
  for (const auto& [t, a] : t_alpha) {
    if (t < t_lo || t > t_hi) continue;
    if (a <= 0.0)
      throw std::invalid_argument("growth_fit: nonpositive alpha inside the fit window");
    window.emplace_back(std::log(t), std::log(a));
  }
  if (window.size() < 10) throw std::invalid_argument("growth_fit: needs >= 10 points in window");
  const auto [lo_it, hi_it] = std::minmax_element(
      window.begin(), window.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  if (hi_it->first - lo_it->first < std::log(10.0))
    throw std::invalid_argument("growth_fit: window must span at least one decade");
  double mx = 0, my = 0;
  for (const auto& [x, y] : window) {
    mx += x;
    my += y;
  }
  mx /= static_cast<double>(window.size());
  my /= static_cast<double>(window.size());
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : window) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  return sxy / sxx;
}

SandwichOutcome sandwich_check(const Sample& sample, const ModelParams& params,
                               const GroupSparseTask& task, double alpha) {
  const AttentionOutput out = forward(sample.Z, params);
  const double threshold = 1.0 - 1.0 / static_cast<double>(task.D);
  if (out.S.row(task.j_star).minCoeff() < threshold) return SandwichOutcome::not_applicable;
  const double yf = sample.y * out.f;
  const double g = sample.y * task.v_star.dot(sample.X.col(task.j_star));
  const double da = static_cast<double>(task.D) * alpha;
  const bool ok = (da / 2.0 * g - 1.0 <= yf) && (yf <= da * g + 1.0);
  return ok ? SandwichOutcome::pass : SandwichOutcome::fail;
}

bool sandwich_lower_bound_check(const Sample& sample, const ModelParams& params,
                                const GroupSparseTask& task) {
  const auto [alpha, err_norm] = alpha_decomposition(params.v1(), task.v_star);
  const double yf = sample.y * forward(sample.Z, params).f;
  const double b1 = (sample.X.transpose() * task.v_star).norm();
  double b2 = 0.0;
  if (err_norm > 0.0) {
    const Vec e_hat = (Vec(params.v1()) - alpha * task.v_star) / err_norm;
    b2 = (sample.X.transpose() * e_hat).norm();
  }
  const double lower =
      -static_cast<double>(task.D) * (std::abs(alpha) * b1 + err_norm * b2);
  return yf >= lower - 1e-12;
}

FirstStepEstimate first_step_oracle(const GroupSparseTask& task, int sample_count,
                                    RngStream rng, bool antithetic) {
  if (sample_count < 1000)
    throw std::invalid_argument("first_step_oracle: needs at least 10^3 samples");
  const ModelParams zero = ModelParams::zero(task.d, task.D);
  Vec sum = Vec::Zero(task.d);
  Vec sum_sq = Vec::Zero(task.d);
  for (int i = 0; i < sample_count; ++i) {
    const Sample s = sample_pretrain(task, rng);
    Vec contrib = -grad_sample(s.Z, s.y, zero).gv.head(task.d);
    if (antithetic) {
      // the mirrored sample contributes an identical v1 block; averaging the
      // pair keeps the estimator aligned with the antithetic training stream
      Sample m;
      m.X = -s.X;
      m.y = -s.y;
      m.Z = s.Z;
      m.Z.topRows(task.d) = m.X;
      contrib = 0.5 * (contrib - grad_sample(m.Z, m.y, zero).gv.head(task.d));
    }
    sum += contrib;
    sum_sq += contrib.cwiseProduct(contrib);
  }
  const double n = static_cast<double>(sample_count);
  FirstStepEstimate est;
  est.estimate = sum / n;
  est.target = task.sigma_x / std::sqrt(2.0 * 3.14159265358979323846) * task.v_star;
  Vec var = (sum_sq - n * est.estimate.cwiseProduct(est.estimate)) / (n - 1.0);
  est.std_error = (var.cwiseMax(0.0) / n).cwiseSqrt();
  est.z_scores = (est.estimate - est.target).cwiseAbs().cwiseQuotient(
      est.std_error.cwiseMax(1e-300));
  return est;
}

Mat mean_attention_matrix(const ModelParams& params, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("mean_attention_matrix: empty sample set");
  Mat acc = Mat::Zero(params.D, params.D);
  for (const Sample& s : samples) acc += attention_matrix(s.Z, params.W);
  return acc / static_cast<double>(samples.size());
}

TheoryReport make_theory_report(const ModelParams& params, const GroupSparseTask& task,
                                std::span<const Sample> eval_samples,
                                std::span<const std::pair<double, double>> t_alpha,
                                double fit_t_lo, double fit_t_hi) {
  TheoryReport rep;
  rep.v2_norm = params.v2().norm();
  rep.w12_norm = params.W12().norm();
  rep.w21_norm = params.W21().norm();
  const auto [alpha, err] = alpha_decomposition(params.v1(), task.v_star);
  rep.alpha = alpha;
  rep.v1_err_norm = err;
  std::tie(rep.beta1, rep.w11_resid) = w11_projection(params.W11(), task.v_star);
  const ProjectionBasis basis = make_projection_basis(task.encodings, task.j_star);
  std::tie(rep.beta2, rep.w22_resid) = w22_projection(params.W22(), basis);
  const Mat mean_S = mean_attention_matrix(params, eval_samples);
  std::tie(rep.attn_min_jstar, rep.attn_max_offtarget) =
      attention_concentration(mean_S, task.j_star);
  long applicable = 0, passed = 0;
  for (const Sample& s : eval_samples) {
    switch (sandwich_check(s, params, task, alpha)) {
      case SandwichOutcome::pass:
        ++applicable;
        ++passed;
        break;
      case SandwichOutcome::fail:
        ++applicable;
        break;
      case SandwichOutcome::not_applicable:
        break;
    }
  }
  rep.sandwich_pass_rate =
      applicable == 0 ? 1.0 : static_cast<double>(passed) / static_cast<double>(applicable);
  if (!t_alpha.empty()) {
    const double hi = fit_t_hi > 0.0 ? fit_t_hi : t_alpha.back().first;
    try {
      rep.growth_slope = growth_fit(t_alpha, fit_t_lo, hi);
    } catch (const std::invalid_argument&) {
      // trajectory too short or alpha nonpositive in window: leave unset
    }
  }
  return rep;
}

std::string theory_report_to_json(const TheoryReport& rep) {
  nlohmann::ordered_json j;
  j["prop1"] = {{"v2_norm", rep.v2_norm}, {"w12_norm", rep.w12_norm}, {"w21_norm", rep.w21_norm}};
  j["alpha"] = rep.alpha;
  j["v1_err_norm"] = rep.v1_err_norm;
  j["beta1"] = rep.beta1;
  j["w11_resid"] = rep.w11_resid;
  j["beta2"] = rep.beta2;
  j["w22_resid"] = rep.w22_resid;
  j["attn_min_jstar"] = rep.attn_min_jstar;
  j["attn_max_offtarget"] = rep.attn_max_offtarget;
  if (rep.growth_slope) j["growth_slope"] = *rep.growth_slope;
  j["sandwich_pass_rate"] = rep.sandwich_pass_rate;
  return j.dump(2);
}

}  // namespace attnlab

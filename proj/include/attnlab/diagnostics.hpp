#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attnlab/datagen.hpp"
#include "attnlab/model.hpp"

namespace attnlab {

// Rank-one directions predicted for W22: u = sum_{j != j*}(p_{j*} - p_j),
// q = sum_j p_j.
struct ProjectionBasis {
  Vec u;
  Vec q;
};

ProjectionBasis make_projection_basis(const PositionalEncodingSet& enc, int j_star);

// v1 = alpha v* + err with <err, v*> = 0; returns (alpha, ||err||)
std::pair<double, double> alpha_decomposition(const Vec& v1, const Vec& v_star);

// least-squares coefficient of W11 onto v* v*^T and the spectral norm of
// the residual; returns (beta1, resid)
std::pair<double, double> w11_projection(const Mat& W11, const Vec& v_star);

// least-squares coefficient of W22 onto u q^T; returns (beta2, resid)
std::pair<double, double> w22_projection(const Mat& W22, const ProjectionBasis& basis);

// (min_j S(j*, j), max over j' != j* and j of S(j', j))
std::pair<double, double> attention_concentration(const Mat& S, int j_star);

// least-squares slope of log(alpha) vs log(t) over t in [t_lo, t_hi];
// requires >= 10 points spanning at least one decade with alpha > 0
double growth_fit(std::span<const std::pair<double, double>> t_alpha, double t_lo, double t_hi);

enum class SandwichOutcome { pass, fail, not_applicable };

// Conditional two-sided output bound, applicable when the sample's
// attention is concentrated (S(j*, j) >= 1 - 1/D for every column j):
//   (D a / 2) y<v*, x_{j*}> - 1 <= y f <= D a y<v*, x_{j*}> + 1
SandwichOutcome sandwich_check(const Sample& sample, const ModelParams& params,
                               const GroupSparseTask& task, double alpha);

// Unconditional Cauchy-Schwarz lower bound (no concentration assumption):
//   y f >= -D |alpha| sqrt(sum_j <v*, x_j>^2) - D ||err|| sqrt(sum_j <e, x_j>^2)
bool sandwich_lower_bound_check(const Sample& sample, const ModelParams& params,
                                const GroupSparseTask& task);

// largest singular value by power iteration (50 iterations, tol 1e-10)
double spectral_norm(const Mat& A);

struct FirstStepEstimate {
  Vec estimate;    // MC mean of the v1 block of -grad at zero params
  Vec target;      // (sigma_x / sqrt(2 pi)) v*
  Vec std_error;   // per-coordinate MC standard error of the estimate
  Vec z_scores;    // |estimate - target| / std_error
};

// Monte-Carlo check of the first gradient step against the closed form
// E[x sign(<x, v>)] = sigma_x sqrt(2/pi) v. With antithetic = true the
// estimate is averaged over sample_count pairs (pair members contribute
// identical values, so the standard error is computed per pair).
FirstStepEstimate first_step_oracle(const GroupSparseTask& task, int sample_count,
                                    RngStream rng, bool antithetic = false);

// end-of-run structural summary, serialized to report.json
struct TheoryReport {
  double v2_norm = 0;
  double w12_norm = 0;
  double w21_norm = 0;
  double alpha = 0;
  double v1_err_norm = 0;
  double beta1 = 0;
  double w11_resid = 0;
  double beta2 = 0;
  double w22_resid = 0;
  double attn_min_jstar = 0;
  double attn_max_offtarget = 0;
  std::optional<double> growth_slope;  // absent when no trajectory window is valid
  double sandwich_pass_rate = 0;       // over applicable samples; 1.0 if none applicable
};

// Evaluates all diagnostics for a trained model on fresh samples and
// optionally fits the growth exponent from a logged (t, alpha) trajectory.
TheoryReport make_theory_report(const ModelParams& params, const GroupSparseTask& task,
                                std::span<const Sample> eval_samples,
                                std::span<const std::pair<double, double>> t_alpha = {},
                                double fit_t_lo = 100.0, double fit_t_hi = 0.0);

std::string theory_report_to_json(const TheoryReport& report);

// sample-averaged attention matrix over the given samples
Mat mean_attention_matrix(const ModelParams& params, std::span<const Sample> samples);

}  // namespace attnlab

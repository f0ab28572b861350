#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "attnlab/positional.hpp"
#include "attnlab/rng.hpp"

namespace attnlab {

// Group-sparse classification task: features X in R^{d x D} with i.i.d.
// N(0, sigma_x^2) entries grouped column-wise; the label depends only on
// group j_star through y = sign(<x_{j_star}, v_star>). Indices are 0-based
// in code; file formats and CLI flags use the 1-based convention.
struct GroupSparseTask {
  int d = 0;
  int D = 0;
  int j_star = 0;  // 0-based
  Vec v_star;      // unit vector, size d
  double sigma_x = 0.25;
  PositionalEncodingSet encodings;  // cached, derived from D
};

GroupSparseTask make_task(int d, int D, int j_star, double sigma_x, const Vec& v_star);
GroupSparseTask make_task(int d, int D, int j_star, double sigma_x, RngStream& v_star_rng);

// Downstream task (transfer target): sub-Gaussian features instantiated as
// Gaussian with scale sigma_tilde, linearly separable with margin gamma
// along the unit direction v_tilde in group j_star.
struct DownstreamTask {
  int d = 0;
  int D = 0;
  int j_star = 0;  // 0-based
  Vec v_tilde;     // unit vector, size d
  double gamma = 1.0;
  double sigma_tilde = 1.0;
  PositionalEncodingSet encodings;
};

DownstreamTask make_downstream_task(int d, int D, int j_star, double gamma,
                                    double sigma_tilde, const Vec& v_tilde);

struct Sample {
  Mat X;          // d x D
  double y = 1.0; // +1 or -1
  Mat Z;          // (d+D) x D, column j = [x_j; p_j]
};

Sample sample_pretrain(const GroupSparseTask& task, RngStream& rng);
std::vector<Sample> sample_pretrain_n(const GroupSparseTask& task, int n, RngStream& rng);

// For each (X, y) appends the mirrored sample (-X, -y) with the identical
// positional block. Pairs are adjacent in the output: [s0, -s0, s1, -s1, ...].
// Adjacency matters: fixed-order gradient accumulation then cancels the
// v2/W12/W21 blocks exactly in IEEE arithmetic, not just statistically.
std::vector<Sample> antithetic_expand(std::span<const Sample> samples);

Sample sample_downstream(const DownstreamTask& task, RngStream& rng);
std::vector<Sample> sample_downstream_n(const DownstreamTask& task, int n, RngStream& rng);

// CSV export, one row per sample: y, then X flattened column-major;
// header names the columns x_{j,k} (group j, coordinate k, 1-based).
void write_dataset_csv(const std::filesystem::path& path, std::span<const Sample> samples);

}  // namespace attnlab

#include "attnlab/datagen.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace attnlab {

namespace {

void validate_dims(int d, int D, int j_star) {
  if (d < 1) throw std::invalid_argument("task: d must be >= 1");
  if (D < 1) throw std::invalid_argument("task: D must be >= 1");
  if (j_star < 0 || j_star >= D)
    throw std::invalid_argument("task: j_star out of range [0, D)");
}

double sign_pm(double a) { return a >= 0.0 ? 1.0 : -1.0; }  // sign(0) := +1

Mat assemble_input(const Mat& X, const PositionalEncodingSet& enc) {
  const auto d = X.rows();
  const auto D = X.cols();
  Mat Z(d + D, D);
  Z.topRows(d) = X;
  Z.bottomRows(D) = enc.P;
  return Z;
}

}  // namespace

GroupSparseTask make_task(int d, int D, int j_star, double sigma_x, const Vec& v_star) {
  validate_dims(d, D, j_star);
  if (sigma_x <= 0.0) throw std::invalid_argument("task: sigma_x must be positive");
  if (v_star.size() != d) throw std::invalid_argument("task: v_star must have size d");
  if (std::abs(v_star.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("task: v_star must be a unit vector");
  GroupSparseTask task;
  task.d = d;
  task.D = D;
  task.j_star = j_star;
  task.v_star = v_star;
  task.sigma_x = sigma_x;
  task.encodings = make_positional_encodings(D);
  return task;
}

GroupSparseTask make_task(int d, int D, int j_star, double sigma_x, RngStream& v_star_rng) {
  return make_task(d, D, j_star, sigma_x, Vec(v_star_rng.unit_vec(d)));
}

DownstreamTask make_downstream_task(int d, int D, int j_star, double gamma,
                                    double sigma_tilde, const Vec& v_tilde) {
  validate_dims(d, D, j_star);
  if (gamma <= 0.0) throw std::invalid_argument("downstream task: gamma must be positive");
  if (sigma_tilde <= 0.0)
    throw std::invalid_argument("downstream task: sigma_tilde must be positive");
  if (v_tilde.size() != d) throw std::invalid_argument("downstream task: v_tilde must have size d");
  if (std::abs(v_tilde.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("downstream task: v_tilde must be a unit vector");
  DownstreamTask task;
  task.d = d;
  task.D = D;
  task.j_star = j_star;
  task.v_tilde = v_tilde;
  task.gamma = gamma;
  task.sigma_tilde = sigma_tilde;
  task.encodings = make_positional_encodings(D);
  return task;
}

Sample sample_pretrain(const GroupSparseTask& task, RngStream& rng) {
  Sample s;
  s.X.resize(task.d, task.D);
  for (int j = 0; j < task.D; ++j)
    for (int k = 0; k < task.d; ++k) s.X(k, j) = task.sigma_x * rng.normal();
  s.y = sign_pm(task.v_star.dot(s.X.col(task.j_star)));
  s.Z = assemble_input(s.X, task.encodings);
  return s;
}

std::vector<Sample> sample_pretrain_n(const GroupSparseTask& task, int n, RngStream& rng) {
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_pretrain(task, rng));
  return out;
}

std::vector<Sample> antithetic_expand(std::span<const Sample> samples) {
  std::vector<Sample> out;
  out.reserve(2 * samples.size());
  for (const Sample& s : samples) {
    out.push_back(s);
    Sample m;
    m.X = -s.X;
    m.y = -s.y;
    m.Z = s.Z;
    m.Z.topRows(s.X.rows()) = m.X;
    out.push_back(std::move(m));
  }
  return out;
}

Sample sample_downstream(const DownstreamTask& task, RngStream& rng) {
  Sample s;
  s.X.resize(task.d, task.D);
  for (int j = 0; j < task.D; ++j)
    for (int k = 0; k < task.d; ++k) s.X(k, j) = task.sigma_tilde * rng.normal();
  auto x_rel = s.X.col(task.j_star);
  s.y = sign_pm(task.v_tilde.dot(x_rel));
  // minimal-norm shift onto the margin; repeated to absorb rounding so the
  // invariant y <v_tilde, x_{j*}> >= gamma holds exactly on emitted samples
  for (int pass = 0; pass < 8; ++pass) {
    const double margin = s.y * task.v_tilde.dot(x_rel);
    if (margin >= task.gamma) break;
    x_rel += (task.gamma - margin) * s.y * task.v_tilde;
  }
  s.Z = assemble_input(s.X, task.encodings);
  return s;
}

std::vector<Sample> sample_downstream_n(const DownstreamTask& task, int n, RngStream& rng) {
  std::vector<Sample> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(sample_downstream(task, rng));
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, std::span<const Sample> samples) {
  if (samples.empty()) throw std::invalid_argument("write_dataset_csv: empty sample set");
  std::ofstream outfile(path);
  if (!outfile) throw std::runtime_error("write_dataset_csv: cannot open " + path.string());
  const auto d = samples[0].X.rows();
  const auto D = samples[0].X.cols();
  outfile << "y";
  for (Eigen::Index j = 0; j < D; ++j)
    for (Eigen::Index k = 0; k < d; ++k) outfile << ",x_" << (j + 1) << "_" << (k + 1);
  outfile << "\n";
  char buf[32];
  for (const Sample& s : samples) {
    outfile << (s.y > 0 ? "1" : "-1");
    for (Eigen::Index j = 0; j < D; ++j) {
      for (Eigen::Index k = 0; k < d; ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", s.X(k, j));
        outfile << ',' << buf;
      }
    }
    outfile << "\n";
  }
}

}  // namespace attnlab

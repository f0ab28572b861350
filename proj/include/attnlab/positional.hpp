#pragma once

#include <Eigen/Core>

#include "attnlab/rng.hpp"

namespace attnlab {

// Sine-basis positional encodings. Column j (0-based here, j+1 in math
// notation) has entries sin(k*(j+1)*pi/(D+1)) for k = 1..D. Columns are
// mutually orthogonal with squared norm (D+1)/2.
struct PositionalEncodingSet {
  int D = 0;
  Mat P;  // D x D, column j = p_{j+1}
};

PositionalEncodingSet make_positional_encodings(int D);

}  // namespace attnlab

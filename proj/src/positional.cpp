#include "attnlab/positional.hpp"

#include <cmath>
#include <stdexcept>

namespace attnlab {

PositionalEncodingSet make_positional_encodings(int D) {
  if (D < 1) throw std::invalid_argument("make_positional_encodings: D must be >= 1");
  PositionalEncodingSet enc;
  enc.D = D;
  enc.P.resize(D, D);
  const double pi = 3.14159265358979323846;
  for (int j = 0; j < D; ++j) {
    for (int k = 0; k < D; ++k) {
      enc.P(k, j) = std::sin(static_cast<double>(k + 1) * static_cast<double>(j + 1) * pi /
                             static_cast<double>(D + 1));
    }
  }
  return enc;
}

}  // namespace attnlab

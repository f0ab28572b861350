#pragma once

#include <stdexcept>
#include <string>

namespace attnlab {

// non-finite values encountered during evaluation (overflowed logits etc.)
class numerical_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// divergence guard tripped inside a training loop; carries the iteration
class training_diverged : public numerical_error {
 public:
  training_diverged(int iteration, const std::string& what)
      : numerical_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

class checkpoint_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class checkpoint_magic_error : public checkpoint_error {
 public:
  using checkpoint_error::checkpoint_error;
};

class checkpoint_version_error : public checkpoint_error {
 public:
  using checkpoint_error::checkpoint_error;
};

class checkpoint_truncated_error : public checkpoint_error {
 public:
  checkpoint_truncated_error(std::size_t expected_bytes, std::size_t actual_bytes)
      : checkpoint_error("checkpoint truncated: expected " + std::to_string(expected_bytes) +
                         " bytes, got " + std::to_string(actual_bytes)),
        expected_bytes_(expected_bytes),
        actual_bytes_(actual_bytes) {}
  std::size_t expected_bytes() const { return expected_bytes_; }
  std::size_t actual_bytes() const { return actual_bytes_; }

 private:
  std::size_t expected_bytes_;
  std::size_t actual_bytes_;
};

}  // namespace attnlab

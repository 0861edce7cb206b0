#pragma once

#include <cstdint>

#include "gansearch/matrix.hpp"

namespace gansearch {

struct OptimHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws ParameterError unless lr > 0 and 0 < beta1 < beta2 < 1.
  void validate() const;
};

struct AdamState {
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t step_count = 0;

  static AdamState zeros_like(const Matrix& param) {
    return {Matrix(param.rows(), param.cols()), Matrix(param.rows(), param.cols()), 0};
  }
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

// Bias-corrected Adam update in place.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const OptimHyper& hyper);

}  // namespace gansearch

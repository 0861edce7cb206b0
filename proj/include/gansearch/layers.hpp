#pragma once

#include "gansearch/matrix.hpp"
#include "gansearch/rng.hpp"

namespace gansearch {

inline constexpr double kDefaultLeakySlope = 0.2;
inline constexpr double kDefaultDropoutRate = 0.5;

// out = x * W^T + b, with W stored [d_out x d_in] and b as a 1 x d_out row.
Matrix affine_forward(const Matrix& weight, const Matrix& bias, const Matrix& x);

struct AffineGrads {
  Matrix weight;  // grad_out^T * x
  Matrix bias;    // column sum of grad_out
  Matrix input;   // grad_out * W
};

// `x` is the input of the matching forward call.
AffineGrads affine_backward(const Matrix& weight, const Matrix& x, const Matrix& grad_out);

enum class Activation { kRelu, kLeakyRelu };

Matrix activate(const Matrix& x, Activation kind, double slope = kDefaultLeakySlope);
// Elementwise derivative evaluated at the pre-activation values.
Matrix activation_derivative(const Matrix& pre, Activation kind,
                             double slope = kDefaultLeakySlope);
Matrix activate_backward(const Matrix& pre, const Matrix& grad_out, Activation kind,
                         double slope = kDefaultLeakySlope);

// Inverted dropout. The mask stores the per-entry multiplier: 0 for dropped
// entries and 1/(1-rate) for kept ones, or all ones in eval mode.
struct DropoutResult {
  Matrix output;
  Matrix mask;
};

DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training);
Matrix dropout_backward(const Matrix& mask, const Matrix& grad_out);

}  // namespace gansearch

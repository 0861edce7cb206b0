#include "gansearch/layers.hpp"

#include "gansearch/errors.hpp"

namespace gansearch {

Matrix affine_forward(const Matrix& weight, const Matrix& bias, const Matrix& x) {
  if (x.cols() != weight.cols())
    throw DimensionError("affine_forward: input " + x.shape_string() +
                         " does not match weight " + weight.shape_string());
  if (bias.rows() != 1 || bias.cols() != weight.rows())
    throw DimensionError("affine_forward: bias " + bias.shape_string() +
                         " does not match weight " + weight.shape_string());
  Matrix out = matmul_nt(x, weight);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < out.cols(); ++c) row[c] += bias(0, c);
  }
  return out;
}

AffineGrads affine_backward(const Matrix& weight, const Matrix& x, const Matrix& grad_out) {
  if (grad_out.rows() != x.rows() || grad_out.cols() != weight.rows() ||
      x.cols() != weight.cols())
    throw DimensionError("affine_backward: grad " + grad_out.shape_string() +
                         " / input " + x.shape_string() + " / weight " +
                         weight.shape_string());
  return {matmul_tn(grad_out, x), column_sum(grad_out), matmul(grad_out, weight)};
}

Matrix activate(const Matrix& x, Activation kind, double slope) {
  Matrix out = x;
  for (double& v : out.values()) {
    if (v < 0.0) v = kind == Activation::kRelu ? 0.0 : slope * v;
  }
  return out;
}

Matrix activation_derivative(const Matrix& pre, Activation kind, double slope) {
  Matrix d(pre.rows(), pre.cols());
  auto p = pre.values();
  auto dv = d.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (kind == Activation::kRelu)
      dv[i] = p[i] > 0.0 ? 1.0 : 0.0;
    else
      dv[i] = p[i] >= 0.0 ? 1.0 : slope;
  }
  return d;
}

Matrix activate_backward(const Matrix& pre, const Matrix& grad_out, Activation kind,
                         double slope) {
  require_same_shape(pre, grad_out, "activate_backward");
  return hadamard(grad_out, activation_derivative(pre, kind, slope));
}

DropoutResult dropout(const Matrix& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw ParameterError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return {x, Matrix(x.rows(), x.cols(), 1.0)};
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (double& m : mask.values()) m = rng.bernoulli(rate) ? 0.0 : keep_scale;
  return {hadamard(x, mask), std::move(mask)};
}

Matrix dropout_backward(const Matrix& mask, const Matrix& grad_out) {
  return hadamard(grad_out, mask);
}

}  // namespace gansearch

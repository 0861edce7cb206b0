#pragma once

#include <functional>

#include "gansearch/matrix.hpp"

namespace gansearch {

// A scalar-valued map. When `grad` is non-null the callee writes the analytic
// gradient with the shape of `x` into it.
using ScalarFunction = std::function<double(const Matrix& x, Matrix* grad)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// Throws NumericError if any evaluation is non-finite.
double grad_check(const ScalarFunction& f, const Matrix& x, double h = 1e-5);

}  // namespace gansearch

#include "gansearch/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "gansearch/errors.hpp"

namespace gansearch {

double grad_check(const ScalarFunction& f, const Matrix& x, double h) {
  Matrix analytic(x.rows(), x.cols());
  const double base = f(x, &analytic);
  require_same_shape(x, analytic, "grad_check(analytic gradient)");
  if (!std::isfinite(base) || !all_finite(analytic))
    throw NumericError("grad_check: non-finite value or gradient at the base point");

  Matrix probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double original = probe.values()[i];
    probe.values()[i] = original + h;
    const double plus = f(probe, nullptr);
    probe.values()[i] = original - h;
    const double minus = f(probe, nullptr);
    probe.values()[i] = original;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw NumericError("grad_check: non-finite value at perturbed point");
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic.values()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
  }
  return worst;
}

}  // namespace gansearch

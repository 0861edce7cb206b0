#include "gansearch/adam.hpp"

#include <cmath>

#include "gansearch/errors.hpp"

namespace gansearch {

void OptimHyper::validate() const {
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < beta2 && beta2 < 1.0))
    throw ParameterError("Adam betas must satisfy 0 < beta1 < beta2 < 1");
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, const OptimHyper& hyper) {
  require_same_shape(param, grad, "adam_step(param, grad)");
  require_same_shape(param, state.first_moment, "adam_step(param, first_moment)");
  require_same_shape(param, state.second_moment, "adam_step(param, second_moment)");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);

  auto p = param.values();
  auto g = grad.values();
  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
    v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
    const double m_hat = m[i] / correction1;
    const double v_hat = v[i] / correction2;
    p[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

}  // namespace gansearch

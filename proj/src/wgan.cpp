#include "gansearch/wgan.hpp"

#include <cmath>
#include <cstdio>

#include "gansearch/errors.hpp"

namespace gansearch {

void CriticConfig::validate() const {
  if (n_critic < 1) throw ParameterError("n_critic must be at least 1");
  if (!(gp_weight >= 0.0)) throw ParameterError("gp_weight must be nonnegative");
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string(what) + " is not finite");
}

Matrix filled(std::size_t rows, std::size_t cols, double v) { return Matrix(rows, cols, v); }

}  // namespace

GradientPenalty gradient_penalty(const Subnet& critic, const Matrix& real, const Matrix& fake,
                                 const Matrix& attrs, Rng& rng, bool with_grads) {
  require_same_shape(real, fake, "gradient_penalty(real, fake)");
  const std::size_t batch = real.rows();
  if (batch == 0) return {};

  Matrix mixed(real.rows(), real.cols());
  for (std::size_t r = 0; r < batch; ++r) {
    const double eps = rng.uniform();
    for (std::size_t c = 0; c < real.cols(); ++c)
      mixed(r, c) = eps * real(r, c) + (1.0 - eps) * fake(r, c);
  }

  const SupernetParams& params = *critic.params;
  auto fwd = subnet_forward(params, critic.genome, attrs, mixed, Mode::kTrain, rng);
  auto seed = subnet_backward(params, fwd.cache, filled(batch, 1, 1.0));

  GradientPenalty gp;
  Matrix adjoint(batch, real.cols());
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (std::size_t r = 0; r < batch; ++r) {
    auto g = seed.second.row(r);
    double norm2 = 0.0;
    for (double v : g) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    gp.value += (norm - 1.0) * (norm - 1.0) * inv_b;
    if (norm > 0.0) {
      const double k = 2.0 * (norm - 1.0) / norm * inv_b;
      auto a = adjoint.row(r);
      for (std::size_t c = 0; c < g.size(); ++c) a[c] = k * g[c];
    }
  }
  if (with_grads) gp.grads = input_gradient_vjp(params, fwd.cache, seed, adjoint);
  return gp;
}

CriticLoss critic_loss(const Subnet& critic, const Matrix& real, const Matrix& fake,
                       const Matrix& attrs, double gp_weight, Rng& rng) {
  require_same_shape(real, fake, "critic_loss(real, fake)");
  const SupernetParams& params = *critic.params;
  const std::size_t batch = real.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);

  auto real_fwd = subnet_forward(params, critic.genome, attrs, real, Mode::kTrain, rng);
  auto fake_fwd = subnet_forward(params, critic.genome, attrs, fake, Mode::kTrain, rng);
  const double real_score = mean(real_fwd.output);
  const double fake_score = mean(fake_fwd.output);

  CriticLoss out;
  out.real_score = real_score;
  out.fake_score = fake_score;
  out.w_estimate = real_score - fake_score;
  out.grads = subnet_backward(params, real_fwd.cache, filled(batch, 1, -inv_b)).layers;
  accumulate(out.grads, subnet_backward(params, fake_fwd.cache, filled(batch, 1, inv_b)).layers);
  if (gp_weight > 0.0) {
    auto gp = gradient_penalty(critic, real, fake, attrs, rng);
    out.gp = gp.value;
    accumulate(out.grads, gp.grads, gp_weight);
  }
  out.loss = -out.w_estimate + gp_weight * out.gp;
  require_finite(out.loss, "critic loss");
  return out;
}

CriticLoss critic_loss(const Subnet& critic, const Subnet& generator, const GanBatch& batch,
                       double gp_weight, Rng& rng) {
  auto fake = subnet_forward(*generator.params, generator.genome, batch.attrs, batch.noise,
                             Mode::kTrain, rng);
  return critic_loss(critic, batch.real, fake.output, batch.attrs, gp_weight, rng);
}

GeneratorLoss generator_loss(const Subnet& critic, const Subnet& generator,
                             const Matrix& attrs, const Matrix& noise, Rng& rng,
                             const AuxLoss* aux) {
  const std::size_t batch = attrs.rows();
  const double inv_b = 1.0 / static_cast<double>(batch);
  auto gen = subnet_forward(*generator.params, generator.genome, attrs, noise, Mode::kTrain, rng);
  auto score = subnet_forward(*critic.params, critic.genome, attrs, gen.output, Mode::kTrain, rng);

  GeneratorLoss out;
  out.critic_term = -mean(score.output);
  auto d_back = subnet_backward(*critic.params, score.cache, filled(batch, 1, -inv_b));
  Matrix fake_grad = std::move(d_back.second);
  if (aux != nullptr && *aux) {
    Matrix aux_grad(fake_grad.rows(), fake_grad.cols());
    out.aux_term = (*aux)(gen.output, &aux_grad);
    add_inplace(fake_grad, aux_grad);
  }
  out.loss = out.critic_term + out.aux_term;
  require_finite(out.loss, "generator loss");
  out.grads = subnet_backward(*generator.params, gen.cache, fake_grad).layers;
  return out;
}

StepMetrics gan_step(const Subnet& critic, const Subnet& generator, const GanBatch& batch,
                     const CriticConfig& cfg, Side side, const OptimHyper& hyper, Rng& rng,
                     const AuxLoss* aux) {
  StepMetrics m;
  m.side = side;
  if (side == Side::kTrainD) {
    auto loss = critic_loss(critic, generator, batch, cfg.gp_weight, rng);
    apply_adam(*critic.params, loss.grads, hyper);
    m.w_estimate = loss.w_estimate;
    m.gp = loss.gp;
    m.d_loss = loss.loss;
    m.g_loss = -loss.fake_score;
    return m;
  }
  auto loss = generator_loss(critic, generator, batch.attrs, batch.noise, rng, aux);
  // Score the real rows before the update so the estimate pairs with the
  // critic term computed above.
  auto real = subnet_forward(*critic.params, critic.genome, batch.attrs, batch.real,
                             Mode::kTrain, rng);
  apply_adam(*generator.params, loss.grads, hyper);
  m.w_estimate = mean(real.output) + loss.critic_term;
  m.g_loss = loss.loss;
  m.d_loss = -m.w_estimate;
  require_finite(m.w_estimate, "Wasserstein estimate");
  return m;
}

TrainingLog::TrainingLog(std::ostream* out) : out_(out) {
  if (out_ != nullptr) *out_ << "round,step,candidate_id,w_estimate,gp,g_loss,d_loss\n";
}

void TrainingLog::append(int round, long step, const std::string& candidate_id,
                         const StepMetrics& m) {
  ++rows_;
  if (out_ == nullptr) return;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g", m.w_estimate, m.gp, m.g_loss, m.d_loss);
  *out_ << round << ',' << step << ',' << candidate_id << ',' << buf << '\n';
}

}  // namespace gansearch

#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "gansearch/adam.hpp"
#include "gansearch/supernet.hpp"

namespace gansearch {

struct GanBatch {
  Matrix real;   // [B x d_x]
  Matrix attrs;  // [B x |A|], row i is the class vector of real row i
  Matrix noise;  // [B x d_z], standard normal
};

struct CriticConfig {
  int n_critic = 5;
  double gp_weight = 10.0;

  void validate() const;
};

// Optional extra generator objective evaluated on the fake features. The
// callee returns the weighted loss and, when `grad` is non-null, writes its
// gradient w.r.t. `fake`.
using AuxLoss = std::function<double(const Matrix& fake, Matrix* grad)>;

struct GradientPenalty {
  double value = 0.0;
  std::vector<LayerGrad> grads;  // d(value)/d(critic params), unweighted
};

// mean_i (||grad_u D(a_i, u_i)||_2 - 1)^2 at u = eps*real + (1-eps)*fake with
// eps ~ U[0,1) per row.
GradientPenalty gradient_penalty(const Subnet& critic, const Matrix& real, const Matrix& fake,
                                 const Matrix& attrs, Rng& rng, bool with_grads = true);

struct CriticLoss {
  double loss = 0.0;
  double real_score = 0.0;  // mean D(a, x)
  double fake_score = 0.0;  // mean D(a, fake)
  double w_estimate = 0.0;  // real_score - fake_score
  double gp = 0.0;
  std::vector<LayerGrad> grads;
};

// -mean D(a,x) + mean D(a,fake) + gp_weight * GP. Gradients reach D only.
CriticLoss critic_loss(const Subnet& critic, const Matrix& real, const Matrix& fake,
                       const Matrix& attrs, double gp_weight, Rng& rng);
// Same, with the fakes drawn from `generator` (train mode, no gradient to it).
CriticLoss critic_loss(const Subnet& critic, const Subnet& generator, const GanBatch& batch,
                       double gp_weight, Rng& rng);

struct GeneratorLoss {
  double loss = 0.0;         // critic term + aux term
  double critic_term = 0.0;  // -mean D(a, G(a,z))
  double aux_term = 0.0;
  std::vector<LayerGrad> grads;
};

GeneratorLoss generator_loss(const Subnet& critic, const Subnet& generator,
                             const Matrix& attrs, const Matrix& noise, Rng& rng,
                             const AuxLoss* aux = nullptr);

enum class Side { kTrainD, kTrainG };

struct StepMetrics {
  Side side = Side::kTrainD;
  double w_estimate = 0.0;
  double gp = 0.0;
  double g_loss = 0.0;
  double d_loss = 0.0;
};

// One Adam update of the designated side. Throws NumericError on a non-finite
// loss or gradient, before any parameter is touched.
StepMetrics gan_step(const Subnet& critic, const Subnet& generator, const GanBatch& batch,
                     const CriticConfig& cfg, Side side, const OptimHyper& hyper, Rng& rng,
                     const AuxLoss* aux = nullptr);

// CSV: round,step,candidate_id,w_estimate,gp,g_loss,d_loss
class TrainingLog {
 public:
  explicit TrainingLog(std::ostream* out = nullptr);
  void append(int round, long step, const std::string& candidate_id, const StepMetrics& m);
  long rows() const { return rows_; }

 private:
  std::ostream* out_;
  long rows_ = 0;
};

}  // namespace gansearch

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gansearch/adam.hpp"
#include "gansearch/genome.hpp"
#include "gansearch/matrix.hpp"
#include "gansearch/rng.hpp"

namespace gansearch {

struct ActivationConfig {
  double leaky_slope = kDefaultLeakySlope;
  double dropout_rate = kDefaultDropoutRate;
  friend bool operator==(const ActivationConfig&, const ActivationConfig&) = default;
};

// FC parameters of one (edge, op) pair with their optimizer state. Unused
// pairs of a standalone network stay empty.
struct LayerParams {
  Matrix weight;  // [d_target x d_source]
  Matrix bias;    // [1 x d_target]
  AdamState weight_state;
  AdamState bias_state;

  bool materialized() const { return !weight.empty(); }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Weight store of a Large network: every (edge, non-None op) pair owns an
// independent FC layer. Subnets selected by genomes read and write these.
class SupernetParams {
 public:
  SupernetParams(SearchSpace space, ActivationConfig activation = {});

  const SearchSpace& space() const { return space_; }
  const ActivationConfig& activation() const { return activation_; }

  static std::size_t slot(std::size_t edge, Op op) {
    return edge * kNumParamOps + static_cast<std::size_t>(op);
  }
  std::size_t num_slots() const { return layers_.size(); }

  bool has(std::size_t edge, Op op) const;
  const LayerParams& layer(std::size_t edge, Op op) const;
  LayerParams& layer(std::size_t edge, Op op);
  const std::vector<LayerParams>& layers() const { return layers_; }
  std::vector<LayerParams>& layers() { return layers_; }

  // Sum of weight and bias entries over materialized pairs.
  std::size_t parameter_count() const;

  // Incremented by every optimizer update; forward caches record it.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }
  void set_version(std::uint64_t v) { version_ = v; }

  friend bool operator==(const SupernetParams&, const SupernetParams&) = default;

 private:
  SearchSpace space_;
  ActivationConfig activation_;
  std::vector<LayerParams> layers_;
  std::uint64_t version_ = 0;
};

// Gaussian weights with standard deviation init_scale / sqrt(d_source), zero
// biases, fresh Adam state. Each pair draws from its own split stream.
SupernetParams init_supernet(const SearchSpace& space, Rng& rng, double init_scale = 1.0,
                             ActivationConfig activation = {});

// Closed-form count: sum over edges of 4 * (d_t*d_s + d_t).
std::size_t full_supernet_parameter_count(const SearchSpace& space);

enum class Mode { kTrain, kEval };

struct EdgeTrace {
  std::size_t edge = 0;
  Op op = Op::kNone;
  Matrix pre;        // affine output before activation
  Matrix drop_mask;  // empty when the op has no dropout or in eval mode
  Matrix gate;       // d(edge output)/d(pre), elementwise
};

struct ForwardCache {
  Genome genome;
  Mode mode = Mode::kEval;
  std::uint64_t params_version = 0;
  std::vector<Matrix> node_values;  // one per node; empty for inactive nodes
  std::vector<EdgeTrace> edges;     // active edges in topological order
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

// Evaluates the subnet selected by `genome`. `second` is z for generators and
// x for critics. When `frozen` is given its dropout masks are reused instead
// of drawing new ones (gradient checks).
ForwardResult subnet_forward(const SupernetParams& params, const Genome& genome,
                             const Matrix& attrs, const Matrix& second, Mode mode, Rng& rng,
                             const ForwardCache* frozen = nullptr);

struct LayerGrad {
  std::size_t edge = 0;
  Op op = Op::kNone;
  Matrix weight;
  Matrix bias;
};

struct SubnetGrads {
  std::vector<LayerGrad> layers;  // exactly the active (edge, op) pairs
  Matrix attrs;                   // gradient w.r.t. the attribute input
  Matrix second;                  // gradient w.r.t. z or x
  // Gradient at each edge's pre-activation; used by input_gradient_vjp.
  std::vector<Matrix> edge_pre_grads;
};

SubnetGrads subnet_backward(const SupernetParams& params, const ForwardCache& cache,
                            const Matrix& grad_output);

// For a scalar-output subnet, let g = d(sum of outputs)/d(second) from
// subnet_backward with a ones seed. Returns parameter gradients of
// <adjoint, g>. Activation gates are piecewise constant, so only the weights
// contribute; bias gradients are zero.
std::vector<LayerGrad> input_gradient_vjp(const SupernetParams& params,
                                          const ForwardCache& cache,
                                          const SubnetGrads& seed_backward,
                                          const Matrix& adjoint);

void accumulate(std::vector<LayerGrad>& into, const std::vector<LayerGrad>& other,
                double scale = 1.0);

// Throws NumericError if any gradient is non-finite; otherwise one Adam step
// on each listed pair.
void apply_adam(SupernetParams& params, const std::vector<LayerGrad>& grads,
                const OptimHyper& hyper);

// A genome bound to the store it reads from.
struct Subnet {
  SupernetParams* params = nullptr;
  Genome genome;

  const SearchSpace& space() const { return params->space(); }
};

// A network that owns copies of exactly the parameters its genome uses.
struct StandaloneNet {
  SupernetParams params;
  Genome genome;

  Subnet view() { return {&params, genome}; }
};

StandaloneNet extract_standalone(const SupernetParams& params, const Genome& genome);
// Fresh initialization of only the active pairs.
StandaloneNet init_standalone(const SearchSpace& space, const Genome& genome, Rng& rng,
                              double init_scale = 1.0, ActivationConfig activation = {});

}  // namespace gansearch

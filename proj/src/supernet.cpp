#include "gansearch/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "gansearch/errors.hpp"
#include "gansearch/layers.hpp"

namespace gansearch {

SupernetParams::SupernetParams(SearchSpace space, ActivationConfig activation)
    : space_(std::move(space)),
      activation_(activation),
      layers_(space_.num_edges() * kNumParamOps) {
  if (!(activation_.dropout_rate >= 0.0 && activation_.dropout_rate < 1.0))
    throw ParameterError("dropout rate must lie in [0,1)");
}

bool SupernetParams::has(std::size_t edge, Op op) const {
  return op != Op::kNone && edge < space_.num_edges() && layers_[slot(edge, op)].materialized();
}

const LayerParams& SupernetParams::layer(std::size_t edge, Op op) const {
  if (!has(edge, op))
    throw ContractViolation("no parameters for edge " + std::to_string(edge) + " op " +
                            std::string(op_name(op)));
  return layers_[slot(edge, op)];
}

LayerParams& SupernetParams::layer(std::size_t edge, Op op) {
  return const_cast<LayerParams&>(std::as_const(*this).layer(edge, op));
}

std::size_t SupernetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

namespace {

LayerParams make_layer(std::size_t dt, std::size_t ds, Rng rng, double init_scale) {
  LayerParams l;
  l.weight = Matrix(dt, ds);
  const double stddev = init_scale / std::sqrt(static_cast<double>(ds));
  for (double& w : l.weight.values()) w = stddev * rng.normal();
  l.bias = Matrix(1, dt);
  l.weight_state = AdamState::zeros_like(l.weight);
  l.bias_state = AdamState::zeros_like(l.bias);
  return l;
}

}  // namespace

SupernetParams init_supernet(const SearchSpace& space, Rng& rng, double init_scale,
                             ActivationConfig activation) {
  SupernetParams params(space, activation);
  const Rng root = rng.split(0x5eed);
  rng();  // advance the caller's stream so successive inits differ
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (int k = 0; k < kNumParamOps; ++k) {
      const auto s = SupernetParams::slot(e, static_cast<Op>(k));
      params.layers()[s] = make_layer(space.node_dim(edges[e].target),
                                      space.node_dim(edges[e].source), root.split(s), init_scale);
    }
  }
  return params;
}

std::size_t full_supernet_parameter_count(const SearchSpace& space) {
  std::size_t n = 0;
  for (const auto& e : space.edges()) {
    const auto dt = space.node_dim(e.target);
    n += kNumParamOps * (dt * space.node_dim(e.source) + dt);
  }
  return n;
}

namespace {

void require_runnable(const SupernetParams& params, const Genome& genome) {
  require_compatible(params.space(), genome);
  if (genome.active_edge_count() == 0 || !is_canonical(params.space(), genome))
    throw ContractViolation("subnet requires a canonical connected genome (hash " +
                            genome.hash_hex() + ")");
}

// Critic edges into the output node are plain affine maps.
bool is_plain_edge(const SearchSpace& space, const Edge& edge) {
  return space.role() == Role::kDiscriminator && edge.target == space.output_node();
}

}  // namespace

ForwardResult subnet_forward(const SupernetParams& params, const Genome& genome,
                             const Matrix& attrs, const Matrix& second, Mode mode, Rng& rng,
                             const ForwardCache* frozen) {
  const auto& space = params.space();
  require_runnable(params, genome);
  if (attrs.cols() != space.attr_dim())
    throw DimensionError("subnet_forward: attrs " + attrs.shape_string() + " but space expects " +
                         std::to_string(space.attr_dim()) + " columns");
  if (second.cols() != space.second_dim() || second.rows() != attrs.rows())
    throw DimensionError("subnet_forward: second input " + second.shape_string() +
                         " incompatible with attrs " + attrs.shape_string());

  ForwardResult result;
  auto& cache = result.cache;
  cache.genome = genome;
  cache.mode = mode;
  cache.params_version = params.version();
  cache.node_values.resize(static_cast<std::size_t>(space.num_nodes()));
  cache.node_values[0] = attrs;
  cache.node_values[1] = second;
  cache.node_values[2] = concat_cols(attrs, second);

  const std::size_t batch = attrs.rows();
  const auto& act = params.activation();
  const auto& edges = space.edges();
  std::size_t frozen_pos = 0;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const Op op = genome.op(e);
    if (op == Op::kNone) continue;
    const auto src = static_cast<std::size_t>(edges[e].source);
    const auto dst = static_cast<std::size_t>(edges[e].target);
    const auto& layer = params.layer(e, op);

    EdgeTrace trace;
    trace.edge = e;
    trace.op = op;
    trace.pre = affine_forward(layer.weight, layer.bias, cache.node_values[src]);
    Matrix out;
    if (is_plain_edge(space, edges[e])) {
      out = trace.pre;
      trace.gate = Matrix(batch, trace.pre.cols(), 1.0);
    } else {
      const Activation kind = op_activation(op);
      out = activate(trace.pre, kind, act.leaky_slope);
      trace.gate = activation_derivative(trace.pre, kind, act.leaky_slope);
      if (op_has_dropout(op) && mode == Mode::kTrain) {
        if (frozen != nullptr) {
          while (frozen_pos < frozen->edges.size() && frozen->edges[frozen_pos].edge != e)
            ++frozen_pos;
          if (frozen_pos == frozen->edges.size())
            throw ContractViolation("frozen cache lacks edge " + std::to_string(e));
          trace.drop_mask = frozen->edges[frozen_pos].drop_mask;
          require_same_shape(trace.drop_mask, out, "frozen dropout mask");
          out = hadamard(out, trace.drop_mask);
        } else {
          auto d = dropout(out, act.dropout_rate, rng, true);
          out = std::move(d.output);
          trace.drop_mask = std::move(d.mask);
        }
        trace.gate = hadamard(trace.gate, trace.drop_mask);
      }
    }

    auto& node = cache.node_values[dst];
    if (node.empty())
      node = std::move(out);
    else
      add_inplace(node, out);
    cache.edges.push_back(std::move(trace));
  }

  result.output = cache.node_values[static_cast<std::size_t>(space.output_node())];
  return result;
}

SubnetGrads subnet_backward(const SupernetParams& params, const ForwardCache& cache,
                            const Matrix& grad_output) {
  const auto& space = params.space();
  if (cache.params_version != params.version())
    throw ContractViolation("subnet_backward: stale forward cache (parameters changed)");
  if (cache.node_values.size() != static_cast<std::size_t>(space.num_nodes()))
    throw ContractViolation("subnet_backward: cache does not belong to this space");
  const auto out_node = static_cast<std::size_t>(space.output_node());
  require_same_shape(cache.node_values[out_node], grad_output, "subnet_backward grad_output");

  const auto& edges = space.edges();
  std::vector<Matrix> node_grads(cache.node_values.size());
  for (std::size_t n = 0; n < node_grads.size(); ++n)
    if (!cache.node_values[n].empty())
      node_grads[n] = Matrix(cache.node_values[n].rows(), cache.node_values[n].cols());
  node_grads[out_node] = grad_output;

  SubnetGrads grads;
  grads.layers.resize(cache.edges.size());
  grads.edge_pre_grads.resize(cache.edges.size());
  for (std::size_t i = cache.edges.size(); i-- > 0;) {
    const auto& trace = cache.edges[i];
    const auto& edge = edges[trace.edge];
    const auto& layer = params.layer(trace.edge, trace.op);
    const auto src = static_cast<std::size_t>(edge.source);
    const auto dst = static_cast<std::size_t>(edge.target);

    Matrix pre_grad = hadamard(node_grads[dst], trace.gate);
    auto g = affine_backward(layer.weight, cache.node_values[src], pre_grad);
    add_inplace(node_grads[src], g.input);
    grads.layers[i] = {trace.edge, trace.op, std::move(g.weight), std::move(g.bias)};
    grads.edge_pre_grads[i] = std::move(pre_grad);
  }

  const std::size_t a = space.attr_dim();
  const std::size_t s = space.second_dim();
  grads.attrs = add(node_grads[0], slice_cols(node_grads[2], 0, a));
  grads.second = add(node_grads[1], slice_cols(node_grads[2], a, a + s));
  return grads;
}

std::vector<LayerGrad> input_gradient_vjp(const SupernetParams& params,
                                          const ForwardCache& cache,
                                          const SubnetGrads& seed_backward,
                                          const Matrix& adjoint) {
  const auto& space = params.space();
  if (cache.params_version != params.version())
    throw ContractViolation("input_gradient_vjp: stale forward cache");
  require_same_shape(adjoint, seed_backward.second, "input_gradient_vjp adjoint");

  const std::size_t batch = adjoint.rows();
  const std::size_t a = space.attr_dim();
  std::vector<Matrix> rho(cache.node_values.size());
  for (std::size_t n = 0; n < rho.size(); ++n)
    if (!cache.node_values[n].empty()) rho[n] = Matrix(batch, cache.node_values[n].cols());
  rho[1] = adjoint;
  for (std::size_t r = 0; r < batch; ++r) {
    auto dst = rho[2].row(r);
    auto src = adjoint.row(r);
    std::copy(src.begin(), src.end(), dst.begin() + static_cast<std::ptrdiff_t>(a));
  }

  // The adjoint of the backward pass runs forward through the graph as a
  // linear network gated by the recorded activation/dropout Jacobians.
  const auto& edges = space.edges();
  std::vector<LayerGrad> out;
  out.reserve(cache.edges.size());
  for (std::size_t i = 0; i < cache.edges.size(); ++i) {
    const auto& trace = cache.edges[i];
    const auto& layer = params.layer(trace.edge, trace.op);
    const auto src = static_cast<std::size_t>(edges[trace.edge].source);
    const auto dst = static_cast<std::size_t>(edges[trace.edge].target);

    LayerGrad g{trace.edge, trace.op, matmul_tn(seed_backward.edge_pre_grads[i], rho[src]),
                Matrix(1, layer.bias.cols())};
    add_inplace(rho[dst], hadamard(matmul_nt(rho[src], layer.weight), trace.gate));
    out.push_back(std::move(g));
  }
  return out;
}

void accumulate(std::vector<LayerGrad>& into, const std::vector<LayerGrad>& other,
                double scale) {
  for (const auto& g : other) {
    auto it = std::find_if(into.begin(), into.end(), [&](const LayerGrad& x) {
      return x.edge == g.edge && x.op == g.op;
    });
    if (it == into.end()) {
      into.push_back({g.edge, g.op, scaled(g.weight, scale), scaled(g.bias, scale)});
    } else {
      axpy_inplace(it->weight, scale, g.weight);
      axpy_inplace(it->bias, scale, g.bias);
    }
  }
}

void apply_adam(SupernetParams& params, const std::vector<LayerGrad>& grads,
                const OptimHyper& hyper) {
  for (const auto& g : grads) {
    if (!all_finite(g.weight) || !all_finite(g.bias))
      throw NumericError("non-finite gradient on edge " + std::to_string(g.edge));
  }
  for (const auto& g : grads) {
    auto& layer = params.layer(g.edge, g.op);
    adam_step(layer.weight, g.weight, layer.weight_state, hyper);
    adam_step(layer.bias, g.bias, layer.bias_state, hyper);
  }
  params.bump_version();
}

StandaloneNet extract_standalone(const SupernetParams& params, const Genome& genome) {
  require_compatible(params.space(), genome);
  if (!is_canonical(params.space(), genome))
    throw ContractViolation("extract_standalone requires a canonical genome");
  StandaloneNet net{SupernetParams(params.space(), params.activation()), genome};
  for (std::size_t e = 0; e < genome.size(); ++e) {
    const Op op = genome.op(e);
    if (op == Op::kNone) continue;
    net.params.layers()[SupernetParams::slot(e, op)] = params.layer(e, op);
  }
  return net;
}

StandaloneNet init_standalone(const SearchSpace& space, const Genome& genome, Rng& rng,
                              double init_scale, ActivationConfig activation) {
  require_compatible(space, genome);
  if (!is_canonical(space, genome))
    throw ContractViolation("init_standalone requires a canonical genome");
  StandaloneNet net{SupernetParams(space, activation), genome};
  const Rng root = rng.split(0x5eed);
  rng();
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < genome.size(); ++e) {
    const Op op = genome.op(e);
    if (op == Op::kNone) continue;
    const auto s = SupernetParams::slot(e, op);
    net.params.layers()[s] = make_layer(space.node_dim(edges[e].target),
                                        space.node_dim(edges[e].source), root.split(s), init_scale);
  }
  return net;
}

}  // namespace gansearch

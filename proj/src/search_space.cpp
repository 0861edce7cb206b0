#include "gansearch/search_space.hpp"

#include <algorithm>
#include <cmath>

#include "gansearch/errors.hpp"

namespace gansearch {

std::string_view role_name(Role role) {
  return role == Role::kGenerator ? "generator" : "discriminator";
}

Role role_from_name(std::string_view name) {
  if (name == "generator") return Role::kGenerator;
  if (name == "discriminator") return Role::kDiscriminator;
  throw ParameterError("unknown role '" + std::string(name) + "'");
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::kFcRelu: return "FC+ReLU";
    case Op::kFcReluDropout: return "FC+ReLU+DropOut";
    case Op::kFcLeakyRelu: return "FC+LeakyReLU";
    case Op::kFcLeakyReluDropout: return "FC+LeakyReLU+DropOut";
    case Op::kNone: return "None";
  }
  return "?";
}

Activation op_activation(Op op) {
  return (op == Op::kFcRelu || op == Op::kFcReluDropout) ? Activation::kRelu
                                                          : Activation::kLeakyRelu;
}

bool op_has_dropout(Op op) {
  return op == Op::kFcReluDropout || op == Op::kFcLeakyReluDropout;
}

Op op_from_index(int index) {
  if (index < 0 || index >= kNumOps)
    throw ParameterError("operation index " + std::to_string(index) + " outside 0..4");
  return static_cast<Op>(index);
}

SearchSpace::SearchSpace(Role role, std::size_t attr_dim, std::size_t second_dim,
                         std::vector<std::size_t> node_dims)
    : role_(role),
      input_dims_{attr_dim, second_dim, attr_dim + second_dim},
      node_dims_(std::move(node_dims)) {
  if (attr_dim == 0 || second_dim == 0)
    throw ParameterError("search space input dimensions must be positive");
  if (node_dims_.empty()) throw ParameterError("search space needs at least one node");
  if (std::any_of(node_dims_.begin(), node_dims_.end(), [](std::size_t d) { return d == 0; }))
    throw ParameterError("node dimensions must be positive");
  if (role_ == Role::kDiscriminator && node_dims_.back() != 1)
    throw ParameterError("discriminator output node must have dimension 1");

  const int k = num_intermediate();
  for (int t = 0; t < k; ++t) {
    const int target = kNumInputs + t;
    for (int s = 0; s < kNumInputs + t; ++s) edges_.push_back({s, target});
  }
}

SearchSpace SearchSpace::generator(std::size_t attr_dim, std::size_t noise_dim,
                                   std::vector<std::size_t> node_dims) {
  return SearchSpace(Role::kGenerator, attr_dim, noise_dim, std::move(node_dims));
}

SearchSpace SearchSpace::discriminator(std::size_t attr_dim, std::size_t feature_dim,
                                       std::vector<std::size_t> node_dims) {
  return SearchSpace(Role::kDiscriminator, attr_dim, feature_dim, std::move(node_dims));
}

std::vector<std::size_t> SearchSpace::default_node_dims(Role role) {
  if (role == Role::kGenerator) return {512, 1024, 2048, 4096, 2048};
  return {4096, 2048, 1024, 512, 1};
}

std::vector<std::size_t> SearchSpace::scaled_node_dims(Role role, std::size_t feature_dim) {
  auto dims = default_node_dims(role);
  const double factor = static_cast<double>(feature_dim) / 2048.0;
  for (auto& d : dims)
    d = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(d * factor)));
  dims.back() = role == Role::kGenerator ? feature_dim : 1;
  return dims;
}

std::size_t SearchSpace::node_dim(int node) const {
  if (node < 0 || node >= num_nodes())
    throw ParameterError("node index " + std::to_string(node) + " out of range");
  if (node < kNumInputs) return input_dims_[static_cast<std::size_t>(node)];
  return node_dims_[static_cast<std::size_t>(node - kNumInputs)];
}

std::string SearchSpace::node_label(int node) const {
  const char* second = role_ == Role::kGenerator ? "z" : "x";
  switch (node) {
    case 0: return "a";
    case 1: return second;
    case 2: return std::string("a+") + second;
    default: break;
  }
  if (node == output_node()) return "o";
  return "M" + std::to_string(node - kNumInputs);
}

}  // namespace gansearch

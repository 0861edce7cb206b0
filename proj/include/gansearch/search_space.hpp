#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gansearch/layers.hpp"

namespace gansearch {

enum class Role : std::uint8_t { kGenerator = 0, kDiscriminator = 1 };

std::string_view role_name(Role role);
Role role_from_name(std::string_view name);

// Candidate operation on an edge. The numeric value is the position of the
// "1" in the edge's one-hot encoding.
enum class Op : std::uint8_t {
  kFcRelu = 0,
  kFcReluDropout = 1,
  kFcLeakyRelu = 2,
  kFcLeakyReluDropout = 3,
  kNone = 4,
};

inline constexpr int kNumOps = 5;
inline constexpr int kNumParamOps = 4;  // every op but None carries an FC layer

std::string_view op_name(Op op);
Activation op_activation(Op op);
bool op_has_dropout(Op op);
Op op_from_index(int index);

struct Edge {
  int source;
  int target;

  bool operator==(const Edge&) const = default;
};

// Cell DAG: three input nodes (0, 1, 2), followed by ordered intermediate
// nodes; the last intermediate node is the output. Inputs are
//   generator:     a, z, a+z
//   discriminator: a, x, a+x
// Every input feeds every intermediate node, and every intermediate node feeds
// every later one. Edges are sorted by (target, source), which is a
// topological order.
class SearchSpace {
 public:
  static constexpr int kNumInputs = 3;

  SearchSpace(Role role, std::size_t attr_dim, std::size_t second_dim,
              std::vector<std::size_t> node_dims);

  static SearchSpace generator(std::size_t attr_dim, std::size_t noise_dim,
                               std::vector<std::size_t> node_dims = default_node_dims(Role::kGenerator));
  static SearchSpace discriminator(std::size_t attr_dim, std::size_t feature_dim,
                                   std::vector<std::size_t> node_dims = default_node_dims(Role::kDiscriminator));

  // 512,1024,2048,4096,2048 for generators; 4096,2048,1024,512,1 for critics.
  static std::vector<std::size_t> default_node_dims(Role role);
  // Defaults scaled by feature_dim / 2048 (at least 1). The generator output
  // is pinned to feature_dim and the critic output to 1.
  static std::vector<std::size_t> scaled_node_dims(Role role, std::size_t feature_dim);

  Role role() const { return role_; }
  std::size_t attr_dim() const { return input_dims_[0]; }
  std::size_t second_dim() const { return input_dims_[1]; }
  const std::array<std::size_t, 3>& input_dims() const { return input_dims_; }
  const std::vector<std::size_t>& node_dims() const { return node_dims_; }

  int num_intermediate() const { return static_cast<int>(node_dims_.size()); }
  int num_nodes() const { return kNumInputs + num_intermediate(); }
  std::size_t num_edges() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  int output_node() const { return num_nodes() - 1; }
  std::size_t output_dim() const { return node_dims_.back(); }

  std::size_t node_dim(int node) const;
  bool is_input(int node) const { return node < kNumInputs; }
  // "a", "z", "a+z" / "x", "a+x", intermediate "M<k>" and "o" for the output.
  std::string node_label(int node) const;

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;

 private:
  Role role_;
  std::array<std::size_t, 3> input_dims_;
  std::vector<std::size_t> node_dims_;
  std::vector<Edge> edges_;
};

}  // namespace gansearch

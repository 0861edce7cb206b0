#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gansearch/rng.hpp"
#include "gansearch/search_space.hpp"

namespace gansearch {

// One operation per edge of a SearchSpace: the index form of the per-edge
// one-hot vectors. Values are immutable once built.
class Genome {
 public:
  Genome() = default;  // empty generator genome
  Genome(Role role, std::vector<Op> ops);

  static Genome all_none(const SearchSpace& space);

  Role role() const { return role_; }
  const std::vector<Op>& ops() const { return ops_; }
  Op op(std::size_t edge) const { return ops_.at(edge); }
  std::size_t size() const { return ops_.size(); }

  [[nodiscard]] Genome with_op(std::size_t edge, Op op) const;

  std::size_t active_edge_count() const;
  // One-hot rows, one per edge.
  std::vector<std::array<int, kNumOps>> one_hot() const;

  // FNV-1a over (role, ops). Used for stable tie-breaking and log keys.
  std::uint64_t hash() const;
  std::string hash_hex() const;

  friend bool operator==(const Genome&, const Genome&) = default;

 private:
  Role role_ = Role::kGenerator;
  std::vector<Op> ops_;
};

// Throws ParameterError unless the genome was built for this space.
void require_compatible(const SearchSpace& space, const Genome& genome);

struct Reachability {
  std::vector<bool> from_input;  // reachable from at least one input node
  std::vector<bool> to_output;   // the output node is reachable from here
};

Reachability analyze_reachability(const SearchSpace& space, const Genome& genome);

// True when the output node is reachable from some input.
bool is_connected(const SearchSpace& space, const Genome& genome);

// Sets to None every edge that does not lie on an input->output path.
Genome canonicalize(const SearchSpace& space, const Genome& genome);
bool is_canonical(const SearchSpace& space, const Genome& genome);

// canonicalize(); if nothing connects the output, activate one uniformly chosen
// direct input->output edge with a uniformly chosen non-None op.
Genome repair(const SearchSpace& space, const Genome& genome, Rng& rng);

// Each edge draws uniformly from the four parameterized ops, then becomes None
// with probability none_bias. No canonicalization.
Genome sample_raw_genome(const SearchSpace& space, double none_bias, Rng& rng);
Genome random_genome(const SearchSpace& space, double none_bias, Rng& rng);
// Every edge uniform over all five candidates.
Genome sample_uniform_genome(const SearchSpace& space, Rng& rng);

// Fraction of non-None edges. Requires a canonical genome.
double complexity(const SearchSpace& space, const Genome& genome);

struct CrossoverDraw {
  Genome child;                      // before canonicalization
  std::vector<std::size_t> swapped;  // positions taken from the second parent
};

// Child inherits floor(E/2) uniformly chosen positions from `second` and the
// rest from `first`.
CrossoverDraw crossover_raw(const SearchSpace& space, const Genome& first,
                            const Genome& second, Rng& rng);
Genome crossover(const SearchSpace& space, const Genome& first, const Genome& second,
                 Rng& rng);

struct MutationDraw {
  Genome mutated;                      // before canonicalization
  std::vector<std::size_t> positions;  // distinct edges that changed
};

// Replaces the op on 1/2/4 distinct edges (probabilities 0.5/0.3/0.2) with a
// different op drawn uniformly from the remaining four.
MutationDraw mutate_raw(const SearchSpace& space, const Genome& genome, Rng& rng);
Genome mutate(const SearchSpace& space, const Genome& genome, Rng& rng);

// The CLSWGAN critic: a+x -> FC+LeakyReLU -> M0 -> FC -> o.
Genome fixed_clswgan_discriminator(const SearchSpace& space);
// The CLSWGAN generator: a+z -> FC+LeakyReLU -> M3 -> FC+ReLU -> o.
Genome fixed_clswgan_generator(const SearchSpace& space);

}  // namespace gansearch

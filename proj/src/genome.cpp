#include "gansearch/genome.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include "gansearch/errors.hpp"

namespace gansearch {

Genome::Genome(Role role, std::vector<Op> ops) : role_(role), ops_(std::move(ops)) {
  for (Op op : ops_) {
    if (static_cast<int>(op) >= kNumOps) throw ParameterError("genome op index outside 0..4");
  }
}

Genome Genome::all_none(const SearchSpace& space) {
  return Genome(space.role(), std::vector<Op>(space.num_edges(), Op::kNone));
}

Genome Genome::with_op(std::size_t edge, Op op) const {
  std::vector<Op> ops = ops_;
  ops.at(edge) = op;
  return Genome(role_, std::move(ops));
}

std::size_t Genome::active_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(ops_.begin(), ops_.end(), [](Op op) { return op != Op::kNone; }));
}

std::vector<std::array<int, kNumOps>> Genome::one_hot() const {
  std::vector<std::array<int, kNumOps>> rows(ops_.size());
  for (std::size_t e = 0; e < ops_.size(); ++e) {
    rows[e].fill(0);
    rows[e][static_cast<std::size_t>(ops_[e])] = 1;
  }
  return rows;
}

std::uint64_t Genome::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  feed(static_cast<std::uint8_t>(role_));
  for (Op op : ops_) feed(static_cast<std::uint8_t>(op));
  return h;
}

std::string Genome::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

void require_compatible(const SearchSpace& space, const Genome& genome) {
  if (genome.role() != space.role())
    throw ParameterError(std::string("genome role ") + std::string(role_name(genome.role())) +
                         " does not match space role " + std::string(role_name(space.role())));
  if (genome.size() != space.num_edges())
    throw ParameterError("genome has " + std::to_string(genome.size()) +
                         " edges, space expects " + std::to_string(space.num_edges()));
}

Reachability analyze_reachability(const SearchSpace& space, const Genome& genome) {
  require_compatible(space, genome);
  const auto n = static_cast<std::size_t>(space.num_nodes());
  const auto& edges = space.edges();
  Reachability r{std::vector<bool>(n, false), std::vector<bool>(n, false)};
  for (int i = 0; i < SearchSpace::kNumInputs; ++i) r.from_input[static_cast<std::size_t>(i)] = true;
  r.to_output[static_cast<std::size_t>(space.output_node())] = true;

  // Edges are topologically sorted, so one sweep each way suffices.
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (genome.op(e) != Op::kNone && r.from_input[static_cast<std::size_t>(edges[e].source)])
      r.from_input[static_cast<std::size_t>(edges[e].target)] = true;
  }
  for (std::size_t e = edges.size(); e-- > 0;) {
    if (genome.op(e) != Op::kNone && r.to_output[static_cast<std::size_t>(edges[e].target)])
      r.to_output[static_cast<std::size_t>(edges[e].source)] = true;
  }
  return r;
}

bool is_connected(const SearchSpace& space, const Genome& genome) {
  const auto r = analyze_reachability(space, genome);
  return r.from_input[static_cast<std::size_t>(space.output_node())];
}

Genome canonicalize(const SearchSpace& space, const Genome& genome) {
  const auto r = analyze_reachability(space, genome);
  std::vector<Op> ops = genome.ops();
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const bool keep = r.from_input[static_cast<std::size_t>(edges[e].source)] &&
                      r.to_output[static_cast<std::size_t>(edges[e].target)];
    if (!keep) ops[e] = Op::kNone;
  }
  return Genome(genome.role(), std::move(ops));
}

bool is_canonical(const SearchSpace& space, const Genome& genome) {
  return canonicalize(space, genome) == genome;
}

Genome repair(const SearchSpace& space, const Genome& genome, Rng& rng) {
  Genome canonical = canonicalize(space, genome);
  if (canonical.active_edge_count() > 0) return canonical;

  const int input = static_cast<int>(rng.uniform_index(SearchSpace::kNumInputs));
  const Op op = op_from_index(static_cast<int>(rng.uniform_index(kNumParamOps)));
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (edges[e].source == input && edges[e].target == space.output_node())
      return canonical.with_op(e, op);
  }
  throw ContractViolation("search space lacks a direct input->output edge");
}

Genome sample_raw_genome(const SearchSpace& space, double none_bias, Rng& rng) {
  if (!(none_bias >= 0.0 && none_bias <= 1.0))
    throw ParameterError("none_bias must lie in [0,1]");
  std::vector<Op> ops(space.num_edges());
  for (auto& op : ops) {
    op = op_from_index(static_cast<int>(rng.uniform_index(kNumParamOps)));
    if (rng.bernoulli(none_bias)) op = Op::kNone;
  }
  return Genome(space.role(), std::move(ops));
}

Genome random_genome(const SearchSpace& space, double none_bias, Rng& rng) {
  return repair(space, sample_raw_genome(space, none_bias, rng), rng);
}

Genome sample_uniform_genome(const SearchSpace& space, Rng& rng) {
  std::vector<Op> ops(space.num_edges());
  for (auto& op : ops) op = op_from_index(static_cast<int>(rng.uniform_index(kNumOps)));
  return Genome(space.role(), std::move(ops));
}

double complexity(const SearchSpace& space, const Genome& genome) {
  if (!is_canonical(space, genome))
    throw ContractViolation("complexity requires a canonical genome (hash " +
                            genome.hash_hex() + ")");
  return static_cast<double>(genome.active_edge_count()) /
         static_cast<double>(space.num_edges());
}

namespace {

// First `count` entries of a partial Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

CrossoverDraw crossover_raw(const SearchSpace& space, const Genome& first,
                            const Genome& second, Rng& rng) {
  if (first.role() != second.role())
    throw ParameterError("crossover: parents belong to different roles");
  require_compatible(space, first);
  require_compatible(space, second);

  auto swapped = choose_distinct(space.num_edges(), space.num_edges() / 2, rng);
  std::vector<Op> ops = first.ops();
  for (std::size_t e : swapped) ops[e] = second.op(e);
  return {Genome(first.role(), std::move(ops)), std::move(swapped)};
}

Genome crossover(const SearchSpace& space, const Genome& first, const Genome& second,
                 Rng& rng) {
  auto draw = crossover_raw(space, first, second, rng);
  return repair(space, draw.child, rng);
}

MutationDraw mutate_raw(const SearchSpace& space, const Genome& genome, Rng& rng) {
  require_compatible(space, genome);
  const double u = rng.uniform();
  std::size_t arity = u < 0.5 ? 1 : (u < 0.8 ? 2 : 4);
  arity = std::min(arity, space.num_edges());

  auto positions = choose_distinct(space.num_edges(), arity, rng);
  std::vector<Op> ops = genome.ops();
  for (std::size_t e : positions) {
    // Uniform over the four ops that differ from the current one.
    int pick = static_cast<int>(rng.uniform_index(kNumOps - 1));
    if (pick >= static_cast<int>(ops[e])) ++pick;
    ops[e] = op_from_index(pick);
  }
  return {Genome(genome.role(), std::move(ops)), std::move(positions)};
}

Genome mutate(const SearchSpace& space, const Genome& genome, Rng& rng) {
  if (!is_canonical(space, genome))
    throw ContractViolation("mutate requires a canonical genome");
  auto draw = mutate_raw(space, genome, rng);
  return repair(space, draw.mutated, rng);
}

namespace {

std::size_t edge_index(const SearchSpace& space, int source, int target) {
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].source == source && edges[e].target == target) return e;
  throw ContractViolation("edge not present in search space");
}

}  // namespace

Genome fixed_clswgan_discriminator(const SearchSpace& space) {
  if (space.role() != Role::kDiscriminator)
    throw ParameterError("fixed CLSWGAN discriminator requires a discriminator space");
  const int m0 = SearchSpace::kNumInputs;
  Genome g = Genome::all_none(space);
  g = g.with_op(edge_index(space, 2, m0), Op::kFcLeakyRelu);
  if (m0 != space.output_node())
    g = g.with_op(edge_index(space, m0, space.output_node()), Op::kFcLeakyRelu);
  return g;
}

Genome fixed_clswgan_generator(const SearchSpace& space) {
  if (space.role() != Role::kGenerator)
    throw ParameterError("fixed CLSWGAN generator requires a generator space");
  // The hidden layer is the node just before the output (4096 wide by default).
  const int out = space.output_node();
  Genome g = Genome::all_none(space);
  if (out == SearchSpace::kNumInputs) return g.with_op(edge_index(space, 2, out), Op::kFcRelu);
  const int hidden = out - 1;
  g = g.with_op(edge_index(space, 2, hidden), Op::kFcLeakyRelu);
  return g.with_op(edge_index(space, hidden, out), Op::kFcRelu);
}

}  // namespace gansearch

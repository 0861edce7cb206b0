#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>
#include <set>

#include "gansearch/arch_export.hpp"
#include "gansearch/errors.hpp"
#include "gansearch/genome.hpp"
#include "gansearch/search_space.hpp"

using namespace gansearch;

namespace {

std::size_t edge_index(const SearchSpace& space, int source, int target) {
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].source == source && edges[e].target == target) return e;
  throw std::out_of_range("no such edge");
}

// Independent oracle: an edge survives iff some input->output path uses it,
// found by enumerating every path explicitly.
std::vector<bool> edges_on_paths(const SearchSpace& space, const Genome& g) {
  const auto& edges = space.edges();
  std::vector<bool> used(edges.size(), false);
  std::vector<std::size_t> path;
  std::function<void(int)> walk = [&](int node) {
    if (node == space.output_node()) {
      for (std::size_t e : path) used[e] = true;
      return;
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      if (edges[e].source != node || g.op(e) == Op::kNone) continue;
      path.push_back(e);
      walk(edges[e].target);
      path.pop_back();
    }
  };
  for (int i = 0; i < SearchSpace::kNumInputs; ++i) walk(i);
  return used;
}

SearchSpace small_generator() {
  return SearchSpace::generator(4, 4, SearchSpace::scaled_node_dims(Role::kGenerator, 32));
}

}  // namespace

TEST_CASE("search space structure") {
  for (const auto& space : {SearchSpace::generator(85, 85), SearchSpace::discriminator(85, 2048)}) {
    CHECK(space.num_nodes() == 8);
    CHECK(space.num_edges() == 25);
    std::set<std::pair<int, int>> seen;
    int last_target = -1;
    for (const auto& e : space.edges()) {
      CHECK(e.source < e.target);
      CHECK(e.target >= last_target);
      CHECK_FALSE(space.is_input(e.target));
      last_target = e.target;
      seen.insert({e.source, e.target});
    }
    CHECK(seen.size() == 25);
  }
  const auto g = SearchSpace::generator(85, 85);
  CHECK(g.node_dims() == std::vector<std::size_t>{512, 1024, 2048, 4096, 2048});
  CHECK(g.input_dims() == std::array<std::size_t, 3>{85, 85, 170});
  const auto d = SearchSpace::discriminator(85, 2048);
  CHECK(d.node_dims() == std::vector<std::size_t>{4096, 2048, 1024, 512, 1});
  CHECK(d.input_dims() == std::array<std::size_t, 3>{85, 2048, 2133});
  CHECK(SearchSpace::scaled_node_dims(Role::kGenerator, 32) == std::vector<std::size_t>{8, 16, 32, 64, 32});
  CHECK(SearchSpace::scaled_node_dims(Role::kDiscriminator, 32) == std::vector<std::size_t>{64, 32, 16, 8, 1});
  CHECK_THROWS(SearchSpace::discriminator(4, 4, {8, 8, 8, 8, 2}));
  CHECK(g.node_label(0) == "a");
  CHECK(g.node_label(1) == "z");
  CHECK(d.node_label(1) == "x");
  CHECK(d.node_label(2) == "a+x");
  CHECK(d.node_label(7) == "o");
  CHECK(kNumOps == 5);
}

TEST_CASE("one-hot encoding has exactly one active op per edge") {
  const auto space = small_generator();
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Genome g = sample_uniform_genome(space, rng);
    const auto rows = g.one_hot();
    REQUIRE(rows.size() == 25);
    for (std::size_t e = 0; e < rows.size(); ++e) {
      int total = 0;
      for (int k = 0; k < kNumOps; ++k) total += rows[e][k];
      CHECK(total == 1);
      CHECK(rows[e][static_cast<int>(g.op(e))] == 1);
    }
  }
}

TEST_CASE("random_genome examples") {
  const auto space = small_generator();
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Genome g = random_genome(space, 1.0, rng);
    REQUIRE(g.active_edge_count() == 1);
    for (std::size_t e = 0; e < g.size(); ++e) {
      if (g.op(e) == Op::kNone) continue;
      CHECK(space.is_input(space.edges()[e].source));
      CHECK(space.edges()[e].target == space.output_node());
    }
    CHECK(is_connected(space, g));
  }
  const Genome full = random_genome(space, 0.0, rng);
  CHECK(full.active_edge_count() == 25);
  CHECK(complexity(space, full) == 1.0);

  std::size_t none = 0;
  const int samples = 10000;
  for (int i = 0; i < samples; ++i) {
    const Genome g = sample_raw_genome(space, 0.5, rng);
    none += g.size() - g.active_edge_count();
  }
  CHECK(static_cast<double>(none) / (samples * 25.0) == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("canonicalize examples") {
  const auto space = small_generator();
  const Genome empty = Genome::all_none(space);
  CHECK(canonicalize(space, empty) == empty);

  const Genome path = empty.with_op(edge_index(space, 2, 3), Op::kFcRelu)
                          .with_op(edge_index(space, 3, 7), Op::kFcLeakyRelu);
  CHECK(canonicalize(space, path) == path);

  const Genome dangling = path.with_op(edge_index(space, 3, 4), Op::kFcRelu);
  CHECK(canonicalize(space, dangling) == path);

  const Genome orphan = path.with_op(edge_index(space, 4, 5), Op::kFcRelu)
                            .with_op(edge_index(space, 5, 7), Op::kFcRelu);
  const Genome pruned = canonicalize(space, orphan);
  CHECK(pruned.op(edge_index(space, 4, 5)) == Op::kNone);
  CHECK(pruned.op(edge_index(space, 5, 7)) == Op::kNone);
}

TEST_CASE("canonicalize is idempotent and never adds edges") {
  const auto space = small_generator();
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Genome raw = sample_raw_genome(space, 0.5, rng);
    const Genome c = canonicalize(space, raw);
    CHECK(canonicalize(space, c) == c);
    CHECK(c.active_edge_count() <= raw.active_edge_count());
    CHECK(is_canonical(space, c));
  }
}

TEST_CASE("complexity examples and lattice") {
  const auto space = small_generator();
  CHECK(complexity(space, Genome::all_none(space)) == 0.0);
  std::vector<Op> ops(25, Op::kFcRelu);
  CHECK(complexity(space, Genome(Role::kGenerator, ops)) == 1.0);
  // Six direct edges onto the output plus a+z->M0, a+z->M1, a+z->M2, M0->M1.
  Genome ten = Genome::all_none(space);
  for (int s = 0; s < 6; ++s) ten = ten.with_op(edge_index(space, s, 7), Op::kFcRelu);
  ten = ten.with_op(edge_index(space, 2, 3), Op::kFcRelu)
            .with_op(edge_index(space, 2, 4), Op::kFcRelu)
            .with_op(edge_index(space, 2, 5), Op::kFcRelu)
            .with_op(edge_index(space, 3, 4), Op::kFcRelu);
  REQUIRE(canonicalize(space, ten) == ten);
  CHECK(complexity(space, ten) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(complexity(space, ten) == 10.0 / 25.0);

  const Genome dangling = Genome::all_none(space).with_op(edge_index(space, 3, 4), Op::kFcRelu);
  CHECK_THROWS_AS(complexity(space, dangling), ContractViolation);

  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const Genome g = random_genome(space, 0.5, rng);
    const double c = complexity(space, g);
    const auto k = static_cast<long>(std::lround(c * 25.0));
    CHECK(c == static_cast<double>(k) / 25.0);
    CHECK(static_cast<std::size_t>(k) == g.active_edge_count());
  }
}

TEST_CASE("crossover examples") {
  const auto space = small_generator();
  Rng rng(5);
  const Genome p = random_genome(space, 0.5, rng);
  CHECK(crossover(space, p, p, rng) == p);
  for (int i = 0; i < 10000; ++i) {
    const Genome a = random_genome(space, 0.5, rng);
    const Genome b = random_genome(space, 0.5, rng);
    const auto draw = crossover_raw(space, a, b, rng);
    REQUIRE(draw.swapped.size() == 12);
    const std::set<std::size_t> swapped(draw.swapped.begin(), draw.swapped.end());
    REQUIRE(swapped.size() == 12);
    for (std::size_t e = 0; e < 25; ++e)
      REQUIRE(draw.child.op(e) == (swapped.contains(e) ? b.op(e) : a.op(e)));
  }
  const auto dspace = SearchSpace::discriminator(4, 32, SearchSpace::scaled_node_dims(Role::kDiscriminator, 32));
  CHECK_THROWS_AS(crossover(space, p, random_genome(dspace, 0.5, rng), rng), ParameterError);
}

TEST_CASE("mutation examples") {
  const auto space = small_generator();
  Rng rng(6);
  int arity[5] = {0, 0, 0, 0, 0};
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) {
    const Genome g = random_genome(space, 0.5, rng);
    const auto draw = mutate_raw(space, g, rng);
    const std::size_t k = draw.positions.size();
    REQUIRE((k == 1 || k == 2 || k == 4));
    ++arity[k];
    std::size_t differing = 0;
    for (std::size_t e = 0; e < 25; ++e) differing += draw.mutated.op(e) != g.op(e);
    REQUIRE(differing == k);
    for (std::size_t e : draw.positions) REQUIRE(draw.mutated.op(e) != g.op(e));
  }
  CHECK(std::abs(arity[1] / double(trials) - 0.5) <= 0.03);
  CHECK(std::abs(arity[2] / double(trials) - 0.3) <= 0.03);
  CHECK(std::abs(arity[4] / double(trials) - 0.2) <= 0.03);
}

TEST_CASE("genetic operators are closed over canonical connected genomes") {
  const auto space = small_generator();
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Genome a = random_genome(space, 0.7, rng);
    const Genome b = random_genome(space, 0.7, rng);
    for (const Genome& c : {crossover(space, a, b, rng), mutate(space, a, rng)}) {
      REQUIRE(is_canonical(space, c));
      REQUIRE(is_connected(space, c));
    }
  }
}

TEST_CASE("genetic operators are reproducible") {
  const auto space = small_generator();
  Rng r1(8), r2(8);
  for (int i = 0; i < 100; ++i) {
    const Genome a1 = random_genome(space, 0.5, r1), a2 = random_genome(space, 0.5, r2);
    const Genome b1 = random_genome(space, 0.5, r1), b2 = random_genome(space, 0.5, r2);
    REQUIRE(a1 == a2);
    REQUIRE(crossover(space, a1, b1, r1) == crossover(space, a2, b2, r2));
    REQUIRE(mutate(space, a1, r1) == mutate(space, a2, r2));
  }
}

TEST_CASE("reduced 7-edge space agrees with path enumeration on all 5^7 genomes") {
  const SearchSpace space(Role::kGenerator, 3, 3, {4, 5});
  REQUIRE(space.num_edges() == 7);
  std::vector<Op> ops(7);
  long mismatches = 0;
  for (int code = 0; code < 78125; ++code) {
    int c = code;
    for (auto& op : ops) {
      op = op_from_index(c % 5);
      c /= 5;
    }
    const Genome g(Role::kGenerator, ops);
    const auto oracle = edges_on_paths(space, g);
    const Genome canon = canonicalize(space, g);
    for (std::size_t e = 0; e < 7; ++e) {
      const bool kept = canon.op(e) != Op::kNone;
      if (kept != oracle[e] || (kept && canon.op(e) != g.op(e))) ++mismatches;
    }
    bool any = false;
    for (bool u : oracle) any = any || u;
    if (any != is_connected(space, g)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("fixed CLSWGAN genomes") {
  const auto d = SearchSpace::discriminator(85, 2048);
  const Genome fd = fixed_clswgan_discriminator(d);
  CHECK(complexity(d, fd) == 2.0 / 25.0);
  CHECK(canonicalize(d, fd) == fd);
  CHECK(fd.op(edge_index(d, 2, 3)) == Op::kFcLeakyRelu);
  CHECK(fd.op(edge_index(d, 3, 7)) == Op::kFcLeakyRelu);
  CHECK(d.node_dim(2) == 85 + 2048);
  CHECK(d.node_dim(3) == 4096);
  CHECK(d.node_dim(7) == 1);
  CHECK_THROWS_AS(fixed_clswgan_discriminator(SearchSpace::generator(85, 85)), ParameterError);

  const auto g = SearchSpace::generator(85, 85);
  const Genome fg = fixed_clswgan_generator(g);
  CHECK(canonicalize(g, fg) == fg);
  CHECK(fg.active_edge_count() == 2);
  CHECK_THROWS_AS(fixed_clswgan_generator(d), ParameterError);
}

TEST_CASE("export_arch examples") {
  const auto d = SearchSpace::discriminator(4, 32, SearchSpace::scaled_node_dims(Role::kDiscriminator, 32));
  const auto empty = export_arch(d, Genome::all_none(d));
  CHECK(empty.active_edges == 0);
  CHECK(empty.dot.find("->") == std::string::npos);

  const Genome fd = fixed_clswgan_discriminator(d);
  const auto report = export_arch(d, fd);
  CHECK(report.active_edges == 2);
  CHECK(report.parameter_count == (64 * 36 + 64) + (1 * 64 + 1));
  CHECK(report.parameter_count == subnet_parameter_count(d, fd));
  CHECK(report.dot.find("label=\"a+x\"") != std::string::npos);
  CHECK(report.dot.find("n2 -> n3") != std::string::npos);
  CHECK(report.dot.find("n3 -> n7") != std::string::npos);
  std::size_t arrows = 0;
  for (std::size_t p = report.dot.find("->"); p != std::string::npos; p = report.dot.find("->", p + 2)) ++arrows;
  CHECK(arrows == 2);
  CHECK(report.fan_in[3] == 1);
  CHECK(report.fan_in[7] == 1);

  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Genome g = random_genome(d, 0.5, rng);
    const auto j = genome_to_json(d, g);
    CHECK(genome_from_json(j, d) == g);
    const auto [space2, g2] = genome_and_space_from_json(nlohmann::json::parse(j.dump()));
    CHECK(space2 == d);
    CHECK(g2 == g);
  }
  auto bad = genome_to_json(d, fd);
  bad["ops"].push_back(0);
  CHECK_THROWS_AS(genome_from_json(bad, d), FormatError);
  CHECK_THROWS_AS(export_arch(d, Genome::all_none(d).with_op(edge_index(d, 3, 4), Op::kFcRelu)),
                  ContractViolation);
}

TEST_CASE("genome hashes are stable and distinguish roles") {
  const auto g = small_generator();
  const auto d = SearchSpace::discriminator(4, 32, SearchSpace::scaled_node_dims(Role::kDiscriminator, 32));
  CHECK(Genome::all_none(g).hash() != Genome::all_none(d).hash());
  CHECK(Genome::all_none(g).hash() == Genome::all_none(g).hash());
  CHECK(Genome::all_none(g).hash_hex().size() == 16);
}

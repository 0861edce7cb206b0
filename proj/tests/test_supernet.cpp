#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gansearch/arch_export.hpp"
#include "gansearch/checkpoint.hpp"
#include "gansearch/errors.hpp"
#include "gansearch/grad_check.hpp"
#include "gansearch/supernet.hpp"

using namespace gansearch;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

std::size_t edge_index(const SearchSpace& space, int source, int target) {
  const auto& edges = space.edges();
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (edges[e].source == source && edges[e].target == target) return e;
  throw std::out_of_range("no such edge");
}

// Zero biases put dead nodes exactly on the ReLU kink; finite differences
// need a differentiable point.
void randomize_biases(SupernetParams& p, Rng& rng) {
  for (auto& layer : p.layers())
    for (double& b : layer.bias.values()) b = 0.1 * rng.normal();
}

SearchSpace toy_generator() { return SearchSpace::generator(3, 4, {5, 6, 4, 7, 5}); }
SearchSpace toy_critic() { return SearchSpace::discriminator(3, 5, {6, 5, 4, 3, 1}); }

// Reference evaluator: visits each node's incoming edges in reverse order and
// recomputes every edge from the raw parameters (eval mode).
Matrix reference_forward(const SupernetParams& p, const Genome& g, const Matrix& a, const Matrix& s) {
  const auto& space = p.space();
  std::vector<Matrix> values(space.num_nodes());
  values[0] = a;
  values[1] = s;
  values[2] = concat_cols(a, s);
  for (int node = SearchSpace::kNumInputs; node < space.num_nodes(); ++node) {
    Matrix acc(a.rows(), space.node_dim(node));
    const auto& edges = space.edges();
    for (std::size_t k = edges.size(); k-- > 0;) {
      if (edges[k].target != node || g.op(k) == Op::kNone) continue;
      if (values[edges[k].source].empty()) continue;
      const auto& layer = p.layer(k, g.op(k));
      Matrix out = affine_forward(layer.weight, layer.bias, values[edges[k].source]);
      const bool plain = space.role() == Role::kDiscriminator && node == space.output_node();
      if (!plain) out = activate(out, op_activation(g.op(k)), p.activation().leaky_slope);
      add_inplace(acc, out);
    }
    bool any_in = false;
    for (std::size_t k = 0; k < edges.size(); ++k)
      any_in = any_in || (edges[k].target == node && g.op(k) != Op::kNone);
    if (any_in) values[node] = acc;
  }
  return values[space.output_node()];
}

// Three active edges with dropout on two of them.
Genome three_edge_genome(const SearchSpace& space) {
  return Genome::all_none(space)
      .with_op(edge_index(space, 2, 3), Op::kFcLeakyReluDropout)
      .with_op(edge_index(space, 3, 7), Op::kFcReluDropout)
      .with_op(edge_index(space, 0, 7), Op::kFcLeakyRelu);
}

}  // namespace

TEST_CASE("init_supernet examples") {
  const auto space = SearchSpace::generator(85, 85);
  std::size_t expected = 0;
  for (const auto& e : space.edges())
    expected += 4 * (space.node_dim(e.target) * space.node_dim(e.source) + space.node_dim(e.target));
  CHECK(full_supernet_parameter_count(space) == expected);

  const auto small = toy_generator();
  Rng r1(1), r2(1);
  const auto p1 = init_supernet(small, r1);
  const auto p2 = init_supernet(small, r2);
  CHECK(p1 == p2);
  CHECK(p1.parameter_count() == full_supernet_parameter_count(small));
  for (const auto& layer : p1.layers()) {
    REQUIRE(layer.materialized());
    for (double b : layer.bias.values()) CHECK(b == 0.0);
  }

  const SearchSpace wide = SearchSpace::discriminator(64, 960, {400, 64, 64, 64, 1});
  Rng r3(2);
  const auto pw = init_supernet(wide, r3);
  const auto& layer = pw.layer(edge_index(wide, 2, 3), Op::kFcRelu);
  double m2 = 0.0;
  for (double v : layer.weight.values()) m2 += v * v;
  const double std_dev = std::sqrt(m2 / static_cast<double>(layer.weight.size()));
  CHECK(std::abs(std_dev - 1.0 / std::sqrt(1024.0)) < 0.1 / std::sqrt(1024.0));
}

TEST_CASE("subnet_forward examples") {
  const auto critic_space = SearchSpace::discriminator(16, 32, SearchSpace::scaled_node_dims(Role::kDiscriminator, 32));
  Rng rng(3);
  const auto critic = init_supernet(critic_space, rng);
  const auto out = subnet_forward(critic, fixed_clswgan_discriminator(critic_space),
                                  random_matrix(64, 16, rng), random_matrix(64, 32, rng),
                                  Mode::kTrain, rng);
  CHECK(out.output.rows() == 64);
  CHECK(out.output.cols() == 1);

  const SearchSpace eye = SearchSpace::generator(4, 4, {4, 4, 4, 4, 4});
  auto p = init_supernet(eye, rng);
  const Genome chain = Genome::all_none(eye)
                           .with_op(edge_index(eye, 0, 3), Op::kFcRelu)
                           .with_op(edge_index(eye, 3, 7), Op::kFcRelu);
  for (auto [e, op] : {std::pair{edge_index(eye, 0, 3), Op::kFcRelu}, std::pair{edge_index(eye, 3, 7), Op::kFcRelu}}) {
    p.layer(e, op).weight = Matrix::identity(4);
    p.layer(e, op).bias = Matrix(1, 4);
  }
  Matrix a = random_matrix(5, 4, rng);
  for (double& v : a.values()) v = std::abs(v);
  CHECK(subnet_forward(p, chain, a, random_matrix(5, 4, rng), Mode::kEval, rng).output == a);

  const auto g = toy_generator();
  const auto pg = init_supernet(g, rng);
  Rng grng(4);
  const Genome full(Role::kGenerator, std::vector<Op>(25, Op::kFcLeakyRelu));
  const auto zero = subnet_forward(pg, full, Matrix(3, 3), Matrix(3, 4), Mode::kTrain, grng);
  CHECK(zero.output == Matrix(3, 5));

  CHECK_THROWS_AS(subnet_forward(pg, Genome::all_none(g), Matrix(3, 3), Matrix(3, 4), Mode::kEval, grng),
                  ContractViolation);
  CHECK_THROWS_AS(subnet_forward(pg, full, Matrix(3, 2), Matrix(3, 4), Mode::kEval, grng), DimensionError);
}

TEST_CASE("eval-mode forward is deterministic and matches an independent evaluator") {
  for (const auto& space : {toy_generator(), toy_critic()}) {
    Rng rng(5);
    const auto p = init_supernet(space, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const Genome g = random_genome(space, 0.4, rng);
      const Matrix a = random_matrix(6, space.attr_dim(), rng);
      const Matrix s = random_matrix(6, space.second_dim(), rng);
      Rng f1(trial), f2(trial + 1000);
      const auto o1 = subnet_forward(p, g, a, s, Mode::kEval, f1);
      const auto o2 = subnet_forward(p, g, a, s, Mode::kEval, f2);
      REQUIRE(o1.output == o2.output);
      REQUIRE(max_abs_diff(o1.output, reference_forward(p, g, a, s)) < 1e-9);
    }
  }
}

TEST_CASE("subnet_backward examples and finite differences") {
  for (const auto& space : {toy_generator(), toy_critic()}) {
    Rng rng(6);
    auto p = init_supernet(space, rng);
    randomize_biases(p, rng);
    for (int trial = 0; trial < 100; ++trial) {
      const Genome g = trial == 0 ? three_edge_genome(space) : random_genome(space, 0.85, rng);
      const Matrix a = random_matrix(4, space.attr_dim(), rng);
      const Matrix s = random_matrix(4, space.second_dim(), rng);
      Rng drop_rng(trial);
      const auto fwd = subnet_forward(p, g, a, s, Mode::kTrain, drop_rng);
      const Matrix probe = random_matrix(fwd.output.rows(), fwd.output.cols(), rng);

      const auto zero = subnet_backward(p, fwd.cache, Matrix(fwd.output.rows(), fwd.output.cols()));
      for (const auto& lg : zero.layers) REQUIRE(sum(hadamard(lg.weight, lg.weight)) == 0.0);

      const auto grads = subnet_backward(p, fwd.cache, probe);
      std::size_t active = 0;
      for (std::size_t e = 0; e < g.size(); ++e) active += g.op(e) != Op::kNone;
      REQUIRE(grads.layers.size() == active);

      const ScalarFunction by_second = [&](const Matrix& ss, Matrix* grad) {
        Rng unused(0);
        const auto f = subnet_forward(p, g, a, ss, Mode::kTrain, unused, &fwd.cache);
        if (grad) *grad = subnet_backward(p, f.cache, probe).second;
        return sum(hadamard(f.output, probe));
      };
      REQUIRE(grad_check(by_second, s) < 1e-4);
      const ScalarFunction by_attrs = [&](const Matrix& aa, Matrix* grad) {
        Rng unused(0);
        const auto f = subnet_forward(p, g, aa, s, Mode::kTrain, unused, &fwd.cache);
        if (grad) *grad = subnet_backward(p, f.cache, probe).attrs;
        return sum(hadamard(f.output, probe));
      };
      REQUIRE(grad_check(by_attrs, a) < 1e-4);

      for (const auto& lg : grads.layers) {
        REQUIRE(g.op(lg.edge) == lg.op);
        const ScalarFunction by_weight = [&](const Matrix& w, Matrix* grad) {
          SupernetParams q = p;
          q.layer(lg.edge, lg.op).weight = w;
          q.set_version(p.version());
          Rng unused(0);
          const auto f = subnet_forward(q, g, a, s, Mode::kTrain, unused, &fwd.cache);
          if (grad) {
            for (const auto& l2 : subnet_backward(q, f.cache, probe).layers)
              if (l2.edge == lg.edge) *grad = l2.weight;
          }
          return sum(hadamard(f.output, probe));
        };
        REQUIRE(grad_check(by_weight, p.layer(lg.edge, lg.op).weight) < 1e-4);
        const ScalarFunction by_bias = [&](const Matrix& b, Matrix* grad) {
          SupernetParams q = p;
          q.layer(lg.edge, lg.op).bias = b;
          Rng unused(0);
          const auto f = subnet_forward(q, g, a, s, Mode::kTrain, unused, &fwd.cache);
          if (grad) {
            for (const auto& l2 : subnet_backward(q, f.cache, probe).layers)
              if (l2.edge == lg.edge) *grad = l2.bias;
          }
          return sum(hadamard(f.output, probe));
        };
        REQUIRE(grad_check(by_bias, p.layer(lg.edge, lg.op).bias) < 1e-4);
      }
    }
  }
}

TEST_CASE("stale caches are rejected") {
  const auto space = toy_generator();
  Rng rng(7);
  auto p = init_supernet(space, rng);
  const Genome g = three_edge_genome(space);
  const auto fwd = subnet_forward(p, g, random_matrix(2, 3, rng), random_matrix(2, 4, rng), Mode::kTrain, rng);
  const auto grads = subnet_backward(p, fwd.cache, Matrix(2, 5, 1.0));
  apply_adam(p, grads.layers, OptimHyper{});
  CHECK_THROWS_AS(subnet_backward(p, fwd.cache, Matrix(2, 5, 1.0)), ContractViolation);
}

TEST_CASE("input-gradient VJP matches finite differences of the input gradient") {
  const auto space = toy_critic();
  Rng rng(8);
  auto p = init_supernet(space, rng);
  randomize_biases(p, rng);
  for (int trial = 0; trial < 100; ++trial) {
    const Genome g = trial == 0 ? three_edge_genome(space) : random_genome(space, 0.85, rng);
    const Matrix a = random_matrix(4, 3, rng);
    const Matrix x = random_matrix(4, 5, rng);
    Rng drop_rng(trial);
    const auto fwd = subnet_forward(p, g, a, x, Mode::kTrain, drop_rng);
    const Matrix ones(4, 1, 1.0);
    const auto seed = subnet_backward(p, fwd.cache, ones);
    const Matrix adjoint = random_matrix(4, 5, rng);
    const auto vjp = input_gradient_vjp(p, fwd.cache, seed, adjoint);
    for (const auto& lg : vjp) {
      for (double b : lg.bias.values()) REQUIRE(b == 0.0);
      const ScalarFunction f = [&](const Matrix& w, Matrix* grad) {
        SupernetParams q = p;
        q.layer(lg.edge, lg.op).weight = w;
        Rng unused(0);
        const auto fw = subnet_forward(q, g, a, x, Mode::kTrain, unused, &fwd.cache);
        const auto sb = subnet_backward(q, fw.cache, ones);
        if (grad) {
          for (const auto& l2 : input_gradient_vjp(q, fw.cache, sb, adjoint))
            if (l2.edge == lg.edge) *grad = l2.weight;
        }
        return sum(hadamard(sb.second, adjoint));
      };
      REQUIRE(grad_check(f, p.layer(lg.edge, lg.op).weight) < 1e-4);
    }
  }
}

TEST_CASE("extract_standalone copies exactly and isolates") {
  const auto space = toy_critic();
  Rng rng(9);
  const auto p = init_supernet(space, rng);
  const Genome g = random_genome(space, 0.5, rng);
  auto standalone = extract_standalone(p, g);
  CHECK(standalone.params.parameter_count() == subnet_parameter_count(space, g));
  for (int i = 0; i < 100; ++i) {
    const Matrix a = random_matrix(3, 3, rng);
    const Matrix x = random_matrix(3, 5, rng);
    Rng u(0);
    const auto o1 = subnet_forward(p, g, a, x, Mode::kEval, u);
    const auto o2 = subnet_forward(standalone.params, standalone.genome, a, x, Mode::kEval, u);
    REQUIRE(max_abs_diff(o1.output, o2.output) == 0.0);
  }
  const SupernetParams before = p;
  for (auto& layer : standalone.params.layers())
    if (layer.materialized()) layer.weight.fill(3.0);
  CHECK(p == before);
}

TEST_CASE("weight sharing and no gradient leakage") {
  const auto space = toy_generator();
  Rng rng(10);
  auto p = init_supernet(space, rng);
  const std::size_t shared = edge_index(space, 2, 3);
  const Genome g1 = Genome::all_none(space)
                        .with_op(shared, Op::kFcRelu)
                        .with_op(edge_index(space, 3, 7), Op::kFcLeakyRelu);
  const Genome g2 = Genome::all_none(space)
                        .with_op(shared, Op::kFcRelu)
                        .with_op(edge_index(space, 3, 7), Op::kFcRelu);
  const Matrix a = random_matrix(4, 3, rng);
  const Matrix z = random_matrix(4, 4, rng);
  Rng u(0);
  const Matrix g2_before = subnet_forward(p, g2, a, z, Mode::kEval, u).output;
  const SupernetParams before = p;

  OptimHyper h;
  h.learning_rate = 0.05;
  const auto fwd = subnet_forward(p, g1, a, z, Mode::kTrain, u);
  apply_adam(p, subnet_backward(p, fwd.cache, Matrix(4, 5, 1.0)).layers, h);
  CHECK(max_abs_diff(subnet_forward(p, g2, a, z, Mode::kEval, u).output, g2_before) > 0.0);

  for (std::size_t e = 0; e < g1.size(); ++e)
    for (int k = 0; k < kNumParamOps; ++k) {
      const Op op = op_from_index(k);
      if (g1.op(e) == op) {
        CHECK_FALSE(p.layer(e, op) == before.layer(e, op));
      } else {
        REQUIRE(p.layer(e, op) == before.layer(e, op));
      }
    }
}

TEST_CASE("apply_adam rejects non-finite gradients without touching weights") {
  const auto space = toy_generator();
  Rng rng(11);
  auto p = init_supernet(space, rng);
  const SupernetParams before = p;
  const std::size_t e = edge_index(space, 2, 3);
  LayerGrad bad{e, Op::kFcRelu, Matrix(5, 7), Matrix(1, 5)};
  bad.weight(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(apply_adam(p, {bad}, OptimHyper{}), NumericError);
  CHECK(p == before);
}

TEST_CASE("checkpoint round trip is bit exact") {
  Rng rng(12);
  auto g = init_supernet(toy_generator(), rng);
  auto d = init_supernet(toy_critic(), rng, 1.0, ActivationConfig{0.1, 0.3});
  const Genome gg = three_edge_genome(g.space());
  const auto fwd = subnet_forward(g, gg, random_matrix(2, 3, rng), random_matrix(2, 4, rng), Mode::kTrain, rng);
  apply_adam(g, subnet_backward(g, fwd.cache, Matrix(2, 5, 0.3)).layers, OptimHyper{});
  const auto standalone = extract_standalone(g, gg);

  const std::string bytes = serialize_checkpoint({&g, &d, &standalone.params});
  const auto loaded = deserialize_checkpoint(bytes);
  REQUIRE(loaded.size() == 3);
  CHECK(loaded[0] == g);
  CHECK(loaded[1] == d);
  CHECK(loaded[2] == standalone.params);
  CHECK(serialize_checkpoint({&loaded[0], &loaded[1], &loaded[2]}) == bytes);

  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes + "x"), FormatError);
  std::string corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(corrupt), FormatError);

  const auto path = std::filesystem::temp_directory_path() / "gansearch_test.ckpt";
  save_checkpoint(path, {&g});
  CHECK(load_checkpoint(path).at(0) == g);
  std::filesystem::remove(path);
}

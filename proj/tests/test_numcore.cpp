#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ssa/rng.hpp"
#include "ssa/tensor.hpp"
#include "test_util.hpp"

using namespace ssa;
using ssa::testing::max_grad_rel_err;
using ssa::testing::random_matrix;

TEST_CASE("matmul basics") {
  Graph g;
  Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  Tensor m = Tensor::matrix(2, 2, {5, 6, 7, 8});
  CHECK(g.matmul(eye, m).values == std::vector<double>{5, 6, 7, 8});

  Tensor a = Tensor::matrix(1, 2, {1, 2});
  Tensor b = Tensor::matrix(2, 1, {3, 4});
  CHECK(g.matmul(a, b).values == std::vector<double>{11});

  Tensor zero = Tensor::zeros({2, 2});
  for (double v : g.matmul(zero, m).values) CHECK(v == 0.0);

  CHECK_THROWS_AS(g.matmul(a, Tensor::matrix(3, 1, {1, 2, 3})),
                  DimensionError);
}

TEST_CASE("elementwise basics") {
  Graph g;
  CHECK(g.relu(Tensor::vector({-1, 0, 2})).values ==
        std::vector<double>{0, 0, 2});
  CHECK(g.log(Tensor::vector({1})).values == std::vector<double>{0});
  Tensor e = g.exp(Tensor::vector({0, 1}));
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(2.718281828459045));
  CHECK_THROWS_AS(g.log(Tensor::vector({-1.0})), DomainError);
  CHECK_THROWS_AS(g.add(Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})),
                  DimensionError);

  // scalar-vs-tensor broadcasting
  Tensor s = g.mul(Tensor::scalar(2.0), Tensor::vector({1, 2, 3}));
  CHECK(s.values == std::vector<double>{2, 4, 6});
}

TEST_CASE("stop_gradient forward identity, backward zero") {
  Graph g;
  Tensor w = g.leaf(Tensor::vector({3.5}));
  Tensor stopped = g.stop_gradient(w);
  CHECK(stopped.values == std::vector<double>{3.5});

  // d/dw [w * sg(w)] at w=2 is 2: only the unstopped factor contributes.
  Graph g2;
  Tensor w2 = g2.leaf(Tensor::vector({2.0}));
  Tensor prod = g2.sum(g2.mul(w2, g2.stop_gradient(w2)));
  CHECK(g2.backward(prod).at(w2.node).values[0] == 2.0);

  // gradient of sum(sg(w)) is the exact zero vector
  Graph g3;
  Tensor w3 = g3.leaf(Tensor::vector({1.0, -2.0, 3.0}));
  Tensor loss = g3.sum(g3.stop_gradient(w3));
  GradientMap grads = g3.backward(loss);
  for (double v : grads.at(w3.node).values) {
    CHECK(v == 0.0);
    CHECK(!std::signbit(v));
  }
}

TEST_CASE("l2_normalize") {
  Graph g;
  Tensor n = g.l2_normalize(Tensor::vector({3, 4}));
  CHECK(n.values[0] == doctest::Approx(0.6));
  CHECK(n.values[1] == doctest::Approx(0.8));

  Tensor unit = g.l2_normalize(Tensor::vector({1, 0, 0}));
  CHECK(unit.values == std::vector<double>{1, 0, 0});

  CHECK_THROWS_AS(g.l2_normalize(Tensor::vector({0, 0})),
                  DegenerateInputError);

  // unit norm within 1e-12 on random vectors
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    Graph gg;
    std::vector<double> v(5);
    for (double& x : v) x = rng.normal();
    Tensor out = gg.l2_normalize(Tensor::vector(v));
    double ss = 0.0;
    for (double x : out.values) ss += x * x;
    CHECK(std::abs(std::sqrt(ss) - 1.0) < 1e-12);
  }
}

TEST_CASE("backward basics") {
  Graph g;
  Tensor w = g.leaf(Tensor::vector({1, 2, 3}));
  CHECK(g.backward(g.sum(w)).at(w.node).values ==
        std::vector<double>{1, 1, 1});

  Graph g2;
  Tensor w2 = g2.leaf(Tensor::vector({1, 2}));
  Tensor loss = g2.sum(g2.mul(w2, w2));
  CHECK(g2.backward(loss).at(w2.node).values == std::vector<double>{2, 4});

  Graph g3;
  Tensor w3 = g3.leaf(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g3.backward(g3.mul(w3, w3)), ContractError);
}

TEST_CASE("finite differences over randomized small graphs") {
  Rng rng(42);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor a = random_matrix(3, 4, rng);
    Tensor b = random_matrix(4, 2, rng);
    Tensor c = random_matrix(3, 2, rng);
    const double err = max_grad_rel_err(
        {&a, &b, &c}, [](Graph& g, const std::vector<Tensor>& bound) {
          Tensor prod = g.matmul(bound[0], bound[1]);
          Tensor mixed = g.mul(prod, bound[2]);
          Tensor act = g.relu(g.add_scalar(mixed, 0.3));
          Tensor sq = g.mul(act, act);
          Tensor ssum = g.row_sum(sq);
          Tensor soft = g.log(g.add_scalar(g.exp(g.neg(ssum)), 1.0));
          return g.mean(soft);
        });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("finite differences cover sqrt, div, pow, broadcast, gather") {
  Rng rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    Tensor m = random_matrix(4, 3, rng);
    Tensor v = random_matrix(1, 3, rng);
    Tensor vvec = Tensor::vector(v.values);
    const double err = max_grad_rel_err(
        {&m, &vvec}, [](Graph& g, const std::vector<Tensor>& bound) {
          Tensor sq = g.add_scalar(g.mul(bound[0], bound[0]), 0.5);
          Tensor root = g.sqrt(sq);
          Tensor scaled = g.div(root, g.broadcast_rows(
                                          g.add_scalar(g.mul(bound[1], bound[1]), 1.0),
                                          4));
          Tensor p = g.pow_scalar(g.add_scalar(scaled, 2.0), 1.7);
          Tensor picked = g.gather_cols(p, {0, 2, 1, 0});
          return g.mean(picked);
        });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("forward determinism is bitwise") {
  auto run = [] {
    Rng rng(5);
    Tensor a = random_matrix(4, 4, rng);
    Tensor b = random_matrix(4, 4, rng);
    Graph g;
    return g.sum(g.relu(g.matmul(a, b))).item();
  };
  const double first = run();
  for (int i = 0; i < 5; ++i) CHECK(run() == first);
}

TEST_CASE("leaves reachable only through stop_gradient get bitwise zeros") {
  Rng rng(11);
  Tensor w = random_matrix(3, 3, rng);
  Graph g;
  Tensor leaf = g.leaf(w);
  Tensor mixed = g.add(g.stop_gradient(g.mul(leaf, leaf)),
                       g.constant(Tensor::zeros({3, 3})));
  Tensor loss = g.mean(mixed);
  GradientMap grads = g.backward(loss);
  for (double v : grads.at(leaf.node).values) CHECK(v == 0.0);
}

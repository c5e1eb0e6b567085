#include <benchmark/benchmark.h>

#include <vector>

#include "ssa/data.hpp"
#include "ssa/eval.hpp"
#include "ssa/losses.hpp"
#include "ssa/model.hpp"
#include "ssa/rng.hpp"
#include "ssa/train.hpp"

using namespace ssa;

namespace {

Tensor random_batch(Rng& rng, std::size_t rows, std::size_t cols) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform();
  return Tensor::matrix(rows, cols, std::move(v));
}

Model benchmark_model(Rng& rng, bool with_head) {
  ModelSpec spec;
  spec.input_dim = 256;
  spec.hidden = {256, 256};
  spec.embedding_dim = 128;
  spec.classes = 20;
  Model m = Model::init(spec, rng);
  if (with_head) m.add_simsiam_head(rng);
  return m;
}

void BM_MatmulForward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_batch(rng, 32, n);
  Tensor b = random_batch(rng, n, n);
  for (auto _ : state) {
    Graph g;
    benchmark::DoNotOptimize(g.matmul(g.constant(a), g.constant(b)).values);
  }
}
BENCHMARK(BM_MatmulForward)->Arg(64)->Arg(128)->Arg(256);

void BM_ClassifierStep(benchmark::State& state) {
  Rng rng(1);
  Model m = benchmark_model(rng, false);
  Tensor x = random_batch(rng, 32, 256);
  std::vector<std::size_t> labels(32);
  for (std::size_t& l : labels) l = rng.index(20);
  SgdOptimizer opt(0.9, m.store);
  std::size_t step = 0;
  for (auto _ : state) {
    Graph g;
    BoundParams bound = m.bind(g);
    Tensor z = m.f.forward(g, bound, x, true);
    Tensor probs = m.classifier.forward(g, bound, z, &labels, true);
    Tensor loss = focal_ce(g, probs, labels, 2.0);
    GradientMap grads = g.backward(loss);
    opt.step(m.store, bound, grads, 1e-4, step++);
  }
}
BENCHMARK(BM_ClassifierStep);

void BM_AdaptStep(benchmark::State& state) {
  Rng rng(1);
  Model m = benchmark_model(rng, true);
  Tensor xs = random_batch(rng, 32, 256);
  Tensor xsm = random_batch(rng, 32, 256);
  Tensor xt = random_batch(rng, 32, 256);
  Tensor xtm = random_batch(rng, 32, 256);
  std::vector<std::size_t> labels(32);
  for (std::size_t& l : labels) l = rng.index(20);
  LossConfig lc;
  SgdOptimizer opt(0.9, m.store);
  std::size_t step = 0;
  for (auto _ : state) {
    Graph g;
    BoundParams bound = m.bind(g);
    TotalLossParts parts =
        total_loss(g, m, bound, xs, xsm, labels, xt, xtm, lc, true);
    GradientMap grads = g.backward(parts.total);
    opt.step(m.store, bound, grads, 1e-4, step++);
  }
}
BENCHMARK(BM_AdaptStep);

void BM_TprAtFpr(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  std::vector<double> genuine(n), impostor(10 * n);
  for (double& s : genuine) s = rng.normal(0.5, 0.2);
  for (double& s : impostor) s = rng.normal(0.0, 0.2);
  const std::vector<double> targets = {1e-4, 1e-3, 1e-2, 1e-1};
  for (auto _ : state)
    benchmark::DoNotOptimize(tpr_at_fpr(genuine, impostor, targets));
}
BENCHMARK(BM_TprAtFpr)->Arg(1000)->Arg(10000);

void BM_Generate(benchmark::State& state) {
  SyntheticSpec spec;  // default benchmark
  for (auto _ : state) {
    spec.seed++;
    benchmark::DoNotOptimize(generate(spec).source.samples);
  }
}
BENCHMARK(BM_Generate);

}  // namespace

BENCHMARK_MAIN();

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ssa/errors.hpp"
#include "ssa/eval.hpp"
#include "ssa/rng.hpp"
#include "test_util.hpp"

using namespace ssa;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// Brute-force verification oracle: enumerate every admissible threshold
// candidate, keep the smallest whose impostor acceptance rate is <= alpha,
// count genuine scores at or above it. No sorting, plain scans.
double oracle_tpr(const std::vector<double>& genuine,
                  const std::vector<double>& impostor, double alpha) {
  std::vector<double> candidates = {-kInf};
  double top = -kInf;
  for (double s : impostor) {
    candidates.push_back(s);
    top = std::max(top, s);
  }
  candidates.push_back(std::nextafter(top, kInf));

  double best = kInf;
  for (double t : candidates) {
    std::size_t accepted = 0;
    for (double s : impostor)
      if (s >= t) ++accepted;
    const double rate =
        static_cast<double>(accepted) / static_cast<double>(impostor.size());
    if (rate <= alpha && t < best) best = t;
  }
  std::size_t hits = 0;
  for (double s : genuine)
    if (s >= best) ++hits;
  return static_cast<double>(hits) / static_cast<double>(genuine.size());
}

// Oracle reduction for open-set identification: known probes become the
// "genuine" list (wrong rank-1 matches mapped to -inf so they never count),
// unknown probes' best scores become the "impostor" list.
double oracle_tpir(const std::vector<GalleryEntry>& gallery,
                   const std::vector<Probe>& probes, double alpha) {
  auto best = [&](const std::vector<double>& e) {
    double bs = -kInf;
    std::uint32_t bid = 0;
    for (const GalleryEntry& g : gallery) {
      const double s = cosine(g.embedding, e);
      if (s > bs) {
        bs = s;
        bid = g.id;
      }
    }
    return std::make_pair(bs, bid);
  };
  std::vector<double> genuine, impostor;
  for (const Probe& p : probes) {
    const auto [s, id] = best(p.embedding);
    if (!p.known)
      impostor.push_back(s);
    else
      // NaN never satisfies s >= t, so a wrong rank-1 match can never
      // count, not even at threshold -inf
      genuine.push_back(id == p.id
                            ? s
                            : std::numeric_limits<double>::quiet_NaN());
  }
  return oracle_tpr(genuine, impostor, alpha);
}

// Full-sort closed-set oracle.
double oracle_rank_k(const std::vector<GalleryEntry>& gallery,
                     const std::vector<Probe>& probes, std::size_t k) {
  std::size_t hits = 0;
  for (const Probe& p : probes) {
    // count gallery entries strictly better than the best correct entry
    double best_correct = -kInf;
    std::size_t best_correct_idx = gallery.size();
    for (std::size_t i = 0; i < gallery.size(); ++i) {
      if (gallery[i].id != p.id) continue;
      const double s = cosine(gallery[i].embedding, p.embedding);
      if (s > best_correct) {
        best_correct = s;
        best_correct_idx = i;
      }
    }
    std::size_t ahead = 0;
    for (std::size_t i = 0; i < gallery.size(); ++i) {
      const double s = cosine(gallery[i].embedding, p.embedding);
      if (s > best_correct || (s == best_correct && i < best_correct_idx))
        ++ahead;
    }
    if (ahead < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probes.size());
}

std::vector<double> random_embedding(Rng& rng, std::size_t d) {
  std::vector<double> e(d);
  for (double& v : e) v = rng.normal();
  return e;
}

}  // namespace

TEST_CASE("cosine score basics") {
  CHECK(score({1, 0}, {1, 1}) == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  CHECK(score({1, 0}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(score({1, 0}, {-1, 0}) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK_THROWS_AS(score({0, 0}, {1, 0}), DegenerateInputError);
  CHECK_THROWS_AS(score({1, 0}, {1, 0, 0}), DimensionError);

  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_embedding(rng, 6);
    const auto b = random_embedding(rng, 6);
    CHECK(std::fabs(score(a, b) - score(b, a)) <= 1e-15);
  }
}

TEST_CASE("tpr_at_fpr worked examples") {
  CHECK(tpr_at_fpr({0.9, 0.8}, {0.1, 0.2}, {0.01})[0] == 1.0);
  // threshold lands on the outlier impostor 0.8: exactly one of four
  // impostors is admitted and only genuine 0.9 survives
  CHECK(tpr_at_fpr({0.9, 0.7, 0.4}, {0.8, 0.3, 0.2, 0.1}, {0.25})[0] ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(tpr_at_fpr({0.5}, {0.1, 0.9}, {1.0})[0] == 1.0);
  CHECK_THROWS_AS(tpr_at_fpr({}, {0.1}, {0.5}), ProtocolError);
  CHECK_THROWS_AS(tpr_at_fpr({0.1}, {}, {0.5}), ProtocolError);
}

TEST_CASE("tpr_at_fpr agrees exactly with the brute-force oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t ng = 1 + rng.index(100);
    const std::size_t ni = 1 + rng.index(100);
    const bool gridded = trial % 2 == 0;  // force ties on half the instances
    auto draw = [&]() {
      return gridded ? static_cast<double>(rng.index(10)) / 10.0
                     : 2.0 * rng.uniform() - 1.0;
    };
    std::vector<double> genuine(ng), impostor(ni);
    for (double& s : genuine) s = draw();
    for (double& s : impostor) s = draw();
    const std::vector<double> alphas = {0.0, 0.01, 0.1, rng.uniform(), 0.5, 1.0};
    const std::vector<double> got = tpr_at_fpr(genuine, impostor, alphas);
    for (std::size_t i = 0; i < alphas.size(); ++i)
      REQUIRE(got[i] == oracle_tpr(genuine, impostor, alphas[i]));
    // monotone non-decreasing in the target
    std::vector<double> sweep = tpr_at_fpr(genuine, impostor,
                                           {0.0, 0.1, 0.2, 0.5, 0.9, 1.0});
    for (std::size_t i = 1; i < sweep.size(); ++i)
      CHECK(sweep[i] >= sweep[i - 1]);
  }
}

TEST_CASE("open_set_identify handcrafted and randomized") {
  // 3-entry gallery, 4 probes: two known (one rank-1 correct, one not),
  // two unknown
  std::vector<GalleryEntry> gallery = {
      {{1.0, 0.0}, 1}, {{0.0, 1.0}, 2}, {{0.7, 0.7}, 3}};
  std::vector<Probe> probes = {
      {{0.9, 0.1}, 1, true},    // matches id 1
      {{0.1, 0.9}, 3, true},    // best match is id 2, wrong
      {{-1.0, 0.0}, 0, false},
      {{-0.5, -0.5}, 0, false},
  };
  const std::vector<double> alphas = {0.0, 0.5, 1.0};
  const std::vector<double> got = open_set_identify(gallery, probes, alphas);
  for (std::size_t i = 0; i < alphas.size(); ++i)
    CHECK(got[i] == oracle_tpir(gallery, probes, alphas[i]));
  // the wrong-rank-1 probe never counts, so TPIR caps at 1/2
  CHECK(got[2] == 0.5);

  CHECK_THROWS_AS(open_set_identify({}, probes, alphas), ProtocolError);
  std::vector<Probe> only_known = {probes[0]};
  CHECK_THROWS_AS(open_set_identify(gallery, only_known, alphas),
                  ProtocolError);
  std::vector<Probe> only_unknown = {probes[2]};
  CHECK_THROWS_AS(open_set_identify(gallery, only_unknown, alphas),
                  ProtocolError);

  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GalleryEntry> g;
    const std::size_t n_ids = 2 + rng.index(6);
    for (std::size_t i = 0; i < n_ids; ++i)
      g.push_back({random_embedding(rng, 4), static_cast<std::uint32_t>(i)});
    std::vector<Probe> ps;
    for (std::size_t i = 0; i < 20; ++i) {
      const bool known = rng.uniform() < 0.6;
      ps.push_back({random_embedding(rng, 4),
                    static_cast<std::uint32_t>(rng.index(n_ids)), known});
    }
    const bool any_known = std::any_of(ps.begin(), ps.end(),
                                       [](const Probe& p) { return p.known; });
    const bool any_unknown = std::any_of(
        ps.begin(), ps.end(), [](const Probe& p) { return !p.known; });
    if (!any_known || !any_unknown) continue;
    std::vector<double> targets = {0.0, rng.uniform(), 0.5, 1.0};
    std::sort(targets.begin(), targets.end());
    const std::vector<double> res = open_set_identify(g, ps, targets);
    for (std::size_t i = 0; i < targets.size(); ++i)
      REQUIRE(res[i] == oracle_tpir(g, ps, targets[i]));
    for (std::size_t i = 1; i < targets.size(); ++i)
      CHECK(res[i] >= res[i - 1]);  // TPIR monotone in the FPIR target
  }
}

TEST_CASE("rank_k handcrafted and randomized") {
  std::vector<GalleryEntry> gallery = {
      {{1.0, 0.0}, 1}, {{0.0, 1.0}, 2}, {{-1.0, 0.0}, 3}};
  std::vector<Probe> probes = {
      {{0.9, 0.1}, 1, true},
      {{0.1, 0.9}, 3, true},  // correct id ranks last
  };
  std::vector<double> acc = rank_k(gallery, probes, {1, 2, 3});
  CHECK(acc == std::vector<double>{0.5, 0.5, 1.0});

  // tie broken toward the lower gallery index
  std::vector<GalleryEntry> tied = {{{1.0, 0.0}, 7}, {{1.0, 0.0}, 8}};
  std::vector<Probe> tp = {{{1.0, 0.0}, 8, true}};
  CHECK(rank_k(tied, tp, {1})[0] == 0.0);
  CHECK(rank_k(tied, tp, {2})[0] == 1.0);

  std::vector<Probe> stranger = {{{1.0, 0.0}, 99, true}};
  CHECK_THROWS_AS(rank_k(gallery, stranger, {1}), ProtocolError);

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GalleryEntry> g;
    const std::size_t n_ids = 2 + rng.index(8);
    for (std::size_t i = 0; i < n_ids; ++i)
      g.push_back({random_embedding(rng, 3), static_cast<std::uint32_t>(i)});
    std::vector<Probe> ps;
    for (std::size_t i = 0; i < 15; ++i)
      ps.push_back({random_embedding(rng, 3),
                    static_cast<std::uint32_t>(rng.index(n_ids)), true});
    std::vector<std::size_t> ks = {1, 2, n_ids};
    const std::vector<double> res = rank_k(g, ps, ks);
    for (std::size_t i = 0; i < ks.size(); ++i)
      REQUIRE(res[i] == oracle_rank_k(g, ps, ks[i]));
    CHECK(res[0] <= res[1]);
    CHECK(res[1] <= res[2]);
    CHECK(res[2] == 1.0);  // K = gallery size always succeeds closed-set
  }
}

TEST_CASE("embedding_stats matches a double-loop oracle") {
  // 3 classes x 4 samples on a fresh random model
  ModelSpec ms;
  ms.input_dim = 9;
  ms.hidden = {8};
  ms.embedding_dim = 4;
  ms.classes = 3;
  Rng rng(23);
  Model model = Model::init(ms, rng);

  DomainDataset ds;
  ds.side = 3;
  ds.count = 12;
  ds.class_lo = 0;
  ds.class_hi = 3;
  ds.domain = "test";
  for (std::size_t i = 0; i < ds.count; ++i) {
    ds.labels.push_back(static_cast<std::uint32_t>(i / 4));
    for (std::size_t j = 0; j < 9; ++j) ds.samples.push_back(rng.uniform());
  }

  const EmbeddingStats stats = embedding_stats(model, ds);
  CHECK(stats.skipped_classes.empty());

  std::vector<std::vector<double>> z, zm;
  for (std::size_t i = 0; i < ds.count; ++i) {
    std::vector<double> x(ds.sample(i), ds.sample(i) + 9);
    Tensor e = model.embed_inference(Tensor::matrix(1, 9, x));
    z.push_back(e.values);
    Tensor em = model.embed_inference(Tensor::matrix(1, 9, mirror(x, 3)));
    zm.push_back(em.values);
  }
  double mirror_sim = 0, length = 0;
  for (std::size_t i = 0; i < ds.count; ++i) {
    mirror_sim += cosine(z[i], zm[i]);
    double l = 0;
    for (double v : z[i]) l += v * v;
    length += std::sqrt(l);
  }
  double intra = 0, inter = 0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < ds.count; ++i)
    for (std::size_t j = i + 1; j < ds.count; ++j) {
      if (ds.labels[i] == ds.labels[j]) {
        intra += cosine(z[i], z[j]);
        ++n_intra;
      } else {
        inter += cosine(z[i], z[j]);
        ++n_inter;
      }
    }
  CHECK(stats.mirror_similarity ==
        doctest::Approx(mirror_sim / 12.0).epsilon(1e-12));
  CHECK(stats.mean_length == doctest::Approx(length / 12.0).epsilon(1e-12));
  CHECK(stats.intra_class_similarity ==
        doctest::Approx(intra / static_cast<double>(n_intra)).epsilon(1e-12));
  CHECK(stats.inter_class_similarity ==
        doctest::Approx(inter / static_cast<double>(n_inter)).epsilon(1e-12));

  // doubling every embedding (exact in binary) leaves the similarities
  // bitwise unchanged and doubles the mean length exactly
  for (std::size_t p = 0; p < model.store.size(); ++p) {
    const std::string& name = model.store.name(static_cast<int>(p));
    if (name.rfind("f.out", 0) == 0)
      for (double& v : model.store.value(static_cast<int>(p)).values) v *= 2.0;
  }
  const EmbeddingStats scaled = embedding_stats(model, ds);
  CHECK(scaled.mirror_similarity == stats.mirror_similarity);
  CHECK(scaled.intra_class_similarity == stats.intra_class_similarity);
  CHECK(scaled.inter_class_similarity == stats.inter_class_similarity);
  CHECK(scaled.mean_length == 2.0 * stats.mean_length);

  // single-sample class is reported as skipped
  DomainDataset skinny = ds;
  skinny.labels.back() = 3;
  skinny.class_hi = 4;
  const EmbeddingStats s2 = embedding_stats(model, skinny);
  CHECK(s2.skipped_classes == std::vector<std::uint32_t>{3});
}

TEST_CASE("evaluate produces a coherent report") {
  SyntheticSpec dspec;
  dspec.side = 6;
  dspec.classes_source = 6;
  dspec.classes_target = 2;
  dspec.samples_per_class = 5;
  dspec.seed = 5;
  GeneratedData data = generate(dspec);

  ModelSpec ms;
  ms.input_dim = dspec.input_dim();
  ms.hidden = {12};
  ms.embedding_dim = 6;
  ms.classes = 8;
  Rng rng(3);
  Model model = Model::init(ms, rng);

  EvalConfig cfg;
  cfg.fpr_targets = {1e-3, 1e-2, 1e-1, 1.0};
  EvalReport report = evaluate(model, data.source, cfg);

  CHECK(report.genuine_pairs == 6 * 10);
  CHECK(report.impostor_pairs == (30 * 29) / 2 - 60);
  for (std::size_t i = 1; i < report.verification.size(); ++i)
    CHECK(report.verification[i].second >= report.verification[i - 1].second);
  CHECK(report.verification.back().second == 1.0);  // alpha = 1
  for (std::size_t i = 1; i < report.closed_set.size(); ++i)
    CHECK(report.closed_set[i].second >= report.closed_set[i - 1].second);
  for (const auto& [fpr, tpr] : report.roc) {
    CHECK(fpr >= 0.0);
    CHECK(fpr <= 1.0);
    CHECK(tpr >= 0.0);
    CHECK(tpr <= 1.0);
  }

  CHECK(tpr_at(report, 1e-2) == report.verification[1].second);
  CHECK_THROWS_AS(tpr_at(report, 0.123), ProtocolError);

  CHECK(lowest_measurable_fpr(cfg.fpr_targets, report.impostor_pairs) ==
        doctest::Approx(1e-2).epsilon(1e-15));
  CHECK_THROWS_AS(lowest_measurable_fpr({1e-6}, 100), ProtocolError);

  CHECK_THROWS_AS(evaluate(model, data.target, cfg), ProtocolError);
}

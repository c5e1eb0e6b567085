#include "ssa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>

namespace ssa {

double score(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw DimensionError("score: embedding widths " +
                         std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw DegenerateInputError("score: zero embedding");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// Smallest admissible threshold: candidates are -inf, every impostor-side
// score, and a value just above the maximum; picks the smallest whose
// acceptance rate over `impostor` is <= alpha.
double threshold_at_rate(std::vector<double> impostor, double alpha) {
  std::sort(impostor.begin(), impostor.end());
  const double n = static_cast<double>(impostor.size());
  if (1.0 <= alpha) return -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < impostor.size(); ++i) {
    if (i > 0 && impostor[i] == impostor[i - 1]) continue;
    const double accepted = n - static_cast<double>(i);
    if (accepted / n <= alpha) return impostor[i];
  }
  return std::nextafter(impostor.back(),
                        std::numeric_limits<double>::infinity());
}

double fraction_at_least(const std::vector<double>& scores, double t) {
  std::size_t c = 0;
  for (double s : scores)
    if (s >= t) ++c;
  return static_cast<double>(c) / static_cast<double>(scores.size());
}

}  // namespace

std::vector<double> tpr_at_fpr(const std::vector<double>& genuine,
                               const std::vector<double>& impostor,
                               const std::vector<double>& fpr_targets) {
  if (genuine.empty() || impostor.empty())
    throw ProtocolError("tpr_at_fpr needs nonempty genuine and impostor sets");
  std::vector<double> out;
  out.reserve(fpr_targets.size());
  for (double alpha : fpr_targets)
    out.push_back(fraction_at_least(genuine, threshold_at_rate(impostor, alpha)));
  return out;
}

namespace {

struct BestMatch {
  double score;
  std::uint32_t id;
};

BestMatch best_match(const std::vector<GalleryEntry>& gallery,
                     const std::vector<double>& probe) {
  BestMatch best{-std::numeric_limits<double>::infinity(), 0};
  for (const GalleryEntry& g : gallery) {
    const double s = score(g.embedding, probe);
    if (s > best.score) best = {s, g.id};  // ties keep the lower index
  }
  return best;
}

}  // namespace

std::vector<double> open_set_identify(const std::vector<GalleryEntry>& gallery,
                                      const std::vector<Probe>& probes,
                                      const std::vector<double>& fpir_targets) {
  if (gallery.empty()) throw ProtocolError("open_set_identify: empty gallery");
  std::vector<double> unknown_best;
  std::vector<std::pair<double, bool>> known;  // (best score, rank-1 correct)
  for (const Probe& p : probes) {
    const BestMatch m = best_match(gallery, p.embedding);
    if (p.known)
      known.emplace_back(m.score, m.id == p.id);
    else
      unknown_best.push_back(m.score);
  }
  if (unknown_best.empty())
    throw ProtocolError("open_set_identify: no unknown probes, FPIR undefined");
  if (known.empty())
    throw ProtocolError("open_set_identify: no known probes");

  std::vector<double> out;
  out.reserve(fpir_targets.size());
  for (double alpha : fpir_targets) {
    const double t = threshold_at_rate(unknown_best, alpha);
    std::size_t hits = 0;
    for (const auto& [s, correct] : known)
      if (s >= t && correct) ++hits;
    out.push_back(static_cast<double>(hits) /
                  static_cast<double>(known.size()));
  }
  return out;
}

std::vector<double> rank_k(const std::vector<GalleryEntry>& gallery,
                           const std::vector<Probe>& probes,
                           const std::vector<std::size_t>& ks) {
  if (gallery.empty() || probes.empty())
    throw ProtocolError("rank_k: empty gallery or probe set");
  std::vector<std::size_t> correct(ks.size(), 0);
  for (const Probe& p : probes) {
    bool in_gallery = false;
    for (const GalleryEntry& g : gallery) in_gallery |= (g.id == p.id);
    if (!in_gallery)
      throw ProtocolError("rank_k: probe identity " + std::to_string(p.id) +
                          " absent from gallery (closed set required)");
    std::vector<std::pair<double, std::size_t>> ranked;  // (score, index)
    ranked.reserve(gallery.size());
    for (std::size_t i = 0; i < gallery.size(); ++i)
      ranked.emplace_back(score(gallery[i].embedding, p.embedding), i);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;  // ties: lower gallery index first
    });
    std::size_t first_correct = gallery.size();
    for (std::size_t r = 0; r < ranked.size(); ++r)
      if (gallery[ranked[r].second].id == p.id) {
        first_correct = r;
        break;
      }
    for (std::size_t ki = 0; ki < ks.size(); ++ki)
      if (first_correct < ks[ki]) ++correct[ki];
  }
  std::vector<double> out(ks.size());
  for (std::size_t ki = 0; ki < ks.size(); ++ki)
    out[ki] = static_cast<double>(correct[ki]) /
              static_cast<double>(probes.size());
  return out;
}

namespace {

std::vector<std::vector<double>> embed_rows(Model& model, const Tensor& x) {
  Tensor z = model.embed_inference(x);
  std::vector<std::vector<double>> rows(z.rows());
  for (std::size_t i = 0; i < z.rows(); ++i)
    rows[i].assign(z.values.begin() + i * z.cols(),
                   z.values.begin() + (i + 1) * z.cols());
  return rows;
}

}  // namespace

EmbeddingStats embedding_stats(Model& model, const DomainDataset& dataset) {
  if (!dataset.labeled())
    throw ContractError("embedding_stats needs a labeled dataset");
  const std::size_t n = dataset.count;

  std::vector<double> mirrored = dataset.samples;
  mirror_rows_inplace(mirrored, n, dataset.side);
  const auto z = embed_rows(model, dataset.all_tensor());
  const auto zm = embed_rows(
      model, Tensor::matrix(n, dataset.dim(), std::move(mirrored)));

  EmbeddingStats stats;
  for (std::size_t i = 0; i < n; ++i) {
    stats.mirror_similarity += score(z[i], zm[i]);
    double len = 0.0;
    for (double v : z[i]) len += v * v;
    stats.mean_length += std::sqrt(len);
  }
  stats.mirror_similarity /= static_cast<double>(n);
  stats.mean_length /= static_cast<double>(n);

  std::map<std::uint32_t, std::size_t> class_counts;
  for (std::size_t i = 0; i < n; ++i) ++class_counts[dataset.labels[i]];
  for (const auto& [cls, cnt] : class_counts)
    if (cnt < 2) stats.skipped_classes.push_back(cls);

  double intra = 0.0, inter = 0.0;
  std::size_t n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = score(z[i], z[j]);
      if (dataset.labels[i] == dataset.labels[j]) {
        intra += s;
        ++n_intra;
      } else {
        inter += s;
        ++n_inter;
      }
    }
  stats.intra_class_similarity = n_intra ? intra / static_cast<double>(n_intra) : 0.0;
  stats.inter_class_similarity = n_inter ? inter / static_cast<double>(n_inter) : 0.0;
  return stats;
}

EvalReport evaluate(Model& model, const DomainDataset& dataset,
                    const EvalConfig& config) {
  if (!dataset.labeled())
    throw ProtocolError("evaluate needs a labeled dataset");
  if (dataset.count < 2) throw ProtocolError("evaluate: empty protocol");
  if (dataset.dim() != model.spec.input_dim)
    throw DimensionError("checkpoint expects input-dim " +
                         std::to_string(model.spec.input_dim) +
                         ", dataset has " + std::to_string(dataset.dim()));

  EvalReport report;
  const auto z = embed_rows(model, dataset.all_tensor());
  const std::size_t n = dataset.count;

  // Verification: exhaustive pairs.
  std::vector<double> genuine, impostor;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = score(z[i], z[j]);
      if (dataset.labels[i] == dataset.labels[j])
        genuine.push_back(s);
      else
        impostor.push_back(s);
    }
  if (genuine.empty() || impostor.empty())
    throw ProtocolError("verification protocol needs both pair kinds");
  report.genuine_pairs = genuine.size();
  report.impostor_pairs = impostor.size();
  const std::vector<double> tprs =
      tpr_at_fpr(genuine, impostor, config.fpr_targets);
  for (std::size_t i = 0; i < config.fpr_targets.size(); ++i)
    report.verification.emplace_back(config.fpr_targets[i], tprs[i]);

  // Full ROC sweep for plot data.
  {
    std::vector<double> thresholds = impostor;
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                     thresholds.end());
    for (double t : thresholds)
      report.roc.emplace_back(fraction_at_least(impostor, t),
                              fraction_at_least(genuine, t));
    std::reverse(report.roc.begin(), report.roc.end());
  }

  // Identification split: classes sorted ascending; the first
  // known_fraction of them are enrolled. Gallery = first sample per
  // enrolled class, known probes = their remaining samples, unknown
  // probes = all samples of non-enrolled classes.
  std::map<std::uint32_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);
  const std::size_t n_classes = by_class.size();
  std::size_t n_known = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(
             config.known_fraction * static_cast<double>(n_classes))));
  if (n_known >= n_classes) n_known = n_classes - 1;

  std::vector<GalleryEntry> gallery;
  std::vector<Probe> probes;
  std::vector<Probe> closed_probes;
  std::size_t class_index = 0;
  for (const auto& [cls, members] : by_class) {
    const bool enrolled = class_index++ < n_known;
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (enrolled && i == 0) {
        gallery.push_back({z[members[i]], cls});
      } else {
        Probe p{z[members[i]], cls, enrolled};
        probes.push_back(p);
        if (enrolled) closed_probes.push_back(p);
      }
    }
  }

  const std::vector<double> tpirs =
      open_set_identify(gallery, probes, config.fpir_targets);
  for (std::size_t i = 0; i < config.fpir_targets.size(); ++i)
    report.open_set.emplace_back(config.fpir_targets[i], tpirs[i]);

  std::vector<std::size_t> ks = config.rank_ks;
  for (std::size_t& k : ks) k = std::min(k, gallery.size());
  const std::vector<double> ranks = rank_k(gallery, closed_probes, ks);
  for (std::size_t i = 0; i < ks.size(); ++i)
    report.closed_set.emplace_back(ks[i], ranks[i]);

  report.stats = embedding_stats(model, dataset);
  return report;
}

double lowest_measurable_fpr(const std::vector<double>& fpr_targets,
                             std::size_t impostor_pairs) {
  double best = -1.0;
  for (double a : fpr_targets)
    if (a * static_cast<double>(impostor_pairs) >= 1.0 &&
        (best < 0.0 || a < best))
      best = a;
  if (best < 0.0)
    throw ProtocolError("no requested FPR is measurable with " +
                        std::to_string(impostor_pairs) + " impostor pairs");
  return best;
}

double tpr_at(const EvalReport& report, double fpr_target) {
  for (const auto& [fpr, tpr] : report.verification)
    if (fpr == fpr_target) return tpr;
  throw ProtocolError("report has no TPR entry for requested FPR");
}

void write_report(const EvalReport& report, std::ostream& os) {
  os << "[verification]\n";
  os << "genuine_pairs: " << report.genuine_pairs << "\n";
  os << "impostor_pairs: " << report.impostor_pairs << "\n";
  char buf[96];
  for (const auto& [fpr, tpr] : report.verification) {
    std::snprintf(buf, sizeof buf, "tpr@fpr=%g: %.6f", fpr, tpr);
    os << buf << "\n";
  }
  os << "\n[open_set_identification]\n";
  for (const auto& [fpir, tpir] : report.open_set) {
    std::snprintf(buf, sizeof buf, "tpir@fpir=%g: %.6f", fpir, tpir);
    os << buf << "\n";
  }
  os << "\n[closed_set_identification]\n";
  for (const auto& [k, acc] : report.closed_set) {
    std::snprintf(buf, sizeof buf, "rank%zu: %.6f", k, acc);
    os << buf << "\n";
  }
  os << "\n[embedding_statistics]\n";
  std::snprintf(buf, sizeof buf, "mirror_similarity: %.6f",
                report.stats.mirror_similarity);
  os << buf << "\n";
  std::snprintf(buf, sizeof buf, "intra_class_similarity: %.6f",
                report.stats.intra_class_similarity);
  os << buf << "\n";
  std::snprintf(buf, sizeof buf, "inter_class_similarity: %.6f",
                report.stats.inter_class_similarity);
  os << buf << "\n";
  std::snprintf(buf, sizeof buf, "mean_embedding_length: %.6f",
                report.stats.mean_length);
  os << buf << "\n";
  os << "skipped_classes:";
  for (std::uint32_t c : report.stats.skipped_classes) os << " " << c;
  os << "\n";
}

void write_report_file(const EvalReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open report for writing: " + path, 0);
  write_report(report, os);
}

void write_roc_csv(const EvalReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open roc csv for writing: " + path, 0);
  os << "fpr,tpr\n";
  char buf[96];
  for (const auto& [fpr, tpr] : report.roc) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", fpr, tpr);
    os << buf << "\n";
  }
}

void export_embeddings_csv(Model& model, const DomainDataset& dataset,
                           const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open embeddings csv: " + path, 0);
  const auto z = embed_rows(model, dataset.all_tensor());
  char buf[64];
  for (std::size_t i = 0; i < z.size(); ++i) {
    const long id = dataset.labeled() ? static_cast<long>(dataset.labels[i]) : -1;
    os << id;
    for (double v : z[i]) {
      std::snprintf(buf, sizeof buf, ",%.17g", v);
      os << buf;
    }
    os << "\n";
  }
}

double classification_accuracy(Model& model, const DomainDataset& dataset) {
  if (!dataset.labeled())
    throw ContractError("classification_accuracy needs labels");
  Graph g;
  BoundParams bound = model.bind(g);
  Tensor z = model.f.forward(g, bound, g.constant(dataset.all_tensor()),
                             /*training=*/false);
  Tensor probs =
      model.classifier.forward(g, bound, z, nullptr, /*training=*/false);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < probs.cols(); ++j)
      if (probs.at(i, j) > probs.at(i, arg)) arg = j;
    if (arg == dataset.labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(dataset.count);
}

}  // namespace ssa

#ifndef SSA_EVAL_HPP_
#define SSA_EVAL_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ssa/data.hpp"
#include "ssa/model.hpp"

namespace ssa {

// Cosine similarity in [-1, 1]; DegenerateInputError on a zero embedding.
double score(const std::vector<double>& a, const std::vector<double>& b);

// Verification: for each target FPR alpha, the threshold is the smallest
// admissible candidate (candidates: -inf, every impostor score, just above
// the maximum) whose impostor-acceptance rate is <= alpha; reported TPR is
// the fraction of genuine scores >= that threshold.
std::vector<double> tpr_at_fpr(const std::vector<double>& genuine,
                               const std::vector<double>& impostor,
                               const std::vector<double>& fpr_targets);

struct GalleryEntry {
  std::vector<double> embedding;
  std::uint32_t id = 0;
};

struct Probe {
  std::vector<double> embedding;
  std::uint32_t id = 0;   // meaningful when known
  bool known = false;     // false: identity absent from the gallery
};

// Open-set identification. FPIR(t) = fraction of unknown probes whose best
// gallery score >= t; TPIR(t) = fraction of known probes whose best score
// >= t and whose best-matching gallery id is correct. Thresholds picked by
// the same smallest-admissible rule as tpr_at_fpr.
std::vector<double> open_set_identify(const std::vector<GalleryEntry>& gallery,
                                      const std::vector<Probe>& probes,
                                      const std::vector<double>& fpir_targets);

// Closed-set Rank-K accuracy; gallery score ties broken by lower index.
// ProtocolError when a probe identity is absent from the gallery.
std::vector<double> rank_k(const std::vector<GalleryEntry>& gallery,
                           const std::vector<Probe>& probes,
                           const std::vector<std::size_t>& ks);

struct EmbeddingStats {
  double mirror_similarity = 0.0;
  double intra_class_similarity = 0.0;
  double inter_class_similarity = 0.0;
  double mean_length = 0.0;
  std::vector<std::uint32_t> skipped_classes;  // classes with < 2 samples
};

// Table-2 style statistics over a labeled dataset, inference mode,
// exhaustive pair enumeration.
EmbeddingStats embedding_stats(Model& model, const DomainDataset& dataset);

struct EvalConfig {
  std::vector<double> fpr_targets = {1e-4, 1e-3, 1e-2, 1e-1};
  std::vector<double> fpir_targets = {1e-2, 1e-1};
  std::vector<std::size_t> rank_ks = {1, 5, 10};
  double known_fraction = 0.5;  // share of classes enrolled in the gallery
};

struct EvalReport {
  std::vector<std::pair<double, double>> verification;  // (fpr, tpr)
  std::vector<std::pair<double, double>> open_set;      // (fpir, tpir)
  std::vector<std::pair<std::size_t, double>> closed_set;  // (K, accuracy)
  EmbeddingStats stats;
  std::vector<std::pair<double, double>> roc;  // full (fpr, tpr) sweep
  std::size_t genuine_pairs = 0, impostor_pairs = 0;
};

// Full protocol run on a labeled dataset: exhaustive verification pairs,
// a deterministic open/closed identification split, plus embedding stats.
EvalReport evaluate(Model& model, const DomainDataset& dataset,
                    const EvalConfig& config);

// The smallest requested FPR whose impostor count can resolve it
// (alpha * impostor_pairs >= 1).
double lowest_measurable_fpr(const std::vector<double>& fpr_targets,
                             std::size_t impostor_pairs);
double tpr_at(const EvalReport& report, double fpr_target);

void write_report(const EvalReport& report, std::ostream& os);
void write_report_file(const EvalReport& report, const std::string& path);
void write_roc_csv(const EvalReport& report, const std::string& path);

// id, then d embedding values with 17 significant digits per row.
void export_embeddings_csv(Model& model, const DomainDataset& dataset,
                           const std::string& path);

// Mean argmax-classification accuracy of the classifier head (labels must
// lie inside the head's class range).
double classification_accuracy(Model& model, const DomainDataset& dataset);

}  // namespace ssa

#endif  // SSA_EVAL_HPP_

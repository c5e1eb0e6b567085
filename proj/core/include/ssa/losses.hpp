#ifndef SSA_LOSSES_HPP_
#define SSA_LOSSES_HPP_

#include <vector>

#include "ssa/model.hpp"
#include "ssa/tensor.hpp"

namespace ssa {

struct LossConfig {
  double gamma = 2.0;  // focal exponent
  double rho = 0.6;    // adapting ratio in [0, 1]
  ClassifierMode classifier_mode = ClassifierMode::kSoftmax;

  void validate() const;
};

// Mean over the batch of -(1 - p_y)^gamma * log(p_y), p_y the true-class
// probability. p_y is clamped to 1e-12 before the log. gamma = 0 gives
// plain cross-entropy.
Tensor focal_ce(Graph& g, const Tensor& probs,
                const std::vector<std::size_t>& labels, double gamma);

// Mean over rows of -cos(p_i, z_i). DegenerateInputError on a zero row.
Tensor neg_cosine(Graph& g, const Tensor& p, const Tensor& z);

// Symmetric stop-gradient self-similarity loss on a batch and its mirrored
// twin: 1/2 [D(h(z'), sg(z)) + D(h(z), sg(z'))] with z = f(x), z' = f(x').
// With diag_stop_both the head branches are replaced by stopped embeddings,
// which makes the parameter gradient identically zero (test diagnostic).
Tensor simsiam_loss(Graph& g, Model& model, const BoundParams& bound,
                    const Tensor& x, const Tensor& x_mirror, bool training,
                    bool diag_stop_both = false);

// (1 - rho) * L_s(source) + rho * L_s(target).
Tensor adapting_loss(Graph& g, Model& model, const BoundParams& bound,
                     const Tensor& xs, const Tensor& xs_mirror,
                     const Tensor& xt, const Tensor& xt_mirror, double rho,
                     bool training);

struct TotalLossParts {
  Tensor total;       // L = L_c + L_a
  Tensor classifier;  // L_c on the labeled source batch
  Tensor simsiam_source;
  Tensor simsiam_target;
};

// L = L_c + L_a, evaluated in one graph so a single backward covers
// everything. The source embeddings are computed once and shared between
// the classifier and the source self-similarity branch.
TotalLossParts total_loss(Graph& g, Model& model, const BoundParams& bound,
                          const Tensor& xs, const Tensor& xs_mirror,
                          const std::vector<std::size_t>& source_labels,
                          const Tensor& xt, const Tensor& xt_mirror,
                          const LossConfig& config, bool training);

}  // namespace ssa

#endif  // SSA_LOSSES_HPP_

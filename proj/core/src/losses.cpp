#include "ssa/losses.hpp"

#include <cmath>
#include <string>

namespace ssa {

void LossConfig::validate() const {
  if (rho < 0.0 || rho > 1.0)
    throw ConfigError("loss.rho must be in [0, 1], got " + std::to_string(rho));
  if (gamma < 0.0)
    throw ConfigError("loss.gamma must be >= 0, got " + std::to_string(gamma));
}

Tensor focal_ce(Graph& g, const Tensor& probs,
                const std::vector<std::size_t>& labels, double gamma) {
  const std::size_t b = probs.rows(), c = probs.cols();
  if (labels.size() != b)
    throw ContractError("focal_ce: " + std::to_string(labels.size()) +
                        " labels for batch of " + std::to_string(b));
  for (std::size_t i = 0; i < b; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < c; ++j) row += probs.at(i, j);
    if (std::abs(row - 1.0) > 1e-6)
      throw ContractError("focal_ce: probability row " + std::to_string(i) +
                          " sums to " + std::to_string(row));
    if (labels[i] >= c)
      throw ContractError("focal_ce: label " + std::to_string(labels[i]) +
                          " out of range for " + std::to_string(c) +
                          " classes");
  }
  Tensor py = g.gather_cols(probs, labels);
  Tensor pc = g.clamp(py, 1e-12, 1.0);
  Tensor weight = g.pow_scalar(g.add_scalar(g.neg(pc), 1.0), gamma);
  return g.mean(g.mul(weight, g.neg(g.log(pc))));
}

Tensor neg_cosine(Graph& g, const Tensor& p, const Tensor& z) {
  if (p.shape != z.shape || p.shape.size() != 2)
    throw DimensionError("neg_cosine shapes " + shape_str(p.shape) + " vs " +
                         shape_str(z.shape));
  const std::size_t b = p.rows(), d = p.cols();
  for (std::size_t i = 0; i < b; ++i) {
    double np = 0.0, nz = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      np += p.at(i, j) * p.at(i, j);
      nz += z.at(i, j) * z.at(i, j);
    }
    if (np == 0.0 || nz == 0.0)
      throw DegenerateInputError("neg_cosine: zero row " + std::to_string(i));
  }
  Tensor dots = g.row_sum(g.mul(p, z));
  Tensor norm_p = g.sqrt(g.row_sum(g.mul(p, p)));
  Tensor norm_z = g.sqrt(g.row_sum(g.mul(z, z)));
  Tensor cosine = g.div(dots, g.mul(norm_p, norm_z));
  return g.mean(g.neg(cosine));
}

namespace {

Tensor simsiam_from_embeddings(Graph& g, Model& model,
                               const BoundParams& bound, const Tensor& z,
                               const Tensor& z_mirror, bool training,
                               bool diag_stop_both) {
  if (!model.head)
    throw ContractError("simsiam_loss requires the model's SimSiam head");
  Tensor z_stop = g.stop_gradient(z);
  Tensor zm_stop = g.stop_gradient(z_mirror);
  Tensor branch_a, branch_b;
  if (diag_stop_both) {
    branch_a = zm_stop;
    branch_b = z_stop;
  } else {
    branch_a = model.head->forward(g, bound, z_mirror, training);
    branch_b = model.head->forward(g, bound, z, training);
  }
  Tensor half_a = neg_cosine(g, branch_a, z_stop);
  Tensor half_b = neg_cosine(g, branch_b, zm_stop);
  return g.mul_scalar(g.add(half_a, half_b), 0.5);
}

}  // namespace

Tensor simsiam_loss(Graph& g, Model& model, const BoundParams& bound,
                    const Tensor& x, const Tensor& x_mirror, bool training,
                    bool diag_stop_both) {
  Tensor z = model.f.forward(g, bound, x, training);
  Tensor zm = model.f.forward(g, bound, x_mirror, training);
  return simsiam_from_embeddings(g, model, bound, z, zm, training,
                                 diag_stop_both);
}

Tensor adapting_loss(Graph& g, Model& model, const BoundParams& bound,
                     const Tensor& xs, const Tensor& xs_mirror,
                     const Tensor& xt, const Tensor& xt_mirror, double rho,
                     bool training) {
  if (rho < 0.0 || rho > 1.0)
    throw ConfigError("adapting ratio must be in [0, 1], got " +
                      std::to_string(rho));
  if (xs.rows() == 0 || xt.rows() == 0)
    throw ContractError("adapting_loss needs nonempty source and target");
  Tensor ls_source = simsiam_loss(g, model, bound, xs, xs_mirror, training);
  Tensor ls_target = simsiam_loss(g, model, bound, xt, xt_mirror, training);
  return g.add(g.mul_scalar(ls_source, 1.0 - rho),
               g.mul_scalar(ls_target, rho));
}

TotalLossParts total_loss(Graph& g, Model& model, const BoundParams& bound,
                          const Tensor& xs, const Tensor& xs_mirror,
                          const std::vector<std::size_t>& source_labels,
                          const Tensor& xt, const Tensor& xt_mirror,
                          const LossConfig& config, bool training) {
  config.validate();
  TotalLossParts parts;

  Tensor zs = model.f.forward(g, bound, xs, training);
  Tensor probs =
      model.classifier.forward(g, bound, zs, &source_labels, training);
  parts.classifier = focal_ce(g, probs, source_labels, config.gamma);

  Tensor zs_mirror = model.f.forward(g, bound, xs_mirror, training);
  parts.simsiam_source = simsiam_from_embeddings(g, model, bound, zs,
                                                 zs_mirror, training, false);
  Tensor zt = model.f.forward(g, bound, xt, training);
  Tensor zt_mirror = model.f.forward(g, bound, xt_mirror, training);
  parts.simsiam_target = simsiam_from_embeddings(g, model, bound, zt,
                                                 zt_mirror, training, false);

  Tensor adapting =
      g.add(g.mul_scalar(parts.simsiam_source, 1.0 - config.rho),
            g.mul_scalar(parts.simsiam_target, config.rho));
  parts.total = g.add(parts.classifier, adapting);
  return parts;
}

}  // namespace ssa

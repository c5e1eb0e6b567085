#include "ssa/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>

namespace ssa {

void TrainConfig::validate() const {
  if (base_lr <= 0.0) throw ConfigError("train.lr must be > 0");
  if (decay_divisor <= 1.0)
    throw ConfigError("train.decay_divisor must be > 1");
  if (decay_interval == 0)
    throw ConfigError("train.decay_interval must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0)
    throw ConfigError("train.momentum must be in [0, 1)");
  if (batch_source == 0) throw ConfigError("train.batch_source must be >= 1");
  loss.validate();
}

double lr_at(std::size_t epoch, double base_lr, std::size_t decay_interval,
             double decay_divisor) {
  return base_lr / std::pow(decay_divisor,
                            static_cast<double>(epoch / decay_interval));
}

double lr_at(std::size_t epoch, const TrainConfig& config) {
  return lr_at(epoch, config.base_lr, config.decay_interval,
               config.decay_divisor);
}

void TrainLog::write(std::ostream& os) const {
  for (const StepRecord& s : steps) {
    os << "step=" << s.step << " epoch=" << s.epoch << " lr=" << s.lr
       << " loss_c=" << s.loss_c << " loss_s_src=" << s.loss_s_source
       << " loss_s_tgt=" << s.loss_s_target << " loss=" << s.loss_total
       << " wall_ms=" << s.wall_ms << "\n";
  }
}

void TrainLog::write_file(const std::string& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open train log for writing: " + path, 0);
  write(os);
}

SgdOptimizer::SgdOptimizer(double momentum, const ParamStore& store)
    : momentum_(momentum) {
  resize(store);
}

void SgdOptimizer::resize(const ParamStore& store) {
  const std::size_t old = velocity_.size();
  velocity_.resize(store.size());
  for (std::size_t i = old; i < store.size(); ++i)
    velocity_[i].assign(store.value(static_cast<int>(i)).size(), 0.0);
}

void SgdOptimizer::step(ParamStore& store, const BoundParams& bound,
                        const GradientMap& grads, double lr,
                        std::size_t step_index) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto it = grads.find(bound[i].node);
    if (it == grads.end())
      throw ContractError("gradient map misses parameter " +
                          store.name(static_cast<int>(i)));
    const std::vector<double>& g = it->second.values;
    std::vector<double>& v = velocity_[i];
    std::vector<double>& p = store.value(static_cast<int>(i)).values;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (!std::isfinite(g[j]))
        throw NumericalError("non-finite gradient in parameter " +
                             store.name(static_cast<int>(i)) + " at step " +
                             std::to_string(step_index));
      v[j] = momentum_ * v[j] + g[j];
      p[j] -= lr * v[j];
    }
  }
}

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

Model train_baseline(const DomainDataset& source, const ModelSpec& model_spec,
                     const TrainConfig& config, TrainLog* log) {
  config.validate();
  if (!source.labeled())
    throw ContractError("train_baseline needs a labeled source dataset");

  Rng rng(config.seed);
  Model model = Model::init(model_spec, rng);
  SgdOptimizer opt(config.momentum, model.store);

  DomainDataset no_target;
  no_target.side = source.side;

  const std::size_t steps_per_epoch =
      batches_per_epoch(source.count, config.batch_source);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const double t0 = now_ms();
      Batch batch =
          next_batch(source, no_target, config.batch_source, 0, rng);
      Tensor x = batch.source;
      if (config.mirror_in_baseline) {
        // Augmentation variant: each sample swapped for its mirror with
        // probability 1/2.
        for (std::size_t i = 0; i < x.rows(); ++i)
          if (rng.uniform() < 0.5)
            std::copy(batch.source_mirror.values.begin() + i * x.cols(),
                      batch.source_mirror.values.begin() + (i + 1) * x.cols(),
                      x.values.begin() + i * x.cols());
      }

      Graph g;
      BoundParams bound = model.bind(g);
      Tensor z = model.f.forward(g, bound, x, /*training=*/true);
      Tensor probs = model.classifier.forward(g, bound, z, &batch.labels,
                                              /*training=*/true);
      Tensor loss = focal_ce(g, probs, batch.labels, config.loss.gamma);
      if (!std::isfinite(loss.item()))
        throw NumericalError("baseline loss diverged at step " +
                             std::to_string(step));
      GradientMap grads = g.backward(loss);
      opt.step(model.store, bound, grads, lr, step);

      if (log)
        log->steps.push_back({step, epoch, lr, loss.item(), 0.0, 0.0,
                              loss.item(), now_ms() - t0});
    }
  }
  return model;
}

void adapt_ssa(Model& model, const DomainDataset& source,
               const DomainDataset& target, const TrainConfig& config,
               TrainLog* log) {
  config.validate();
  if (config.epochs == 0) return;
  if (config.batch_target == 0)
    throw ConfigError("adapt stage needs train.batch_target >= 1");
  if (target.count == 0) throw ContractError("adapt_ssa needs target samples");

  Rng rng(config.seed);
  model.add_simsiam_head(rng);
  SgdOptimizer opt(config.momentum, model.store);

  // One adaptation epoch is counted on the target-set size.
  const std::size_t steps_per_epoch =
      batches_per_epoch(target.count, config.batch_target);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at(epoch, config);
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const double t0 = now_ms();
      Batch batch = next_batch(source, target, config.batch_source,
                               config.batch_target, rng);
      Graph g;
      BoundParams bound = model.bind(g);
      TotalLossParts parts = total_loss(
          g, model, bound, batch.source, batch.source_mirror,
          batch.labels, batch.target, batch.target_mirror,
          config.loss, /*training=*/true);
      if (!std::isfinite(parts.total.item()))
        throw NumericalError("adaptation loss diverged at step " +
                             std::to_string(step));
      GradientMap grads = g.backward(parts.total);
      opt.step(model.store, bound, grads, lr, step);

      if (log)
        log->steps.push_back({step, epoch, lr, parts.classifier.item(),
                              parts.simsiam_source.item(),
                              parts.simsiam_target.item(), parts.total.item(),
                              now_ms() - t0});
    }
  }
}

}  // namespace ssa

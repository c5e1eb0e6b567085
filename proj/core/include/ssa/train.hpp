#ifndef SSA_TRAIN_HPP_
#define SSA_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ssa/data.hpp"
#include "ssa/losses.hpp"
#include "ssa/model.hpp"

namespace ssa {

enum class TrainStage { kBaseline, kAdapt };

struct TrainConfig {
  TrainStage stage = TrainStage::kBaseline;
  std::size_t epochs = 50;
  double base_lr = 0.1;  // adapt stage: 0.0001
  double decay_divisor = 10.0;
  std::size_t decay_interval = 12;  // epochs
  double momentum = 0.9;
  std::size_t batch_source = 32;
  std::size_t batch_target = 32;
  LossConfig loss;
  std::uint64_t seed = 1;
  bool mirror_in_baseline = false;

  void validate() const;
};

// base_lr / divisor^floor(epoch / interval)
double lr_at(std::size_t epoch, double base_lr, std::size_t decay_interval,
             double decay_divisor);
double lr_at(std::size_t epoch, const TrainConfig& config);

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_c = 0.0;
  double loss_s_source = 0.0;
  double loss_s_target = 0.0;
  double loss_total = 0.0;
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  void write(std::ostream& os) const;  // one key=value record per step
  void write_file(const std::string& path) const;
};

// SGD with momentum: v <- momentum * v + g; p <- p - lr * v.
// NumericalError naming the step index on any non-finite gradient.
class SgdOptimizer {
 public:
  SgdOptimizer(double momentum, const ParamStore& store);
  void step(ParamStore& store, const BoundParams& bound,
            const GradientMap& grads, double lr, std::size_t step_index);
  void resize(const ParamStore& store);  // extend state for new params

 private:
  double momentum_;
  std::vector<std::vector<double>> velocity_;
};

// Pretraining: focal cross-entropy only, on the labeled source set.
Model train_baseline(const DomainDataset& source, const ModelSpec& model_spec,
                     const TrainConfig& config, TrainLog* log);

// SSA adaptation: optimizes L = L_c + L_a starting from a baseline model.
// Epochs are counted on the target-set size. A fresh SimSiam head is
// initialized at the start. Zero epochs leave the model untouched.
void adapt_ssa(Model& model, const DomainDataset& source,
               const DomainDataset& target, const TrainConfig& config,
               TrainLog* log);

}  // namespace ssa

#endif  // SSA_TRAIN_HPP_

#ifndef SSA_MODEL_HPP_
#define SSA_MODEL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssa/rng.hpp"
#include "ssa/tensor.hpp"

namespace ssa {

// Trainable parameters, owned in registration order so iteration (and the
// checkpoint byte stream) is deterministic.
class ParamStore {
 public:
  int add(std::string name, Tensor value);
  Tensor& value(int i) { return params_[i].value; }
  const Tensor& value(int i) const { return params_[i].value; }
  const std::string& name(int i) const { return params_[i].name; }
  std::size_t size() const { return params_.size(); }
  std::size_t total_values() const;

 private:
  struct Param {
    std::string name;
    Tensor value;
  };
  std::vector<Param> params_;
};

// Tracked leaf tensors for one graph, index-aligned with the store.
using BoundParams = std::vector<Tensor>;

struct AffineLayer {
  int w = -1;  // [in, out]
  int b = -1;  // [out]
  std::size_t in = 0, out = 0;

  static AffineLayer init(ParamStore& store, const std::string& name,
                          std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(Graph& g, const BoundParams& bound, const Tensor& x) const;
};

// Batch-statistics normalization over the batch axis. Training mode uses
// batch statistics and updates the running ones; inference uses running
// statistics only.
struct BatchNormLayer {
  int gamma = -1;
  int beta = -1;
  std::size_t width = 0;
  double eps = 1e-5;
  double momentum = 0.1;
  std::vector<double> running_mean;
  std::vector<double> running_var;

  static BatchNormLayer init(ParamStore& store, const std::string& name,
                             std::size_t width);
  Tensor forward(Graph& g, const BoundParams& bound, const Tensor& x,
                 bool training);
};

// Embedding function f: a stack of affine+norm+relu blocks and a final
// affine layer with no activation (embeddings stay unnormalized).
class EmbeddingNet {
 public:
  static EmbeddingNet init(ParamStore& store, std::size_t input_dim,
                           const std::vector<std::size_t>& hidden,
                           std::size_t embedding_dim, Rng& rng);
  // training mode requires batch >= 2 (BatchSizeError otherwise)
  Tensor forward(Graph& g, const BoundParams& bound, const Tensor& x,
                 bool training);

  std::size_t input_dim() const { return input_dim_; }
  std::size_t embedding_dim() const { return embedding_dim_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  std::vector<BatchNormLayer>& norms() { return norms_; }
  const std::vector<BatchNormLayer>& norms() const { return norms_; }

 private:
  std::size_t input_dim_ = 0, embedding_dim_ = 0;
  std::vector<std::size_t> hidden_;
  std::vector<AffineLayer> affines_;
  std::vector<BatchNormLayer> norms_;
};

enum class ClassifierMode { kSoftmax, kAngularMargin };

// Classification head over embeddings. Softmax mode: softmax(z W). Margin
// mode: ArcFace-style; W columns and embeddings are L2-normalized, logits
// are s*cos(theta) with the true-class logit replaced by s*cos(theta + m)
// during training. At inference the margin is not applied.
class ClassifierHead {
 public:
  static ClassifierHead init(ParamStore& store, ClassifierMode mode,
                             std::size_t embedding_dim, std::size_t classes,
                             double scale, double margin, Rng& rng);
  // labels required in margin mode when training (ContractError otherwise);
  // returns probabilities, rows summing to 1.
  Tensor forward(Graph& g, const BoundParams& bound, const Tensor& z,
                 const std::vector<std::size_t>* labels, bool training) const;

  ClassifierMode mode() const { return mode_; }
  std::size_t classes() const { return classes_; }
  double scale() const { return scale_; }
  double margin() const { return margin_; }

 private:
  ClassifierMode mode_ = ClassifierMode::kSoftmax;
  int w_ = -1;  // [d, C]
  std::size_t d_ = 0, classes_ = 0;
  double scale_ = 16.0, margin_ = 0.3;
};

// Two-layer remapping head h used by the self-similarity loss. Hidden width
// defaults to embedding_dim / 4; hidden layer gets batch-statistics
// normalization and relu, output layer is plain affine of width d.
class SimSiamHead {
 public:
  static SimSiamHead init(ParamStore& store, std::size_t embedding_dim,
                          std::size_t hidden_width, Rng& rng);
  Tensor forward(Graph& g, const BoundParams& bound, const Tensor& z,
                 bool training);

  std::size_t hidden_width() const { return hidden_; }
  BatchNormLayer& norm() { return norm_; }
  const BatchNormLayer& norm() const { return norm_; }

 private:
  std::size_t d_ = 0, hidden_ = 0;
  AffineLayer a1_, a2_;
  BatchNormLayer norm_;
};

struct ModelSpec {
  std::size_t input_dim = 256;
  std::vector<std::size_t> hidden = {256, 256};
  std::size_t embedding_dim = 128;
  std::size_t classes = 20;
  ClassifierMode classifier_mode = ClassifierMode::kSoftmax;
  double scale = 16.0;
  double margin = 0.3;
};

// The full set of learnable pieces: f, the classifier head, and (after
// adaptation starts) the SimSiam head h.
struct Model {
  ModelSpec spec;
  ParamStore store;
  EmbeddingNet f;
  ClassifierHead classifier;
  std::optional<SimSiamHead> head;

  static Model init(const ModelSpec& spec, Rng& rng);
  void add_simsiam_head(Rng& rng);

  BoundParams bind(Graph& g) const;
  // Embeddings for a raw sample matrix, inference mode, detached.
  Tensor embed_inference(const Tensor& x);
};

// Checkpoint I/O. Binary layout: magic "SSA1", u64 record count, then
// records of (u32 name length, name bytes, u32 rank, u64 extents...,
// float64 little-endian values). The first record is "meta" (architecture),
// parameter records follow in store order, then running statistics.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace ssa

#endif  // SSA_MODEL_HPP_

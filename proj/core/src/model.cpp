#include "ssa/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace ssa {

int ParamStore::add(std::string name, Tensor value) {
  const int id = static_cast<int>(params_.size());
  params_.push_back({std::move(name), std::move(value)});
  return id;
}

std::size_t ParamStore::total_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

AffineLayer AffineLayer::init(ParamStore& store, const std::string& name,
                              std::size_t in, std::size_t out, Rng& rng) {
  AffineLayer layer;
  layer.in = in;
  layer.out = out;
  const double stddev = std::sqrt(2.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (double& v : w) v = rng.normal(0.0, stddev);
  layer.w = store.add(name + ".w", Tensor::matrix(in, out, std::move(w)));
  layer.b = store.add(name + ".b",
                      Tensor::vector(std::vector<double>(out, 0.0)));
  return layer;
}

Tensor AffineLayer::forward(Graph& g, const BoundParams& bound,
                            const Tensor& x) const {
  Tensor y = g.matmul(x, bound[w]);
  return g.add(y, g.broadcast_rows(bound[b], x.rows()));
}

BatchNormLayer BatchNormLayer::init(ParamStore& store, const std::string& name,
                                    std::size_t width) {
  BatchNormLayer layer;
  layer.width = width;
  layer.gamma = store.add(name + ".gamma",
                          Tensor::vector(std::vector<double>(width, 1.0)));
  layer.beta = store.add(name + ".beta",
                         Tensor::vector(std::vector<double>(width, 0.0)));
  layer.running_mean.assign(width, 0.0);
  layer.running_var.assign(width, 1.0);
  return layer;
}

Tensor BatchNormLayer::forward(Graph& g, const BoundParams& bound,
                               const Tensor& x, bool training) {
  const std::size_t b = x.rows(), c = x.cols();
  if (c != width)
    throw DimensionError("batch norm width " + std::to_string(width) +
                         " vs input " + shape_str(x.shape));
  Tensor xhat;
  if (training) {
    const double inv_b = 1.0 / static_cast<double>(b);
    Tensor mu = g.mul_scalar(g.col_sum(x), inv_b);
    Tensor xc = g.sub(x, g.broadcast_rows(mu, b));
    Tensor var = g.mul_scalar(g.col_sum(g.mul(xc, xc)), inv_b);
    Tensor stddev = g.sqrt(g.add_scalar(var, eps));
    xhat = g.div(xc, g.broadcast_rows(stddev, b));
    for (std::size_t j = 0; j < c; ++j) {
      running_mean[j] =
          (1.0 - momentum) * running_mean[j] + momentum * mu.values[j];
      running_var[j] =
          (1.0 - momentum) * running_var[j] + momentum * var.values[j];
    }
  } else {
    std::vector<double> inv_std(c);
    for (std::size_t j = 0; j < c; ++j)
      inv_std[j] = 1.0 / std::sqrt(running_var[j] + eps);
    Tensor mu = g.constant(Tensor::vector(running_mean));
    Tensor scale = g.constant(Tensor::vector(inv_std));
    xhat = g.mul(g.sub(x, g.broadcast_rows(mu, b)),
                 g.broadcast_rows(scale, b));
  }
  return g.add(g.mul(xhat, g.broadcast_rows(bound[gamma], b)),
               g.broadcast_rows(bound[beta], b));
}

EmbeddingNet EmbeddingNet::init(ParamStore& store, std::size_t input_dim,
                                const std::vector<std::size_t>& hidden,
                                std::size_t embedding_dim, Rng& rng) {
  EmbeddingNet net;
  net.input_dim_ = input_dim;
  net.embedding_dim_ = embedding_dim;
  net.hidden_ = hidden;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    net.affines_.push_back(AffineLayer::init(
        store, "f.affine" + std::to_string(i), in, hidden[i], rng));
    net.norms_.push_back(
        BatchNormLayer::init(store, "f.norm" + std::to_string(i), hidden[i]));
    in = hidden[i];
  }
  net.affines_.push_back(
      AffineLayer::init(store, "f.out", in, embedding_dim, rng));
  // Small nonzero output bias keeps embeddings of relu-dead rows away from
  // the exact zero vector (cosine losses reject zero embeddings).
  for (double& v : store.value(net.affines_.back().b).values)
    v = rng.normal(0.0, 0.01);
  return net;
}

Tensor EmbeddingNet::forward(Graph& g, const BoundParams& bound,
                             const Tensor& x, bool training) {
  if (x.shape.size() != 2 || x.cols() != input_dim_)
    throw DimensionError("embedding input " + shape_str(x.shape) +
                         " vs expected input-dim " +
                         std::to_string(input_dim_));
  if (training && x.rows() < 2)
    throw BatchSizeError(
        "training-mode embedding needs batch >= 2 for batch statistics, got " +
        std::to_string(x.rows()));
  Tensor h = x;
  for (std::size_t i = 0; i < norms_.size(); ++i) {
    h = affines_[i].forward(g, bound, h);
    h = norms_[i].forward(g, bound, h, training);
    h = g.relu(h);
  }
  return affines_.back().forward(g, bound, h);
}

ClassifierHead ClassifierHead::init(ParamStore& store, ClassifierMode mode,
                                    std::size_t embedding_dim,
                                    std::size_t classes, double scale,
                                    double margin, Rng& rng) {
  ClassifierHead head;
  head.mode_ = mode;
  head.d_ = embedding_dim;
  head.classes_ = classes;
  head.scale_ = scale;
  head.margin_ = margin;
  const double stddev = std::sqrt(2.0 / static_cast<double>(embedding_dim));
  std::vector<double> w(embedding_dim * classes);
  for (double& v : w) v = rng.normal(0.0, stddev);
  head.w_ = store.add("classifier.w",
                      Tensor::matrix(embedding_dim, classes, std::move(w)));
  return head;
}

namespace {

// Numerically stable row softmax. The subtracted row max is a constant
// shift, which leaves both the value and the gradient unchanged.
Tensor row_softmax(Graph& g, const Tensor& logits) {
  const std::size_t r = logits.rows(), c = logits.cols();
  std::vector<double> mx(r, -1e300);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      mx[i] = std::max(mx[i], logits.at(i, j));
  Tensor shifted =
      g.sub(logits, g.broadcast_cols(g.constant(Tensor::vector(mx)), c));
  Tensor e = g.exp(shifted);
  return g.div(e, g.broadcast_cols(g.row_sum(e), c));
}

}  // namespace

Tensor ClassifierHead::forward(Graph& g, const BoundParams& bound,
                               const Tensor& z,
                               const std::vector<std::size_t>* labels,
                               bool training) const {
  if (z.cols() != d_)
    throw DimensionError("classifier expects embeddings of width " +
                         std::to_string(d_) + ", got " + shape_str(z.shape));
  if (mode_ == ClassifierMode::kSoftmax) {
    return row_softmax(g, g.matmul(z, bound[w_]));
  }

  // Angular-margin mode: cosines between normalized embeddings and
  // normalized class columns.
  const Tensor& w = bound[w_];
  Tensor col_norms = g.sqrt(g.col_sum(g.mul(w, w)));
  Tensor wn = g.div(w, g.broadcast_rows(col_norms, d_));
  Tensor zn = g.l2_normalize_rows(z);
  Tensor cosine = g.matmul(zn, wn);

  if (training && labels == nullptr)
    throw ContractError("angular-margin training requires labels");
  if (training && labels != nullptr) {
    const std::size_t b = z.rows();
    if (labels->size() != b)
      throw ContractError("label count does not match batch size");
    // cos(theta + m) = cos(theta) cos(m) - sin(theta) sin(m); the cosine is
    // clamped away from +-1 so sin(theta) stays differentiable.
    Tensor cy = g.gather_cols(cosine, *labels);
    Tensor cyc = g.clamp(cy, -1.0 + 1e-7, 1.0 - 1e-7);
    Tensor sy = g.sqrt(g.add_scalar(g.neg(g.mul(cyc, cyc)), 1.0));
    Tensor cy_m = g.sub(g.mul_scalar(cyc, std::cos(margin_)),
                        g.mul_scalar(sy, std::sin(margin_)));
    Tensor delta = g.sub(cy_m, cy);  // added to the true-class cosine only
    std::vector<double> onehot(b * classes_, 0.0);
    for (std::size_t i = 0; i < b; ++i) onehot[i * classes_ + (*labels)[i]] = 1.0;
    Tensor mask = g.constant(Tensor::matrix(b, classes_, std::move(onehot)));
    Tensor adjusted =
        g.add(cosine, g.mul(mask, g.broadcast_cols(delta, classes_)));
    return row_softmax(g, g.mul_scalar(adjusted, scale_));
  }
  return row_softmax(g, g.mul_scalar(cosine, scale_));
}

SimSiamHead SimSiamHead::init(ParamStore& store, std::size_t embedding_dim,
                              std::size_t hidden_width, Rng& rng) {
  SimSiamHead head;
  head.d_ = embedding_dim;
  head.hidden_ = hidden_width;
  head.a1_ = AffineLayer::init(store, "h.affine1", embedding_dim, hidden_width,
                               rng);
  head.norm_ = BatchNormLayer::init(store, "h.norm", hidden_width);
  head.a2_ = AffineLayer::init(store, "h.affine2", hidden_width, embedding_dim,
                               rng);
  // Small nonzero output bias: rows whose hidden units are all relu-dead
  // still project to a nonzero vector, keeping the cosine well defined.
  for (double& v : store.value(head.a2_.b).values) v = rng.normal(0.0, 0.01);
  return head;
}

Tensor SimSiamHead::forward(Graph& g, const BoundParams& bound,
                            const Tensor& z, bool training) {
  if (z.cols() != d_)
    throw DimensionError("head expects width " + std::to_string(d_) +
                         ", got " + shape_str(z.shape));
  Tensor h = a1_.forward(g, bound, z);
  h = norm_.forward(g, bound, h, training);
  h = g.relu(h);
  return a2_.forward(g, bound, h);
}

Model Model::init(const ModelSpec& spec, Rng& rng) {
  Model m;
  m.spec = spec;
  m.f = EmbeddingNet::init(m.store, spec.input_dim, spec.hidden,
                           spec.embedding_dim, rng);
  m.classifier =
      ClassifierHead::init(m.store, spec.classifier_mode, spec.embedding_dim,
                           spec.classes, spec.scale, spec.margin, rng);
  return m;
}

void Model::add_simsiam_head(Rng& rng) {
  if (head) return;
  const std::size_t hidden = std::max<std::size_t>(1, spec.embedding_dim / 4);
  head = SimSiamHead::init(store, spec.embedding_dim, hidden, rng);
}

BoundParams Model::bind(Graph& g) const {
  BoundParams bound;
  bound.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i)
    bound.push_back(g.leaf(store.value(static_cast<int>(i))));
  return bound;
}

Tensor Model::embed_inference(const Tensor& x) {
  Graph g;
  BoundParams bound = bind(g);
  Tensor z = f.forward(g, bound, x, /*training=*/false);
  z.node = -1;
  return z;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[4] = {'S', 'S', 'A', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void write_record(std::ostream& os, const std::string& name,
                  const Shape& shape, const std::vector<double>& values) {
  write_u32(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t e : shape) write_u64(os, e);
  write_doubles(os, values);
}

struct RecordReader {
  std::ifstream in;
  std::size_t offset = 0;

  explicit RecordReader(const std::string& path)
      : in(path, std::ios::binary) {}

  void read_bytes(void* dst, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw FormatError(std::string("truncated checkpoint while reading ") +
                            what,
                        offset);
    offset += n;
  }
  std::uint32_t read_u32(const char* what) {
    std::uint32_t v;
    read_bytes(&v, sizeof v, what);
    return v;
  }
  std::uint64_t read_u64(const char* what) {
    std::uint64_t v;
    read_bytes(&v, sizeof v, what);
    return v;
  }
};

struct RawRecord {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

RawRecord read_record(RecordReader& r) {
  RawRecord rec;
  const std::uint32_t name_len = r.read_u32("record name length");
  if (name_len > 4096) throw FormatError("implausible record name length", r.offset - 4);
  rec.name.resize(name_len);
  r.read_bytes(rec.name.data(), name_len, "record name");
  const std::uint32_t rank = r.read_u32("record rank");
  if (rank > 8) throw FormatError("implausible record rank", r.offset - 4);
  rec.shape.resize(rank);
  for (std::uint32_t i = 0; i < rank; ++i)
    rec.shape[i] = static_cast<std::size_t>(r.read_u64("record extent"));
  const std::size_t n = numel(rec.shape);
  if (n > (1u << 28)) throw FormatError("implausible record size", r.offset);
  rec.values.resize(n);
  r.read_bytes(rec.values.data(), n * sizeof(double), "record values");
  return rec;
}

std::vector<std::pair<std::string, BatchNormLayer*>> norm_layers(Model& m) {
  std::vector<std::pair<std::string, BatchNormLayer*>> out;
  for (std::size_t i = 0; i < m.f.norms().size(); ++i)
    out.emplace_back("f.norm" + std::to_string(i), &m.f.norms()[i]);
  if (m.head) out.emplace_back("h.norm", &m.head->norm());
  return out;
}

}  // namespace

void save_checkpoint(const Model& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path, 0);

  std::vector<double> meta;
  meta.push_back(1.0);  // format version
  meta.push_back(static_cast<double>(model.spec.input_dim));
  meta.push_back(static_cast<double>(model.spec.hidden.size()));
  for (std::size_t h : model.spec.hidden)
    meta.push_back(static_cast<double>(h));
  meta.push_back(static_cast<double>(model.spec.embedding_dim));
  meta.push_back(static_cast<double>(model.spec.classes));
  meta.push_back(model.spec.classifier_mode == ClassifierMode::kAngularMargin
                     ? 1.0
                     : 0.0);
  meta.push_back(model.spec.scale);
  meta.push_back(model.spec.margin);
  meta.push_back(model.head ? 1.0 : 0.0);

  Model& mut = const_cast<Model&>(model);  // norm_layers only reads
  const auto norms = norm_layers(mut);
  const std::uint64_t record_count =
      1 + model.store.size() + 2 * norms.size();

  os.write(kMagic, 4);
  write_u64(os, record_count);
  write_record(os, "meta", {meta.size()}, meta);
  for (std::size_t i = 0; i < model.store.size(); ++i) {
    const Tensor& t = model.store.value(static_cast<int>(i));
    write_record(os, model.store.name(static_cast<int>(i)), t.shape, t.values);
  }
  for (const auto& [name, layer] : norms) {
    write_record(os, name + ".running_mean", {layer->width},
                 layer->running_mean);
    write_record(os, name + ".running_var", {layer->width},
                 layer->running_var);
  }
  if (!os) throw FormatError("checkpoint write failed: " + path, 0);
}

Model load_checkpoint(const std::string& path) {
  RecordReader r(path);
  if (!r.in) throw FormatError("cannot open checkpoint: " + path, 0);
  char magic[4];
  r.read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad checkpoint magic", 0);
  const std::uint64_t record_count = r.read_u64("record count");
  if (record_count < 1) throw FormatError("empty checkpoint", 4);

  RawRecord meta_rec = read_record(r);
  if (meta_rec.name != "meta" || meta_rec.values.size() < 9)
    throw FormatError("first checkpoint record must be meta", 4);
  const std::vector<double>& meta = meta_rec.values;
  std::size_t pos = 0;
  const double version = meta[pos++];
  if (version != 1.0) throw FormatError("unsupported checkpoint version", 4);
  ModelSpec spec;
  spec.input_dim = static_cast<std::size_t>(meta[pos++]);
  const std::size_t n_hidden = static_cast<std::size_t>(meta[pos++]);
  spec.hidden.clear();
  for (std::size_t i = 0; i < n_hidden; ++i)
    spec.hidden.push_back(static_cast<std::size_t>(meta[pos++]));
  spec.embedding_dim = static_cast<std::size_t>(meta[pos++]);
  spec.classes = static_cast<std::size_t>(meta[pos++]);
  spec.classifier_mode = meta[pos++] != 0.0 ? ClassifierMode::kAngularMargin
                                            : ClassifierMode::kSoftmax;
  spec.scale = meta[pos++];
  spec.margin = meta[pos++];
  const bool has_head = meta[pos++] != 0.0;

  Rng rng(0);  // values are overwritten below
  Model model = Model::init(spec, rng);
  if (has_head) model.add_simsiam_head(rng);

  for (std::size_t i = 0; i < model.store.size(); ++i) {
    RawRecord rec = read_record(r);
    const std::string& expected = model.store.name(static_cast<int>(i));
    if (rec.name != expected)
      throw FormatError("unexpected parameter record '" + rec.name +
                            "', expected '" + expected + "'",
                        r.offset);
    Tensor& dst = model.store.value(static_cast<int>(i));
    if (rec.shape != dst.shape)
      throw FormatError("parameter '" + rec.name + "' has shape " +
                            shape_str(rec.shape) + ", expected " +
                            shape_str(dst.shape),
                        r.offset);
    dst.values = std::move(rec.values);
  }
  for (auto& [name, layer] : norm_layers(model)) {
    for (const char* suffix : {".running_mean", ".running_var"}) {
      RawRecord rec = read_record(r);
      if (rec.name != name + suffix)
        throw FormatError("unexpected statistics record '" + rec.name + "'",
                          r.offset);
      if (rec.values.size() != layer->width)
        throw FormatError("statistics record '" + rec.name + "' wrong width",
                          r.offset);
      if (suffix[9] == 'm')
        layer->running_mean = std::move(rec.values);
      else
        layer->running_var = std::move(rec.values);
    }
  }
  return model;
}

}  // namespace ssa

#include "ssa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace ssa {

void SyntheticSpec::validate() const {
  if (side < 2) throw ConfigError("data.side must be >= 2");
  if (classes_source == 0)
    throw ConfigError("data.classes_source must be >= 1");
  if (classes_target == 0)
    throw ConfigError("data.classes_target must be >= 1");
  if (samples_per_class == 0)
    throw ConfigError("data.samples_per_class must be >= 1");
  if (noise_sigma < 0.0) throw ConfigError("data.noise_sigma must be >= 0");
  if (shift_contrast <= 0.0)
    throw ConfigError("data.shift_contrast must be > 0");
  if (shift_blur_width > 1 && shift_blur_width % 2 == 0)
    throw ConfigError("data.shift_blur_width must be odd (or 0/1 for none)");
  if (class_contrast <= 0.0)
    throw ConfigError("data.class_contrast must be > 0");
  if (template_symmetry < 0.0 || template_symmetry >= 1.0)
    throw ConfigError("data.template_symmetry must lie in [0, 1)");
}

Tensor DomainDataset::sample_tensor(std::size_t i) const {
  std::vector<double> v(sample(i), sample(i) + dim());
  return Tensor::matrix(1, dim(), std::move(v));
}

Tensor DomainDataset::all_tensor() const {
  return Tensor::matrix(count, dim(), samples);
}

std::vector<double> mirror(const std::vector<double>& x, std::size_t side) {
  if (x.size() != side * side)
    throw DimensionError("mirror: length " + std::to_string(x.size()) +
                         " is not side^2 for side " + std::to_string(side));
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < side; ++r)
    for (std::size_t c = 0; c < side; ++c)
      out[r * side + c] = x[r * side + (side - 1 - c)];
  return out;
}

void mirror_rows_inplace(std::vector<double>& batch, std::size_t count,
                         std::size_t side) {
  const std::size_t dim = side * side;
  if (batch.size() != count * dim)
    throw DimensionError("mirror_rows_inplace: bad batch length");
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t r = 0; r < side; ++r) {
      double* row = batch.data() + i * dim + r * side;
      std::reverse(row, row + side);
    }
}

namespace {

void box_blur(std::vector<double>& img, std::size_t side, std::size_t width) {
  if (width <= 1) return;
  const std::ptrdiff_t radius = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(side);
  std::vector<double> out(img.size());
  for (std::ptrdiff_t r = 0; r < s; ++r)
    for (std::ptrdiff_t c = 0; c < s; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t dr = -radius; dr <= radius; ++dr)
        for (std::ptrdiff_t dc = -radius; dc <= radius; ++dc) {
          const std::ptrdiff_t rr = std::clamp<std::ptrdiff_t>(r + dr, 0, s - 1);
          const std::ptrdiff_t cc = std::clamp<std::ptrdiff_t>(c + dc, 0, s - 1);
          acc += img[rr * s + cc];
        }
      out[r * s + c] = acc / static_cast<double>(width * width);
    }
  img = std::move(out);
}

void domain_shift(std::vector<double>& img, const SyntheticSpec& spec) {
  for (double& v : img)
    v = 0.5 + spec.shift_contrast * (v - 0.5) + spec.shift_brightness;
  box_blur(img, spec.side, spec.shift_blur_width);
  for (double& v : img) v = std::clamp(v, 0.0, 1.0);
}

std::vector<double> make_template(const SyntheticSpec& spec, Rng& rng) {
  const std::size_t dim = spec.input_dim();
  std::vector<double> raw(dim), tpl(dim);
  // Split the raw field into symmetric and antisymmetric halves and mix
  // them with weight template_symmetry; each half is rescaled to unit
  // variance so class_contrast keeps its meaning for any mix.
  const double w_sym = spec.template_symmetry * std::sqrt(2.0);
  const double w_asym = (1.0 - spec.template_symmetry) * std::sqrt(2.0);
  for (;;) {
    for (double& v : raw) v = rng.normal();
    const std::vector<double> flipped = mirror(raw, spec.side);
    for (std::size_t i = 0; i < dim; ++i) {
      const double sym = 0.5 * (raw[i] + flipped[i]);
      const double asym = 0.5 * (raw[i] - flipped[i]);
      const double field = w_sym * sym + w_asym * asym;
      tpl[i] = std::clamp(0.5 + spec.class_contrast * field, 0.0, 1.0);
    }
    if (mirror(tpl, spec.side) != tpl) return tpl;  // keep flips non-trivial
  }
}

}  // namespace

GeneratedData generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t dim = spec.input_dim();
  const std::size_t total_classes = spec.classes_source + spec.classes_target;

  GeneratedData out;
  auto setup = [&](DomainDataset& ds, std::size_t classes, std::uint32_t lo,
                   const char* tag, bool labeled) {
    ds.side = spec.side;
    ds.count = classes * spec.samples_per_class;
    ds.samples.reserve(ds.count * dim);
    if (labeled) ds.labels.reserve(ds.count);
    ds.class_lo = lo;
    ds.class_hi = lo + static_cast<std::uint32_t>(classes);
    ds.domain = tag;
  };
  setup(out.source, spec.classes_source, 0, "source", true);
  setup(out.target, spec.classes_target,
        static_cast<std::uint32_t>(spec.classes_source), "target", false);

  for (std::size_t c = 0; c < total_classes; ++c) {
    const bool is_target = c >= spec.classes_source;
    const std::vector<double> tpl = make_template(spec, rng);
    for (std::size_t k = 0; k < spec.samples_per_class; ++k) {
      std::vector<double> img(dim);
      for (std::size_t i = 0; i < dim; ++i)
        img[i] = std::clamp(tpl[i] + spec.noise_sigma * rng.normal(), 0.0, 1.0);
      if (is_target) domain_shift(img, spec);
      DomainDataset& ds = is_target ? out.target : out.source;
      ds.samples.insert(ds.samples.end(), img.begin(), img.end());
      if (!is_target)
        out.source.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }

  out.target_labeled = out.target;
  out.target_labeled.domain = "target-eval";
  out.target_labeled.labels.reserve(out.target.count);
  for (std::size_t c = spec.classes_source; c < total_classes; ++c)
    for (std::size_t k = 0; k < spec.samples_per_class; ++k)
      out.target_labeled.labels.push_back(static_cast<std::uint32_t>(c));
  return out;
}

Batch next_batch(const DomainDataset& source, const DomainDataset& target,
                 std::size_t k_s, std::size_t k_t, Rng& rng) {
  if (k_s > source.count)
    throw SamplingError("source batch " + std::to_string(k_s) +
                        " exceeds dataset size " +
                        std::to_string(source.count));
  if (k_t > target.count)
    throw SamplingError("target batch " + std::to_string(k_t) +
                        " exceeds dataset size " +
                        std::to_string(target.count));
  if (!source.labeled())
    throw ContractError("next_batch: source dataset must be labeled");

  Batch batch;
  const std::size_t dim = source.dim();
  auto gather = [&](const DomainDataset& ds, std::size_t k,
                    std::vector<std::size_t>* label_sink) {
    std::vector<double> rows(k * dim);
    const auto idx = rng.sample_without_replacement(ds.count, k);
    for (std::size_t i = 0; i < k; ++i) {
      std::memcpy(rows.data() + i * dim, ds.sample(idx[i]),
                  dim * sizeof(double));
      if (label_sink) label_sink->push_back(ds.labels[idx[i]]);
    }
    return rows;
  };

  std::vector<double> xs = gather(source, k_s, &batch.labels);
  std::vector<double> xs_m = xs;
  mirror_rows_inplace(xs_m, k_s, source.side);
  batch.source = Tensor::matrix(k_s, dim, std::move(xs));
  batch.source_mirror = Tensor::matrix(k_s, dim, std::move(xs_m));

  std::vector<double> xt = gather(target, k_t, nullptr);
  std::vector<double> xt_m = xt;
  if (k_t > 0) mirror_rows_inplace(xt_m, k_t, target.side);
  batch.target = Tensor::matrix(k_t, dim, std::move(xt));
  batch.target_mirror = Tensor::matrix(k_t, dim, std::move(xt_m));
  return batch;
}

std::size_t batches_per_epoch(std::size_t dataset_size, std::size_t batch) {
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  return (dataset_size + batch - 1) / batch;
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

constexpr char kMagic[4] = {'S', 'S', 'A', 'D'};
constexpr std::uint8_t kVersion = 1;

struct Reader {
  std::ifstream in;
  std::size_t offset = 0;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {}
  void read(void* dst, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
      throw FormatError(std::string("truncated dataset file while reading ") +
                            what,
                        offset);
    offset += n;
  }
  template <typename T>
  T scalar(const char* what) {
    T v;
    read(&v, sizeof v, what);
    return v;
  }
};

}  // namespace

void save_dataset(const DomainDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open dataset for writing: " + path, 0);
  os.write(kMagic, 4);
  os.write(reinterpret_cast<const char*>(&kVersion), 1);
  const std::uint32_t side = static_cast<std::uint32_t>(ds.side);
  const std::uint64_t count = ds.count;
  const std::uint8_t labeled = ds.labeled() ? 1 : 0;
  os.write(reinterpret_cast<const char*>(&side), sizeof side);
  os.write(reinterpret_cast<const char*>(&count), sizeof count);
  os.write(reinterpret_cast<const char*>(&labeled), 1);
  os.write(reinterpret_cast<const char*>(&ds.class_lo), sizeof ds.class_lo);
  os.write(reinterpret_cast<const char*>(&ds.class_hi), sizeof ds.class_hi);
  const std::uint32_t tag_len = static_cast<std::uint32_t>(ds.domain.size());
  os.write(reinterpret_cast<const char*>(&tag_len), sizeof tag_len);
  os.write(ds.domain.data(), tag_len);
  os.write(reinterpret_cast<const char*>(ds.samples.data()),
           static_cast<std::streamsize>(ds.samples.size() * sizeof(double)));
  if (labeled)
    os.write(reinterpret_cast<const char*>(ds.labels.data()),
             static_cast<std::streamsize>(ds.labels.size() *
                                          sizeof(std::uint32_t)));
  if (!os) throw FormatError("dataset write failed: " + path, 0);
}

DomainDataset load_dataset(const std::string& path) {
  Reader r(path);
  if (!r.in) throw FormatError("cannot open dataset: " + path, 0);
  char magic[4];
  r.read(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad dataset magic", 0);
  const auto version = r.scalar<std::uint8_t>("version");
  if (version != kVersion) throw FormatError("unsupported dataset version", 4);

  DomainDataset ds;
  ds.side = r.scalar<std::uint32_t>("side");
  ds.count = static_cast<std::size_t>(r.scalar<std::uint64_t>("count"));
  const auto labeled = r.scalar<std::uint8_t>("labeled flag");
  ds.class_lo = r.scalar<std::uint32_t>("class range lo");
  ds.class_hi = r.scalar<std::uint32_t>("class range hi");
  const auto tag_len = r.scalar<std::uint32_t>("domain tag length");
  if (tag_len > 256) throw FormatError("implausible domain tag", r.offset - 4);
  ds.domain.resize(tag_len);
  r.read(ds.domain.data(), tag_len, "domain tag");
  if (ds.side < 1 || ds.count > (1u << 28))
    throw FormatError("implausible dataset header", r.offset);
  ds.samples.resize(ds.count * ds.dim());
  r.read(ds.samples.data(), ds.samples.size() * sizeof(double), "samples");
  if (labeled) {
    ds.labels.resize(ds.count);
    r.read(ds.labels.data(), ds.labels.size() * sizeof(std::uint32_t),
           "labels");
  }
  return ds;
}

void export_dataset_csv(const DomainDataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot open csv for writing: " + path, 0);
  char buf[64];
  for (std::size_t i = 0; i < ds.count; ++i) {
    const long label = ds.labeled() ? static_cast<long>(ds.labels[i]) : -1;
    os << label;
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", ds.sample(i)[j]);
      os << buf;
    }
    os << "\n";
  }
}

}  // namespace ssa

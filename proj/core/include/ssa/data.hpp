#ifndef SSA_DATA_HPP_
#define SSA_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ssa/rng.hpp"
#include "ssa/tensor.hpp"

namespace ssa {

// Synthetic two-domain benchmark. Source and target identity sets are
// disjoint by construction: source labels are [0, classes_source), target
// labels [classes_source, classes_source + classes_target). Target samples
// additionally pass through a domain-shift transform (contrast scale,
// brightness offset, box blur).
struct SyntheticSpec {
  std::size_t side = 16;
  std::size_t classes_source = 20;
  std::size_t classes_target = 10;
  std::size_t samples_per_class = 30;
  double class_contrast = 0.18;  // amplitude of class templates around 0.5
  double template_symmetry = 0.9;  // weight of the symmetric template half
  double noise_sigma = 0.10;
  double shift_contrast = 0.95;
  double shift_brightness = 0.02;
  std::size_t shift_blur_width = 1;
  std::uint64_t seed = 1;

  std::size_t input_dim() const { return side * side; }
  void validate() const;  // ConfigError naming the offending field
};

struct DomainDataset {
  std::size_t side = 0;
  std::size_t count = 0;
  std::vector<double> samples;       // count x side^2, row-major, in [0,1]
  std::vector<std::uint32_t> labels;  // empty when unlabeled
  std::uint32_t class_lo = 0, class_hi = 0;  // label range [lo, hi)
  std::string domain;

  std::size_t dim() const { return side * side; }
  bool labeled() const { return !labels.empty(); }
  const double* sample(std::size_t i) const { return samples.data() + i * dim(); }
  Tensor sample_tensor(std::size_t i) const;
  Tensor all_tensor() const;  // count x dim matrix
};

struct GeneratedData {
  DomainDataset source;         // labeled
  DomainDataset target;         // same images, labels stripped (training view)
  DomainDataset target_labeled; // ground truth twin used by eval protocols
};

GeneratedData generate(const SyntheticSpec& spec);

// Horizontal flip of a flattened side x side image. DimensionError if the
// length is not side^2.
std::vector<double> mirror(const std::vector<double>& x, std::size_t side);
void mirror_rows_inplace(std::vector<double>& batch, std::size_t count,
                         std::size_t side);

struct Batch {
  Tensor source;         // k_s x dim
  Tensor source_mirror;
  std::vector<std::size_t> labels;  // k_s
  Tensor target;         // k_t x dim (zero rows when k_t = 0)
  Tensor target_mirror;
};

// Uniform sampling without replacement within the batch; mirrors are
// computed eagerly. SamplingError when a count exceeds the dataset size.
Batch next_batch(const DomainDataset& source, const DomainDataset& target,
                 std::size_t k_s, std::size_t k_t, Rng& rng);

// One adaptation epoch is counted on the target set.
std::size_t batches_per_epoch(std::size_t dataset_size, std::size_t batch);

// Dataset file: magic "SSAD", version byte, header, float64 LE samples,
// u32 labels when labeled. Bit-exact round-trip.
void save_dataset(const DomainDataset& ds, const std::string& path);
DomainDataset load_dataset(const std::string& path);

// CSV export: one row per sample, label (or -1) then pixels.
void export_dataset_csv(const DomainDataset& ds, const std::string& path);

}  // namespace ssa

#endif  // SSA_DATA_HPP_

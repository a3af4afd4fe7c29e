#ifndef GADA_DATA_DATASET_HPP
#define GADA_DATA_DATASET_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/tensor.hpp"

namespace gada::data {

// Labeled source, unlabeled target, labeled held-out target test split.
// Labels are 1..K. There is deliberately no target-train label field.
struct DomainShiftDataset {
  ad::Tensor source_x;
  std::vector<int> source_y;
  ad::Tensor target_x;
  ad::Tensor test_x;
  std::vector<int> test_y;
  std::size_t num_classes = 0;
  std::string provenance;

  std::size_t dim() const { return source_x.cols(); }
  void validate() const;
};

enum class Family { two_moons, gauss_blobs };

const char* family_name(Family f) noexcept;
Family parse_family(std::string_view name);

struct ShiftSpec {
  Family family = Family::two_moons;
  double angle_deg = 30.0;    // target rotation about the origin (two_moons)
  double shift_x = 0.0;       // target translation (gauss_blobs)
  double shift_y = 0.0;
  double scale = 1.0;         // target scale about the origin (gauss_blobs)
  double noise_sigma = 0.15;
  std::size_t num_classes = 3;  // gauss_blobs only; two_moons forces 2
  std::size_t n_source = 1000;
  std::size_t n_target = 1000;
  std::size_t n_test = 1000;
  std::uint64_t seed = 1;

  void validate() const;
};

// Seeds of the three independently drawn splits.
enum class Split : std::uint64_t { source = 1, target = 2, test = 3 };
std::uint64_t split_seed(std::uint64_t seed, Split split);

DomainShiftDataset gen_two_moons_shift(const ShiftSpec& spec);
DomainShiftDataset gen_blobs_shift(const ShiftSpec& spec);
DomainShiftDataset generate(const ShiftSpec& spec);

// Radius of the circle the blob means sit on; pairwise mean distance is at
// least 6 * noise_sigma.
double blob_radius(std::size_t num_classes, double noise_sigma);

// Untransformed source-law samples; exposed so the shift construction can
// be checked point by point.
ad::Tensor two_moons_points(std::size_t n, double noise_sigma, std::uint64_t seed,
                            std::vector<int>& labels);

struct CsvData {
  ad::Tensor features;
  std::optional<std::vector<int>> labels;
};

CsvData load_csv(const std::filesystem::path& features,
                 const std::optional<std::filesystem::path>& labels = std::nullopt);
CsvData parse_csv(std::string_view features_text, std::optional<std::string_view> labels_text);

void write_csv(const std::filesystem::path& path, const ad::Tensor& x);
void write_labels(const std::filesystem::path& path, std::span<const int> labels);

// Writes source_x.csv, source_y.csv, target_x.csv, test_x.csv, test_y.csv.
void export_dataset(const DomainShiftDataset& ds, const std::filesystem::path& dir);

struct CsvPaths {
  std::filesystem::path source_x, source_y, target_x, test_x, test_y;
};
DomainShiftDataset load_dataset(const CsvPaths& paths);

// Per-row standardization: (x - mean) / sqrt(var + 1e-6).
ad::Tensor instance_normalize(const ad::Tensor& x);
void instance_normalize(DomainShiftDataset& ds);

// Draws M distinct indices from [0, n) per step; batch k is a pure function
// of (seed, stream_id, k).
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed, std::uint64_t stream_id);

  std::vector<std::size_t> batch(std::uint64_t step) const;

  // Sequential access over steps; starts at step 0.
  std::vector<std::size_t> next() { return batch(cursor_++); }
  std::uint64_t cursor() const noexcept { return cursor_; }
  void seek(std::uint64_t step) noexcept { cursor_ = step; }

 private:
  std::size_t n_;
  std::size_t batch_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t cursor_ = 0;
};

}  // namespace gada::data

#endif  // GADA_DATA_DATASET_HPP

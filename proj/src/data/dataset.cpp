#include "data/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <type_traits>

#include "common/error.hpp"
#include "common/rng.hpp"
#include "common/text.hpp"

namespace gada::data {

using ad::Tensor;

void DomainShiftDataset::validate() const {
  if (num_classes < 2) throw ContractError("dataset needs K >= 2");
  if (source_x.rows() != source_y.size() || test_x.rows() != test_y.size()) {
    throw ContractError("dataset label counts do not match feature rows");
  }
  const std::size_t d = source_x.cols();
  if (target_x.cols() != d || test_x.cols() != d) {
    throw DimensionError("dataset splits disagree on feature width");
  }
  std::set<int> seen;
  for (int y : source_y) {
    if (y < 1 || static_cast<std::size_t>(y) > num_classes) {
      throw ContractError("source label " + std::to_string(y) + " outside 1.." +
                          std::to_string(num_classes));
    }
    seen.insert(y);
  }
  for (int y : test_y) {
    if (y < 1 || static_cast<std::size_t>(y) > num_classes) {
      throw ContractError("test label " + std::to_string(y) + " outside 1.." +
                          std::to_string(num_classes));
    }
  }
  if (seen.size() != num_classes) throw ContractError("every class must appear in the source labels");
}

const char* family_name(Family f) noexcept {
  return f == Family::two_moons ? "two_moons" : "gauss_blobs";
}

Family parse_family(std::string_view name) {
  if (name == "two_moons") return Family::two_moons;
  if (name == "gauss_blobs") return Family::gauss_blobs;
  throw ConfigError("unknown dataset family '" + std::string(name) + "'");
}

void ShiftSpec::validate() const {
  if (!(noise_sigma >= 0.0)) throw ContractError("noise_sigma must be >= 0");
  if (n_source == 0 || n_target == 0 || n_test == 0) throw ContractError("split sizes must be positive");
  if (family == Family::gauss_blobs && num_classes < 2) throw ContractError("gauss_blobs needs K >= 2");
  if (!(scale > 0.0)) throw ContractError("target scale must be positive");
}

std::uint64_t split_seed(std::uint64_t seed, Split split) {
  return derive_seed(seed, 0x5350 + static_cast<std::uint64_t>(split));
}

Tensor two_moons_points(std::size_t n, double noise_sigma, std::uint64_t seed, std::vector<int>& labels) {
  Rng rng(seed);
  std::vector<double> xs(n * 2);
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2) + 1;
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x = 0.0, y = 0.0;
    if (label == 1) {
      x = std::cos(t);
      y = std::sin(t);
    } else {
      x = 1.0 - std::cos(t);
      y = 0.5 - std::sin(t);
    }
    xs[2 * i] = x + rng.normal(0.0, noise_sigma);
    xs[2 * i + 1] = y + rng.normal(0.0, noise_sigma);
    labels[i] = label;
  }
  return Tensor({n, 2}, std::move(xs));
}

namespace {

Tensor rotate(const Tensor& x, double angle_deg) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a);
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out(i, 0) = c * x(i, 0) - s * x(i, 1);
    out(i, 1) = s * x(i, 0) + c * x(i, 1);
  }
  return out;
}

Tensor blobs_points(std::size_t n, std::size_t k, double sigma, std::uint64_t seed,
                    std::vector<int>& labels) {
  Rng rng(seed);
  const double radius = blob_radius(k, sigma);
  std::vector<double> xs(n * 2);
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % k;
    const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);
    xs[2 * i] = radius * std::cos(a) + rng.normal(0.0, sigma);
    xs[2 * i + 1] = radius * std::sin(a) + rng.normal(0.0, sigma);
    labels[i] = static_cast<int>(c) + 1;
  }
  return Tensor({n, 2}, std::move(xs));
}

Tensor scale_shift(const Tensor& x, double scale, double dx, double dy) {
  Tensor out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out(i, 0) = scale * x(i, 0) + dx;
    out(i, 1) = scale * x(i, 1) + dy;
  }
  return out;
}

}  // namespace

double blob_radius(std::size_t num_classes, double noise_sigma) {
  const double half_angle = std::numbers::pi / static_cast<double>(num_classes);
  return std::max(1.0, 3.0 * noise_sigma / std::sin(half_angle));
}

DomainShiftDataset gen_two_moons_shift(const ShiftSpec& spec) {
  spec.validate();
  if (spec.family != Family::two_moons) throw ContractError("gen_two_moons_shift: wrong family");
  DomainShiftDataset ds;
  ds.num_classes = 2;
  std::vector<int> unused;
  ds.source_x = two_moons_points(spec.n_source, spec.noise_sigma, split_seed(spec.seed, Split::source),
                                 ds.source_y);
  ds.target_x = rotate(two_moons_points(spec.n_target, spec.noise_sigma,
                                        split_seed(spec.seed, Split::target), unused),
                       spec.angle_deg);
  ds.test_x = rotate(two_moons_points(spec.n_test, spec.noise_sigma,
                                      split_seed(spec.seed, Split::test), ds.test_y),
                     spec.angle_deg);
  ds.provenance = "two_moons angle=" + format_double(spec.angle_deg) +
                  " noise=" + format_double(spec.noise_sigma) + " seed=" + std::to_string(spec.seed);
  ds.validate();
  return ds;
}

DomainShiftDataset gen_blobs_shift(const ShiftSpec& spec) {
  spec.validate();
  if (spec.family != Family::gauss_blobs) throw ContractError("gen_blobs_shift: wrong family");
  DomainShiftDataset ds;
  ds.num_classes = spec.num_classes;
  const std::size_t k = spec.num_classes;
  std::vector<int> unused;
  ds.source_x = blobs_points(spec.n_source, k, spec.noise_sigma, split_seed(spec.seed, Split::source),
                             ds.source_y);
  ds.target_x = scale_shift(blobs_points(spec.n_target, k, spec.noise_sigma,
                                         split_seed(spec.seed, Split::target), unused),
                            spec.scale, spec.shift_x, spec.shift_y);
  ds.test_x = scale_shift(blobs_points(spec.n_test, k, spec.noise_sigma,
                                       split_seed(spec.seed, Split::test), ds.test_y),
                          spec.scale, spec.shift_x, spec.shift_y);
  ds.provenance = "gauss_blobs k=" + std::to_string(k) + " shift=(" + format_double(spec.shift_x) +
                  "," + format_double(spec.shift_y) + ") scale=" + format_double(spec.scale) +
                  " noise=" + format_double(spec.noise_sigma) + " seed=" + std::to_string(spec.seed);
  ds.validate();
  return ds;
}

DomainShiftDataset generate(const ShiftSpec& spec) {
  return spec.family == Family::two_moons ? gen_two_moons_shift(spec) : gen_blobs_shift(spec);
}

// ---- CSV ------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back(text.substr(pos, end - pos));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

template <typename T>
T parse_number(std::string_view cell, std::size_t line, std::size_t col, const char* file) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  T value{};
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw ParseError(std::string(file) + ": non-numeric cell '" + std::string(cell) + "' at line " +
                     std::to_string(line) + ", column " + std::to_string(col));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(value)) {
      throw ParseError(std::string(file) + ": non-finite value at line " + std::to_string(line));
    }
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

CsvData parse_csv(std::string_view features_text, std::optional<std::string_view> labels_text) {
  const auto lines = split_lines(features_text);
  if (lines.empty()) throw ParseError("features: empty dataset");
  std::size_t width = 0;
  std::vector<double> values;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    std::size_t cols = 0;
    std::string_view rest = lines[li];
    while (true) {
      const std::size_t comma = rest.find(',');
      const std::string_view cell = rest.substr(0, comma);
      values.push_back(parse_number<double>(cell, li + 1, cols + 1, "features"));
      ++cols;
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (li == 0) {
      width = cols;
    } else if (cols != width) {
      throw ParseError("features: ragged row at line " + std::to_string(li + 1) + " (" +
                       std::to_string(cols) + " cells, expected " + std::to_string(width) + ")");
    }
  }
  CsvData out;
  out.features = Tensor({lines.size(), width}, std::move(values));
  if (labels_text) {
    const auto label_lines = split_lines(*labels_text);
    std::vector<int> labels;
    labels.reserve(label_lines.size());
    for (std::size_t li = 0; li < label_lines.size(); ++li) {
      labels.push_back(parse_number<int>(label_lines[li], li + 1, 1, "labels"));
    }
    if (labels.size() != lines.size()) {
      throw ParseError("labels: " + std::to_string(labels.size()) + " labels for " +
                       std::to_string(lines.size()) + " feature rows (mismatch at line " +
                       std::to_string(std::min(labels.size(), lines.size()) + 1) + ")");
    }
    out.labels = std::move(labels);
  }
  return out;
}

CsvData load_csv(const std::filesystem::path& features, const std::optional<std::filesystem::path>& labels) {
  const std::string ftext = read_file(features);
  if (labels) {
    const std::string ltext = read_file(*labels);
    return parse_csv(ftext, std::string_view(ltext));
  }
  return parse_csv(ftext, std::nullopt);
}

void write_csv(const std::filesystem::path& path, const Tensor& x) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (j) out << ',';
      out << format_double(x(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  for (int y : labels) out << y << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void export_dataset(const DomainShiftDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_csv(dir / "source_x.csv", ds.source_x);
  write_labels(dir / "source_y.csv", ds.source_y);
  write_csv(dir / "target_x.csv", ds.target_x);
  write_csv(dir / "test_x.csv", ds.test_x);
  write_labels(dir / "test_y.csv", ds.test_y);
}

DomainShiftDataset load_dataset(const CsvPaths& paths) {
  DomainShiftDataset ds;
  CsvData src = load_csv(paths.source_x, paths.source_y);
  CsvData tgt = load_csv(paths.target_x);
  CsvData tst = load_csv(paths.test_x, paths.test_y);
  ds.source_x = std::move(src.features);
  ds.source_y = std::move(*src.labels);
  ds.target_x = std::move(tgt.features);
  ds.test_x = std::move(tst.features);
  ds.test_y = std::move(*tst.labels);
  int k = 0;
  for (int y : ds.source_y) k = std::max(k, y);
  for (int y : ds.test_y) k = std::max(k, y);
  ds.num_classes = static_cast<std::size_t>(std::max(k, 0));
  ds.provenance = "csv " + paths.source_x.string();
  ds.validate();
  return ds;
}

// ---- preprocessing & batching ---------------------------------------------------

Tensor instance_normalize(const Tensor& x) {
  if (x.rank() != 2 || x.cols() < 2) {
    throw ContractError("instance_normalize needs rows of width >= 2, got " + ad::shape_string(x.shape()));
  }
  const std::size_t B = x.rows(), d = x.cols();
  Tensor out = x;
  for (std::size_t i = 0; i < B; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += x(i, j);
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + 1e-6);
    for (std::size_t j = 0; j < d; ++j) out(i, j) = (x(i, j) - mu) * inv;
  }
  return out;
}

void instance_normalize(DomainShiftDataset& ds) {
  ds.source_x = instance_normalize(ds.source_x);
  ds.target_x = instance_normalize(ds.target_x);
  ds.test_x = instance_normalize(ds.test_x);
}

BatchSampler::BatchSampler(std::size_t n, std::size_t batch, std::uint64_t seed, std::uint64_t stream_id)
    : n_(n), batch_(batch), seed_(seed), stream_(stream_id) {
  if (batch == 0) throw ContractError("batch size must be positive");
  if (n < batch) {
    throw ContractError("batch_sampler: dataset of " + std::to_string(n) +
                        " samples is smaller than batch " + std::to_string(batch));
  }
}

std::vector<std::size_t> BatchSampler::batch(std::uint64_t step) const {
  Rng rng(seed_, stream_, step);
  std::vector<std::size_t> pool(n_);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n_ - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(batch_);
  return pool;
}

}  // namespace gada::data

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "common/error.hpp"
#include "data/dataset.hpp"

using namespace gada;
using ad::Tensor;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("gada_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

void write(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

}  // namespace

TEST(TwoMoons, DefaultsAndBalance) {
  const auto ds = data::generate({});
  EXPECT_EQ(ds.num_classes, 2u);
  EXPECT_EQ(ds.source_x.rows(), 1000u);
  EXPECT_EQ(ds.target_x.rows(), 1000u);
  EXPECT_EQ(ds.test_x.rows(), 1000u);
  EXPECT_EQ(ds.dim(), 2u);
  std::size_t ones = 0;
  for (int y : ds.source_y) ones += y == 1 ? 1 : 0;
  EXPECT_LE(std::abs(static_cast<long>(ones) - 500), 1);
  EXPECT_NO_THROW(ds.validate());
}

TEST(TwoMoons, TargetIsRotatedSourceLaw) {
  data::ShiftSpec spec;
  spec.angle_deg = 30;
  const auto ds = data::generate(spec);
  std::vector<int> labels;
  const Tensor raw = data::two_moons_points(spec.n_target, spec.noise_sigma,
                                            data::split_seed(spec.seed, data::Split::target), labels);
  const double a = 30.0 * M_PI / 180.0;
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    EXPECT_NEAR(ds.target_x(i, 0), std::cos(a) * raw(i, 0) - std::sin(a) * raw(i, 1), 1e-12);
    EXPECT_NEAR(ds.target_x(i, 1), std::sin(a) * raw(i, 0) + std::cos(a) * raw(i, 1), 1e-12);
  }
}

TEST(TwoMoons, ZeroAngleLeavesTargetUnrotated) {
  data::ShiftSpec spec;
  spec.angle_deg = 0;
  const auto ds = data::generate(spec);
  std::vector<int> labels;
  const Tensor raw = data::two_moons_points(spec.n_test, spec.noise_sigma,
                                            data::split_seed(spec.seed, data::Split::test), labels);
  EXPECT_EQ(ds.test_x, raw);
  EXPECT_EQ(ds.test_y, labels);
}

TEST(TwoMoons, DeterministicInSeed) {
  data::ShiftSpec a, b;
  b.seed = 2;
  EXPECT_EQ(data::generate(a).source_x, data::generate(a).source_x);
  EXPECT_NE(data::generate(a).source_x, data::generate(b).source_x);
}

TEST(Blobs, LabelsCoverAllClasses) {
  data::ShiftSpec spec;
  spec.family = data::Family::gauss_blobs;
  spec.num_classes = 3;
  const auto ds = data::generate(spec);
  EXPECT_EQ(std::set<int>(ds.source_y.begin(), ds.source_y.end()), (std::set<int>{1, 2, 3}));
  EXPECT_EQ(std::set<int>(ds.test_y.begin(), ds.test_y.end()), (std::set<int>{1, 2, 3}));
}

TEST(Blobs, MeansSeparatedBySixSigma) {
  for (std::size_t k : {2u, 3u, 5u, 12u}) {
    for (double sigma : {0.05, 0.15, 0.5}) {
      const double r = data::blob_radius(k, sigma);
      // Closest pair of means on the circle.
      EXPECT_GE(2.0 * r * std::sin(M_PI / static_cast<double>(k)), 6.0 * sigma - 1e-12);
    }
  }
}

TEST(Blobs, ZeroShiftGivesIdenticalLaws) {
  data::ShiftSpec spec;
  spec.family = data::Family::gauss_blobs;
  spec.n_source = spec.n_target = 4000;
  const auto ds = data::generate(spec);
  for (std::size_t c = 0; c < 2; ++c) {
    double ms = 0, mt = 0;
    for (std::size_t i = 0; i < 4000; ++i) {
      ms += ds.source_x(i, c);
      mt += ds.target_x(i, c);
    }
    EXPECT_NEAR(ms / 4000, mt / 4000, 0.05);
  }
}

TEST(Blobs, TranslationAndScale) {
  data::ShiftSpec base;
  base.family = data::Family::gauss_blobs;
  data::ShiftSpec moved = base;
  moved.shift_x = 2.0;
  moved.shift_y = -1.0;
  moved.scale = 1.5;
  const auto a = data::generate(base), b = data::generate(moved);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_NEAR(b.target_x(i, 0), 1.5 * a.target_x(i, 0) + 2.0, 1e-12);
    EXPECT_NEAR(b.target_x(i, 1), 1.5 * a.target_x(i, 1) - 1.0, 1e-12);
  }
  EXPECT_EQ(a.source_x, b.source_x);
}

TEST(ShiftSpec, Validation) {
  data::ShiftSpec spec;
  spec.noise_sigma = -1;
  EXPECT_THROW(data::generate(spec), ContractError);
  spec = {};
  spec.n_source = 0;
  EXPECT_THROW(data::generate(spec), ContractError);
  EXPECT_THROW(data::parse_family("spirals"), ConfigError);
}

TEST(Csv, ParsesMatrix) {
  const auto d = data::parse_csv("1.0,2.0\n3.0,4.0", std::nullopt);
  EXPECT_EQ(d.features, Tensor::matrix({{1, 2}, {3, 4}}));
  EXPECT_FALSE(d.labels.has_value());
}

TEST(Csv, RaggedRowReportsLine) {
  try {
    data::parse_csv("1,2\n3\n", std::nullopt);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Csv, NonNumericCellReportsLine) {
  try {
    data::parse_csv("1,2\n3,4\n5,x\n", std::nullopt);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Csv, EmptyFile) { EXPECT_THROW(data::parse_csv("", std::nullopt), ParseError); }

TEST(Csv, LabelCountMismatch) {
  EXPECT_THROW(data::parse_csv("1,2\n3,4\n", std::string_view("1\n")), ParseError);
  const auto d = data::parse_csv("1,2\n3,4\n", std::string_view("1\n2\n"));
  EXPECT_EQ(*d.labels, (std::vector<int>{1, 2}));
}

TEST(Csv, ExportLoadRoundTrip) {
  const auto dir = temp_dir("csv_roundtrip");
  data::ShiftSpec spec;
  spec.n_source = spec.n_target = spec.n_test = 64;
  const auto ds = data::generate(spec);
  data::export_dataset(ds, dir);
  const auto back = data::load_dataset({dir / "source_x.csv", dir / "source_y.csv", dir / "target_x.csv",
                                        dir / "test_x.csv", dir / "test_y.csv"});
  EXPECT_EQ(back.source_x, ds.source_x);
  EXPECT_EQ(back.target_x, ds.target_x);
  EXPECT_EQ(back.test_y, ds.test_y);
  EXPECT_EQ(back.num_classes, 2u);
}

TEST(Csv, LoadMissingFile) {
  EXPECT_THROW(data::load_csv("/nonexistent/gada/x.csv"), IoError);
}

TEST(Csv, MissingSourceClassRejected) {
  const auto dir = temp_dir("csv_missing_class");
  write(dir / "sx.csv", "0,0\n1,1\n");
  write(dir / "sy.csv", "1\n1\n");
  write(dir / "tx.csv", "0,0\n");
  write(dir / "ex.csv", "0,0\n1,1\n");
  write(dir / "ey.csv", "1\n2\n");
  EXPECT_THROW(data::load_dataset({dir / "sx.csv", dir / "sy.csv", dir / "tx.csv", dir / "ex.csv", dir / "ey.csv"}),
               ContractError);
}

TEST(InstanceNorm, Examples) {
  const Tensor out = data::instance_normalize(Tensor::matrix({{1, 1, 1}, {0, 2, 0}}));
  EXPECT_EQ(out(0, 0), 0.0);
  EXPECT_EQ(out(0, 2), 0.0);
  const Tensor two = data::instance_normalize(Tensor::matrix({{0, 2}}));
  EXPECT_NEAR(two(0, 0), -1.0, 1e-3);
  EXPECT_NEAR(two(0, 1), 1.0, 1e-3);
  EXPECT_THROW(data::instance_normalize(Tensor::matrix({{1}, {2}})), ContractError);
}

TEST(InstanceNorm, ZeroMeanRowsAndIdempotence) {
  const auto ds = data::generate({});
  const Tensor once = data::instance_normalize(ds.source_x);
  const Tensor twice = data::instance_normalize(once);
  for (std::size_t r = 0; r < once.rows(); ++r) {
    EXPECT_NEAR(once(r, 0) + once(r, 1), 0.0, 1e-12);
  }
  // A second pass rescales a row of variance v by about 1 + 1e-6 / (2 v).
  for (std::size_t r = 0; r < once.rows(); ++r) {
    const double a = ds.source_x(r, 0), b = ds.source_x(r, 1);
    const double var = (a - b) * (a - b) / 4;
    for (std::size_t c = 0; c < 2; ++c) {
      const double diff = std::abs(once(r, c) - twice(r, c));
      EXPECT_LE(diff, 1e-6 / (2 * var) + 1e-9);
      if (var >= 0.05) EXPECT_LT(diff, 1e-5);
    }
  }
}

TEST(BatchSampler, DeterministicDistinctInRange) {
  data::BatchSampler a(100, 64, 5, 11), b(100, 64, 5, 11), c(100, 64, 5, 12);
  for (std::uint64_t step = 0; step < 20; ++step) {
    const auto ia = a.batch(step);
    EXPECT_EQ(ia, b.batch(step));
    EXPECT_NE(ia, c.batch(step));
    EXPECT_EQ(ia.size(), 64u);
    EXPECT_EQ(std::set<std::size_t>(ia.begin(), ia.end()).size(), 64u);
    for (auto i : ia) EXPECT_LT(i, 100u);
  }
}

TEST(BatchSampler, CursorAndSeek) {
  data::BatchSampler s(50, 8, 1, 2);
  const auto b0 = s.next();
  const auto b1 = s.next();
  EXPECT_EQ(s.cursor(), 2u);
  s.seek(1);
  EXPECT_EQ(s.next(), b1);
  EXPECT_EQ(b0, s.batch(0));
}

TEST(BatchSampler, TooFewSamples) { EXPECT_THROW(data::BatchSampler(10, 11, 1, 1), ContractError); }

TEST(BatchSampler, SamplesUniformlyAcrossSteps) {
  data::BatchSampler s(20, 5, 3, 4);
  std::vector<std::size_t> counts(20, 0);
  for (std::uint64_t step = 0; step < 4000; ++step)
    for (auto i : s.batch(step)) ++counts[i];
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c), 1000.0, 120.0);
}

#ifndef GADA_BENCH_FEATURES_HPP
#define GADA_BENCH_FEATURES_HPP

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "autodiff/tensor.hpp"
#include "data/dataset.hpp"
#include "trainer/trainer.hpp"

namespace gada::bench {

struct FeatureRow {
  std::string split;  // "source", "target" or "generated"
  int label = -1;     // -1 for unlabeled rows
  std::vector<double> phi;
  double pc1 = 0.0;
  double pc2 = 0.0;
};

struct FeatureTable {
  std::size_t dim = 0;
  std::vector<FeatureRow> rows;
};

// Projection of the rows of x onto its top two principal components. The
// sign of each component is fixed so that its largest-magnitude loading is
// positive. Components beyond the data rank come out as zero.
std::vector<std::array<double, 2>> pca2(const ad::Tensor& x);

// phi(x) for up to n rows each of source, labeled target test and generated
// samples, with a 2-D PCA fitted on their union. Generated rows get label -1.
FeatureTable export_features(const train::TrainState& state, const data::DomainShiftDataset& ds,
                             std::size_t n_per_split);

std::string feature_csv(const FeatureTable& table);
FeatureTable parse_feature_csv(std::string_view text);
void write_feature_csv(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable load_feature_csv(const std::filesystem::path& path);

// Scatter of (pc1, pc2): color by label, marker by split, with a legend.
std::string scatter_svg(const FeatureTable& table, std::string_view title = "");

struct Separation {
  double value = 0.0;
  double between = 0.0;  // mean pairwise centroid distance
  double within = 0.0;   // mean distance of a sample to its class centroid
  std::size_t classes = 0;
  std::vector<std::string> warnings;
};

// Between-centroid over within-class spread of labeled target rows in phi.
Separation cluster_separation(const FeatureTable& table);

}  // namespace gada::bench

#endif  // GADA_BENCH_FEATURES_HPP

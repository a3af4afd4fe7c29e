#ifndef GADA_TRAINER_TRAINER_HPP
#define GADA_TRAINER_TRAINER_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "nets/adam.hpp"
#include "nets/models.hpp"
#include "trainer/hyper.hpp"

namespace gada::train {

// Random stream ids. Each draw is seeded from (hp.seed, stream, step), so a
// disabled component consumes nothing and no stream position needs saving
// beyond the step counters.
enum class Stream : std::uint64_t {
  s1_source = 11,
  s1_target = 12,
  s1_noise = 13,
  s1_vat_source = 14,
  s1_vat_target = 15,
  s2_source = 21,
  s2_target = 22,
  s3_noise = 31,
  s3_target = 32,
  dirt_target = 41,
  dirt_vat = 42,
  export_noise = 51,
};

struct NetBundle {
  nets::ClassifierModel classifier;        // theta_g, theta_h
  nets::DiscriminatorModel discriminator;  // theta_D
  nets::GeneratorModel generator;          // theta_G
  nets::AdamState classifier_opt;
  nets::AdamState discriminator_opt;
  nets::AdamState generator_opt;

  static NetBundle create(const HyperParams& hp, std::size_t input_dim, std::size_t num_classes);
  bool operator==(const NetBundle&) const = default;
};

struct Evaluation {
  std::uint64_t step = 0;
  std::string phase;  // "train" or "refine"
  double accuracy = 0.0;
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
  bool operator==(const Evaluation&) const = default;
};

struct TrainState {
  HyperParams hp;
  KeyValues config_echo;  // full configuration that produced this state
  std::size_t num_classes = 0;
  std::size_t input_dim = 0;
  NetBundle nets;
  std::uint64_t step = 0;       // completed S1-S3 iterations
  std::uint64_t dirt_step = 0;  // completed refinement iterations
  std::optional<ad::ParamStore> teacher;
  std::map<std::string, std::vector<double>> traces;
  std::vector<Evaluation> evaluations;

  static TrainState create(const HyperParams& hp, const data::DomainShiftDataset& ds);
  bool operator==(const TrainState&) const = default;
};

struct MetricsReport {
  std::vector<Evaluation> evaluations;
  Evaluation final_eval;
};

// Prediction is the argmax over the first K logits.
Evaluation evaluate(const nets::ClassifierModel& model, const ad::Tensor& x, const std::vector<int>& y);
Evaluation evaluate(const TrainState& state, const data::DomainShiftDataset& ds);

// One S1/S2/S3 iteration of the alternating scheme.
void train_step(TrainState& state, const data::DomainShiftDataset& ds);

// Runs hp.steps iterations from a fresh state, evaluating every
// eval_interval steps (and at step 0 and at the end).
TrainState train(const HyperParams& hp, const data::DomainShiftDataset& ds);

// Continues an existing state up to state.hp.steps iterations.
void resume(TrainState& state, const data::DomainShiftDataset& ds);

// Target-side refinement with a periodically refreshed frozen teacher:
// minimize lambda_t [L_v + L_e] + beta * KL(teacher || student) on target.
void dirtt_refine(TrainState& state, const data::DomainShiftDataset& ds, const HyperParams& hp);
void dirtt_step(TrainState& state, const data::DomainShiftDataset& ds, const HyperParams& hp);

MetricsReport report(const TrainState& state);

// Standard normal noise batch for a given stream and step.
ad::Tensor noise_batch(std::size_t rows, std::size_t dim, std::uint64_t seed, Stream stream,
                       std::uint64_t step);

// Dataset after the preprocessing the hyperparameters call for.
data::DomainShiftDataset prepare(const data::DomainShiftDataset& ds, const HyperParams& hp);

// Metrics document: config echo, per-evaluation rows with the latest loss
// values, and the final confusion matrix. Contains no wall-clock data.
std::string metrics_json(const TrainState& state);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);
std::string serialize_checkpoint(const TrainState& state);
TrainState parse_checkpoint(std::string_view bytes);

}  // namespace gada::train

#endif  // GADA_TRAINER_TRAINER_HPP

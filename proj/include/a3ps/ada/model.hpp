#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "a3ps/advice/corpus.hpp"
#include "a3ps/blend/blend.hpp"
#include "a3ps/env/frogger.hpp"
#include "a3ps/nn/layers.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::ada {

struct AdaConfig {
  int frame_size = 0;
  int vocab_size = 0;
  int state_hidden = 64;
  int embedding = 32;
  int text_hidden = 64;
  int fusion_hidden = 64;
  // Zeroed output layer gives all-zero scores before training.
  bool zero_init_output = false;
  env::ObservationMode mode = env::ObservationMode::Features;
  int patch = 10;
  int patch_features = 4;

  void validate() const;
};

// One input: a single state frame and encoded advice tokens.
struct AdaInput {
  const std::vector<double>* features = nullptr;
  const std::vector<int>* tokens = nullptr;
};

class AdaModel {
 public:
  AdaModel(const AdaConfig& cfg, Rng& rng);

  // B x 5 action scores.
  nn::Var forward(nn::Tape& tape, const std::vector<AdaInput>& batch) const;
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  const AdaConfig& config() const { return cfg_; }

 private:
  AdaConfig cfg_;
  nn::PatchEncoder patches_;
  nn::Linear state_encoder_;
  nn::Embedding embedding_;
  nn::GruCell text_encoder_;
  nn::Linear fusion_;
  nn::Linear output_;
};

// A_adv for one state frame and token list (empty lists encode as PAD).
blend::ActionScores action_scores(const AdaModel& model, const std::vector<double>& features,
                                  const std::vector<int>& tokens);

struct AdaTrainConfig {
  double learning_rate = 1e-3;
  int epochs = 15;
  int batch_size = 32;
  // Epochs without tune-loss improvement before stopping; 0 disables.
  int patience = 8;
  double label_smoothing = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double tune_loss = 0.0;
  double tune_accuracy = 0.0;
  bool operator==(const EpochMetrics&) const = default;
};

struct TrainReport {
  std::vector<EpochMetrics> epochs;
  int best_epoch = -1;
};

struct Example {
  std::vector<double> features;
  std::vector<int> tokens;
  int label = 0;
};

std::vector<Example> make_examples(const std::vector<advice::AdviceRecord>& records, const advice::Vocabulary& vocab);

// Minibatch Adam on cross-entropy. With a non-empty tune set the parameters
// with the lowest tune loss are restored at the end; otherwise the final
// parameters are kept.
TrainReport train_supervised(AdaModel& model, const std::vector<Example>& train, const std::vector<Example>& tune,
                             const AdaTrainConfig& cfg);

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
  std::size_t count = 0;
  // confusion[label][predicted]
  std::array<std::array<std::size_t, env::kNumActions>, env::kNumActions> confusion{};
};

Evaluation evaluate(const AdaModel& model, const std::vector<Example>& examples);

// Parameters plus the architecture needed to rebuild the model.
void save_model(const std::filesystem::path& path, const AdaModel& model);
AdaModel load_model(const std::filesystem::path& path);

}  // namespace a3ps::ada

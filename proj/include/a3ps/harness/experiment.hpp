#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "a3ps/ada/model.hpp"
#include "a3ps/advice/templates.hpp"
#include "a3ps/blend/blend.hpp"
#include "a3ps/eda/ppo.hpp"
#include "a3ps/env/frogger.hpp"
#include "a3ps/env/oracle.hpp"
#include "a3ps/harness/logs.hpp"

namespace a3ps::harness {

enum class AgentMode { EdaOnly, A3ps };

std::string_view agent_mode_name(AgentMode m);
AgentMode agent_mode_from_name(std::string_view name);

// Overrides the default output directory when set.
inline constexpr const char* kOutputDirEnv = "A3PS_OUT_DIR";
std::filesystem::path default_output_dir();

inline constexpr int kConfigFormatVersion = 1;

struct ExperimentConfig {
  env::EnvConfig env = env::EnvConfig::standard();
  env::RewardMode reward = env::RewardMode::Dense;
  env::ObservationMode observation = env::ObservationMode::Features;
  AgentMode mode = AgentMode::EdaOnly;
  std::int64_t episodes = 2000;
  blend::AlphaSchedule alpha = desk_alpha();
  blend::SelectMode select = blend::SelectMode::Sample;
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  eda::PpoConfig ppo = desk_ppo();
  // Learning rate decays linearly from ppo.learning_rate to zero over the run.
  bool lr_anneal = true;
  int embedding = 64;
  int hidden = 64;
  bool shared_encoder = true;
  int smoothing_window = 100;
  std::filesystem::path ada_checkpoint;
  std::filesystem::path vocabulary;
  std::filesystem::path output_dir;
  // Episodes between resumable checkpoints; 0 disables.
  int checkpoint_every = 0;

  // Alpha schedule for 2000-episode runs: 0.6 decaying by 0.2 every 300
  // episodes, zero from episode 900.
  static blend::AlphaSchedule desk_alpha();
  // 0.6 decaying by 0.2 every 2000 episodes, zero from episode 6000.
  static blend::AlphaSchedule long_alpha();
  // PPO settings used for 2000-episode runs.
  static eda::PpoConfig desk_ppo();

  void validate() const;
  // Stable listing of every setting: "key = value" lines use the run
  // command's option names so the text loads back as a config file; the
  // environment geometry follows as comment lines.
  std::string describe() const;
  eda::ActorCriticConfig actor_critic() const;
  env::RewardConfig reward_config() const;
};

// Frozen advice pipeline: template generator over the planner, the token
// vocabulary and the trained classifier.
class Advisor {
 public:
  Advisor(const env::EnvConfig& cfg, advice::Vocabulary vocab, ada::AdaModel model);

  blend::ActionScores scores(const env::GridState& state) const;
  std::string advice_for(const env::GridState& state) const;
  std::uint64_t checksum() const;
  const ada::AdaModel& model() const { return model_; }

 private:
  env::EnvConfig cfg_;
  env::OraclePolicy oracle_;
  advice::Vocabulary vocab_;
  ada::AdaModel model_;
};

// Loads the classifier and vocabulary named by the config; FileError when
// either is missing.
std::unique_ptr<Advisor> load_advisor(const ExperimentConfig& cfg);

inline constexpr std::size_t kDefaultCorpusSize = 1935;

// Template corpus over the dense-reward planner of cfg.
std::vector<advice::AdviceRecord> build_template_corpus(const env::EnvConfig& cfg, std::size_t n, std::uint64_t seed);

struct Pretrained {
  advice::Vocabulary vocab;
  ada::AdaModel model;
  ada::TrainReport report;
  ada::Evaluation train;
  ada::Evaluation tune;
};

// Vocabulary from the training split, then a classifier trained on it.
Pretrained pretrain_ada(const env::EnvConfig& cfg, const std::vector<advice::AdviceRecord>& corpus,
                        const ada::AdaTrainConfig& train_cfg, std::uint64_t model_seed);

struct UpdateLog {
  int update = 0;
  std::int64_t episode = 0;  // last episode included in the rollout
  std::size_t samples = 0;
  eda::PpoStats stats;
};

struct RunOptions {
  // Stop (after checkpointing) once this many episodes are complete; -1 runs
  // to the configured count.
  std::int64_t stop_after = -1;
  // Continue from the seed's checkpoint in output_dir when one exists.
  bool resume = false;
};

struct SeedResult {
  std::uint64_t seed = 0;
  std::vector<EpisodeLog> episodes;
  std::vector<UpdateLog> updates;
  bool completed = false;
  std::shared_ptr<eda::ActorCritic> model;
  std::optional<std::uint64_t> advisor_checksum_before;
  std::optional<std::uint64_t> advisor_checksum_after;
};

std::filesystem::path seed_csv_path(const std::filesystem::path& dir, std::uint64_t seed);

// Trains a fresh agent for one seed. With an output directory the episode
// CSV is appended as episodes finish, update statistics and the final model
// are written, and checkpoints are taken every checkpoint_every episodes.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const Advisor* advisor,
                    const RunOptions& options = {});

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const Advisor* advisor,
                                       const RunOptions& options = {});

// Greedy EDA-only episode (alpha forced to 0) with the given reset seed.
eda::EpisodeResult greedy_episode(const ExperimentConfig& cfg, const eda::ActorCritic& model, std::uint64_t seed);

}  // namespace a3ps::harness

#include "a3ps/harness/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "a3ps/advice/corpus.hpp"
#include "a3ps/advice/text.hpp"
#include "a3ps/errors.hpp"
#include "a3ps/nn/checkpoint.hpp"

namespace a3ps::harness {

using nlohmann::json;

std::string_view agent_mode_name(AgentMode m) { return m == AgentMode::EdaOnly ? "eda" : "a3ps"; }

AgentMode agent_mode_from_name(std::string_view name) {
  if (name == "eda") return AgentMode::EdaOnly;
  if (name == "a3ps") return AgentMode::A3ps;
  throw ConfigError("unknown agent mode '" + std::string(name) + "'");
}

std::filesystem::path default_output_dir() {
  if (const char* v = std::getenv(kOutputDirEnv); v && *v) return v;
  return "runs";
}

blend::AlphaSchedule ExperimentConfig::desk_alpha() {
  blend::AlphaSchedule s;
  s.decay_interval = 300;
  return s;
}

blend::AlphaSchedule ExperimentConfig::long_alpha() { return blend::AlphaSchedule{}; }

eda::PpoConfig ExperimentConfig::desk_ppo() {
  eda::PpoConfig p;
  p.learning_rate = 3e-3;
  p.rollout_length = 128;
  p.minibatch_size = 32;
  p.reward_scale = 0.01;
  return p;
}

void ExperimentConfig::validate() const {
  env.validate();
  ppo.validate();
  alpha.validate();
  if (episodes < 1) throw ConfigError("episodes must be > 0");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (smoothing_window < 1) throw ConfigError("smoothing window must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint interval must be >= 0");
  if (mode == AgentMode::A3ps && (ada_checkpoint.empty() || vocabulary.empty())) {
    throw ConfigError("a3ps mode requires an ADA checkpoint and vocabulary");
  }
  actor_critic().validate();
}

std::string ExperimentConfig::describe() const {
  std::ostringstream o;
  auto list = [](const auto& xs) {
    std::string s;
    for (const auto& x : xs) s += (s.empty() ? "" : ", ") + std::to_string(x);
    return s;
  };
  auto quoted = [](const std::filesystem::path& p) { return '"' + p.generic_string() + '"'; };
  o << "[run]\n"
    << "format-version = " << kConfigFormatVersion << '\n'
    << "mode = " << agent_mode_name(mode) << '\n'
    << "reward = " << env::reward_mode_name(reward) << '\n'
    << "observation = " << (observation == env::ObservationMode::Features ? "features" : "pixels") << '\n'
    << "episodes = " << episodes << '\n'
    << "seed = [" << list(seeds) << "]\n"
    << "select = " << (select == blend::SelectMode::Sample ? "sample" : "greedy") << '\n'
    << "alpha0 = " << format_number(alpha.alpha0) << '\n'
    << "alpha-decay = " << format_number(alpha.decay_step) << '\n'
    << "alpha-interval = " << alpha.decay_interval << '\n'
    << "alpha-floor = " << format_number(alpha.floor) << '\n'
    << "max-steps = " << env.max_steps << '\n'
    << "gamma = " << format_number(ppo.gamma) << '\n'
    << "gae-lambda = " << format_number(ppo.gae_lambda) << '\n'
    << "clip-epsilon = " << format_number(ppo.clip_epsilon) << '\n'
    << "ppo-epochs = " << ppo.epochs_per_update << '\n'
    << "minibatch = " << ppo.minibatch_size << '\n'
    << "rollout = " << ppo.rollout_length << '\n'
    << "value-coeff = " << format_number(ppo.value_loss_coeff) << '\n'
    << "entropy-coeff = " << format_number(ppo.entropy_coeff) << '\n'
    << "lr = " << format_number(ppo.learning_rate) << '\n'
    << "lr-anneal = " << (lr_anneal ? "true" : "false") << '\n'
    << "reward-scale = " << format_number(ppo.reward_scale) << '\n'
    << "ratio-target = " << (ppo.ratio_target == eda::RatioTarget::Behavior ? "behavior" : "eda") << '\n'
    << "embedding = " << embedding << '\n'
    << "hidden = " << hidden << '\n'
    << "shared-encoder = " << (shared_encoder ? "true" : "false") << '\n'
    << "smoothing = " << smoothing_window << '\n'
    << "ada = " << quoted(ada_checkpoint) << '\n'
    << "vocab = " << quoted(vocabulary) << '\n'
    << "checkpoint-every = " << checkpoint_every << '\n';
  o << "# grid " << env.rows << " rows x " << env.cols << " cols, goal row " << env.goal_row() << ", tunnel row "
    << env.tunnel_row << " cols " << list(env.tunnel_cols) << '\n';
  for (std::size_t r = 0; r < env.lanes.size(); ++r) {
    const env::Lane& l = env.lanes[r];
    o << "# lane " << r << ": direction " << static_cast<int>(l.direction) << " period " << l.period << " phase "
      << l.phase << " offsets " << (l.offsets.empty() ? std::string("none") : list(l.offsets)) << '\n';
  }
  return o.str();
}

eda::ActorCriticConfig ExperimentConfig::actor_critic() const {
  eda::ActorCriticConfig c = eda::ActorCriticConfig::for_env(env, observation);
  c.embedding = embedding;
  c.hidden = hidden;
  c.shared_encoder = shared_encoder;
  return c;
}

env::RewardConfig ExperimentConfig::reward_config() const {
  return reward == env::RewardMode::Dense ? env::RewardConfig::dense() : env::RewardConfig::sparse();
}

Advisor::Advisor(const env::EnvConfig& cfg, advice::Vocabulary vocab, ada::AdaModel model)
    : cfg_(cfg),
      oracle_(env::solve_oracle(cfg, env::RewardConfig::dense())),
      vocab_(std::move(vocab)),
      model_(std::move(model)) {
  const ada::AdaConfig& mc = model_.config();
  if (mc.vocab_size != static_cast<int>(vocab_.size())) {
    throw ConfigError("ADA vocabulary size " + std::to_string(mc.vocab_size) + " does not match vocabulary file (" +
                      std::to_string(vocab_.size()) + ")");
  }
  if (mc.frame_size != env::frame_size(cfg_, mc.mode)) {
    throw ConfigError("ADA state input does not match the environment grid");
  }
}

std::string Advisor::advice_for(const env::GridState& state) const {
  return advice::generate_advice(state, advice::default_rules(), oracle_).text;
}

blend::ActionScores Advisor::scores(const env::GridState& state) const {
  const std::vector<double> features = model_.config().mode == env::ObservationMode::Features
                                           ? env::feature_frame(cfg_, state)
                                           : env::pixel_frame(cfg_, state);
  return ada::action_scores(model_, features, vocab_.encode(advice::preprocess(advice_for(state))));
}

std::uint64_t Advisor::checksum() const {
  auto params = const_cast<ada::AdaModel&>(model_).parameters();
  return nn::parameter_checksum(params);
}

std::unique_ptr<Advisor> load_advisor(const ExperimentConfig& cfg) {
  if (!std::filesystem::exists(cfg.ada_checkpoint)) {
    throw FileError("ADA checkpoint not found: " + cfg.ada_checkpoint.string());
  }
  if (!std::filesystem::exists(cfg.vocabulary)) throw FileError("vocabulary not found: " + cfg.vocabulary.string());
  return std::make_unique<Advisor>(cfg.env, advice::load_vocabulary(cfg.vocabulary),
                                   ada::load_model(cfg.ada_checkpoint));
}

std::vector<advice::AdviceRecord> build_template_corpus(const env::EnvConfig& cfg, std::size_t n,
                                                        std::uint64_t seed) {
  const env::OraclePolicy oracle = env::solve_oracle(cfg, env::RewardConfig::dense());
  return advice::build_corpus(cfg, advice::default_rules(), oracle, n, seed);
}

Pretrained pretrain_ada(const env::EnvConfig& cfg, const std::vector<advice::AdviceRecord>& corpus,
                        const ada::AdaTrainConfig& train_cfg, std::uint64_t model_seed) {
  advice::Vocabulary vocab = advice::build_vocab(corpus);
  const auto train = ada::make_examples(advice::select_split(corpus, advice::Split::Train), vocab);
  const auto tune = ada::make_examples(advice::select_split(corpus, advice::Split::Tune), vocab);
  ada::AdaConfig ac;
  ac.frame_size = env::feature_frame_size(cfg);
  ac.vocab_size = static_cast<int>(vocab.size());
  Rng rng(model_seed);
  ada::AdaModel model(ac, rng);
  ada::TrainReport report = ada::train_supervised(model, train, tune, train_cfg);
  ada::Evaluation tr = ada::evaluate(model, train);
  ada::Evaluation tu = tune.empty() ? ada::Evaluation{} : ada::evaluate(model, tune);
  return {std::move(vocab), std::move(model), std::move(report), tr, tu};
}

std::filesystem::path seed_csv_path(const std::filesystem::path& dir, std::uint64_t seed) {
  return dir / ("seed_" + std::to_string(seed) + ".csv");
}

namespace {

std::filesystem::path seed_file(const std::filesystem::path& dir, std::uint64_t seed, const std::string& suffix) {
  return dir / ("seed_" + std::to_string(seed) + suffix);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string updates_csv(const std::vector<UpdateLog>& updates) {
  std::string out = "update,episode,samples,mean_ratio,clip_fraction,policy_loss,value_loss,entropy,total_loss\n";
  for (const UpdateLog& u : updates) {
    out += std::to_string(u.update) + ',' + std::to_string(u.episode) + ',' + std::to_string(u.samples) + ',' +
           format_number(u.stats.mean_ratio) + ',' + format_number(u.stats.clip_fraction) + ',' +
           format_number(u.stats.policy_loss) + ',' + format_number(u.stats.value_loss) + ',' +
           format_number(u.stats.entropy) + ',' + format_number(u.stats.total_loss) + '\n';
  }
  return out;
}

// Everything that evolves during a seed's training run.
struct TrainerState {
  std::shared_ptr<eda::ActorCritic> model;
  nn::AdamState optimizer;
  eda::RolloutBuffer buffer;
  Rng act_rng;
  Rng update_rng;
  std::vector<EpisodeLog> episodes;
  std::vector<UpdateLog> updates;
};

nn::Tensor column(const std::vector<double>& v) {
  return nn::Tensor::matrix(v.size(), 1, v);
}

void save_state(const std::filesystem::path& dir, std::uint64_t seed, std::uint64_t config_hash,
                const TrainerState& st) {
  const std::vector<nn::Parameter*> params = st.model->parameters();
  std::vector<nn::NamedTensor> tensors = nn::snapshot(params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    tensors.push_back({"adam.m." + params[i]->name, st.optimizer.first_moment[i]});
    tensors.push_back({"adam.v." + params[i]->name, st.optimizer.second_moment[i]});
  }
  const eda::RolloutBuffer& b = st.buffer;
  const std::size_t n = b.size();
  if (n > 0) {
    const std::size_t fs = b.observations.front().frames.size();
    const std::size_t gs = b.observations.front().goal_vector.size();
    nn::Tensor frames = nn::Tensor::zeros(n, fs), goals = nn::Tensor::zeros(n, gs);
    nn::Tensor advice = nn::Tensor::zeros(n, env::kNumActions);
    std::vector<double> actions, terminals;
    for (std::size_t i = 0; i < n; ++i) {
      std::copy(b.observations[i].frames.begin(), b.observations[i].frames.end(), frames.data() + i * fs);
      std::copy(b.observations[i].goal_vector.begin(), b.observations[i].goal_vector.end(), goals.data() + i * gs);
      for (int j = 0; j < env::kNumActions; ++j) advice(i, j) = b.advice[i][j];
      actions.push_back(b.actions[i]);
      terminals.push_back(b.terminals[i]);
    }
    tensors.push_back({"buffer.frames", std::move(frames)});
    tensors.push_back({"buffer.goals", std::move(goals)});
    tensors.push_back({"buffer.actions", column(actions)});
    tensors.push_back({"buffer.log_probs", column(b.log_probs)});
    tensors.push_back({"buffer.behavior_log_probs", column(b.behavior_log_probs)});
    tensors.push_back({"buffer.alphas", column(b.alphas)});
    tensors.push_back({"buffer.advice", std::move(advice)});
    tensors.push_back({"buffer.rewards", column(b.rewards)});
    tensors.push_back({"buffer.values", column(b.values)});
    tensors.push_back({"buffer.terminals", column(terminals)});
  }

  json j;
  j["version"] = 1;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["next_episode"] = st.episodes.size();
  j["adam_step"] = st.optimizer.step;
  j["buffer_size"] = n;
  j["buffer_frame_size"] = n ? b.observations.front().frame_size : 0;
  j["buffer_pixel"] = n ? b.observations.front().pixel : false;
  j["rng_act"] = st.act_rng.serialize();
  j["rng_update"] = st.update_rng.serialize();
  json eps = json::array();
  for (const EpisodeLog& e : st.episodes) eps.push_back({e.episode, e.reward, e.steps, e.reached_goal, e.alpha});
  j["episodes"] = eps;
  json ups = json::array();
  for (const UpdateLog& u : st.updates) {
    ups.push_back({u.update, u.episode, u.samples, u.stats.mean_ratio, u.stats.clip_fraction, u.stats.policy_loss,
                   u.stats.value_loss, u.stats.entropy, u.stats.total_loss, u.stats.minibatches});
  }
  j["updates"] = ups;

  const auto weights = seed_file(dir, seed, "_checkpoint.nnck");
  const auto meta = seed_file(dir, seed, "_checkpoint.json");
  nn::save_checkpoint(weights.string() + ".tmp", tensors);
  write_text(meta.string() + ".tmp", j.dump());
  std::filesystem::rename(weights.string() + ".tmp", weights);
  std::filesystem::rename(meta.string() + ".tmp", meta);
}

bool load_state(const std::filesystem::path& dir, std::uint64_t seed, std::uint64_t config_hash, TrainerState& st) {
  const auto weights = seed_file(dir, seed, "_checkpoint.nnck");
  const auto meta = seed_file(dir, seed, "_checkpoint.json");
  if (!std::filesystem::exists(weights) || !std::filesystem::exists(meta)) return false;
  json j;
  try {
    j = json::parse(read_text(meta));
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what(), 1);
  }
  if (j.at("version").get<int>() != 1) throw ParseError("unsupported checkpoint metadata version", 1);
  if (j.at("seed").get<std::uint64_t>() != seed) throw ConfigError("checkpoint belongs to another seed");
  if (j.at("config_hash").get<std::uint64_t>() != config_hash) {
    throw ConfigError("checkpoint was written under a different configuration");
  }
  const std::vector<nn::NamedTensor> tensors = nn::load_checkpoint(weights);
  std::unordered_map<std::string, const nn::Tensor*> by_name;
  for (const nn::NamedTensor& t : tensors) by_name[t.name] = &t.tensor;
  auto get = [&](const std::string& name) -> const nn::Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ContractError("checkpoint lacks tensor '" + name + "'");
    return *it->second;
  };

  const std::vector<nn::Parameter*> params = st.model->parameters();
  nn::restore(params, tensors);
  st.optimizer.step = j.at("adam_step").get<std::int64_t>();
  for (std::size_t i = 0; i < params.size(); ++i) {
    st.optimizer.first_moment[i] = get("adam.m." + params[i]->name);
    st.optimizer.second_moment[i] = get("adam.v." + params[i]->name);
  }

  st.buffer.clear();
  const auto n = j.at("buffer_size").get<std::size_t>();
  if (n > 0) {
    const nn::Tensor& frames = get("buffer.frames");
    const nn::Tensor& goals = get("buffer.goals");
    const int fs = j.at("buffer_frame_size").get<int>();
    const bool pixel = j.at("buffer_pixel").get<bool>();
    for (std::size_t i = 0; i < n; ++i) {
      env::Observation o;
      o.frame_size = fs;
      o.pixel = pixel;
      o.frames.assign(frames.data() + i * frames.cols(), frames.data() + (i + 1) * frames.cols());
      o.goal_vector.assign(goals.data() + i * goals.cols(), goals.data() + (i + 1) * goals.cols());
      st.buffer.append(std::move(o), static_cast<int>(get("buffer.actions")[i]), get("buffer.log_probs")[i],
                       get("buffer.rewards")[i], get("buffer.values")[i], get("buffer.terminals")[i] != 0.0);
      st.buffer.behavior_log_probs.back() = get("buffer.behavior_log_probs")[i];
      st.buffer.alphas.back() = get("buffer.alphas")[i];
      for (int j = 0; j < env::kNumActions; ++j) st.buffer.advice.back()[j] = get("buffer.advice")(i, j);
    }
  }
  st.act_rng.deserialize(j.at("rng_act").get<std::string>());
  st.update_rng.deserialize(j.at("rng_update").get<std::string>());

  st.episodes.clear();
  for (const json& e : j.at("episodes")) {
    EpisodeLog l;
    l.episode = e.at(0).get<std::int64_t>();
    l.reward = e.at(1).get<double>();
    l.steps = e.at(2).get<int>();
    l.reached_goal = e.at(3).get<bool>();
    l.alpha = e.at(4).get<double>();
    st.episodes.push_back(l);
  }
  st.updates.clear();
  for (const json& u : j.at("updates")) {
    UpdateLog l;
    l.update = u.at(0).get<int>();
    l.episode = u.at(1).get<std::int64_t>();
    l.samples = u.at(2).get<std::size_t>();
    l.stats.mean_ratio = u.at(3).get<double>();
    l.stats.clip_fraction = u.at(4).get<double>();
    l.stats.policy_loss = u.at(5).get<double>();
    l.stats.value_loss = u.at(6).get<double>();
    l.stats.entropy = u.at(7).get<double>();
    l.stats.total_loss = u.at(8).get<double>();
    l.stats.minibatches = u.at(9).get<int>();
    st.updates.push_back(l);
  }
  if (st.episodes.size() != j.at("next_episode").get<std::size_t>()) {
    throw ContractError("checkpoint episode log is inconsistent");
  }
  return true;
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const Advisor* advisor,
                    const RunOptions& options) {
  cfg.validate();
  if (cfg.mode == AgentMode::A3ps && !advisor) throw ContractError("a3ps mode needs an advisor");
  const std::uint64_t config_hash = fnv1a(cfg.describe());
  const bool write = !cfg.output_dir.empty();
  if (write) std::filesystem::create_directories(cfg.output_dir);

  TrainerState st;
  Rng init(mix_seed(seed, 0xA11));
  st.model = std::make_shared<eda::ActorCritic>(cfg.actor_critic(), init);
  st.optimizer = eda::make_optimizer(*st.model, cfg.ppo);
  st.act_rng = Rng(mix_seed(seed, 0xAC7));
  st.update_rng = Rng(mix_seed(seed, 0x0D));
  if (options.resume && write) load_state(cfg.output_dir, seed, config_hash, st);

  SeedResult result;
  result.seed = seed;
  if (advisor) result.advisor_checksum_before = advisor->checksum();

  std::ofstream csv;
  std::vector<double> rewards = rewards_of(st.episodes);
  if (write) {
    const auto path = seed_csv_path(cfg.output_dir, seed);
    write_text(path, st.episodes.empty() ? std::string(kCsvHeader) + '\n' : format_csv(st.episodes, cfg.smoothing_window));
    csv.open(path, std::ios::binary | std::ios::app);
    if (!csv) throw FileError("cannot append to " + path.string());
  }

  env::FroggerEnv env(cfg.env, cfg.reward_config(), cfg.observation);
  eda::ActingOptions acting;
  acting.mode = cfg.select;
  if (cfg.mode == AgentMode::A3ps) {
    acting.advice = [advisor](const env::GridState& s, const env::Observation&) { return advisor->scores(s); };
  }
  const std::uint64_t episode_stream = mix_seed(seed, 0xE9);
  const std::int64_t stop = options.stop_after < 0 ? cfg.episodes : std::min(cfg.episodes, options.stop_after);

  for (auto ep = static_cast<std::int64_t>(st.episodes.size()); ep < stop; ++ep) {
    const auto t0 = std::chrono::steady_clock::now();
    acting.alpha = cfg.mode == AgentMode::A3ps ? blend::alpha_at(cfg.alpha, ep) : 0.0;
    const eda::EpisodeResult r = eda::run_episode(env, *st.model, mix_seed(episode_stream, static_cast<std::uint64_t>(ep)),
                                                  acting, st.act_rng, &st.buffer);
    if (st.buffer.size() >= static_cast<std::size_t>(cfg.ppo.rollout_length)) {
      eda::compute_advantages(st.buffer, cfg.ppo);
      UpdateLog u;
      u.update = static_cast<int>(st.updates.size());
      u.episode = ep;
      u.samples = st.buffer.size();
      st.optimizer.config.learning_rate =
          cfg.lr_anneal ? cfg.ppo.learning_rate * (1.0 - static_cast<double>(ep) / static_cast<double>(cfg.episodes))
                        : cfg.ppo.learning_rate;
      u.stats = eda::ppo_update(*st.model, st.buffer, cfg.ppo, st.optimizer, st.update_rng);
      st.updates.push_back(u);
      st.buffer.clear();
    }
    EpisodeLog log{ep, r.reward, r.steps, r.reached_goal, acting.alpha,
                   std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()};
    st.episodes.push_back(log);
    rewards.push_back(log.reward);
    if (write) {
      csv << csv_row(log, trailing_mean(rewards, rewards.size() - 1, cfg.smoothing_window)) << '\n';
      csv.flush();
      const bool at_interval = cfg.checkpoint_every > 0 && (ep + 1) % cfg.checkpoint_every == 0;
      const bool interrupted = ep + 1 == stop && stop < cfg.episodes;
      if (at_interval || interrupted) save_state(cfg.output_dir, seed, config_hash, st);
    }
  }

  result.completed = static_cast<std::int64_t>(st.episodes.size()) == cfg.episodes;
  if (write) {
    write_text(seed_file(cfg.output_dir, seed, "_updates.csv"), updates_csv(st.updates));
    if (result.completed) nn::save_parameters(seed_file(cfg.output_dir, seed, "_final.nnck"), st.model->parameters());
  }
  if (advisor) result.advisor_checksum_after = advisor->checksum();
  result.episodes = std::move(st.episodes);
  result.updates = std::move(st.updates);
  result.model = st.model;
  return result;
}

std::vector<SeedResult> run_experiment(const ExperimentConfig& cfg, const Advisor* advisor,
                                       const RunOptions& options) {
  cfg.validate();
  std::vector<SeedResult> results;
  std::vector<NamedSeries> curves;
  for (std::uint64_t seed : cfg.seeds) {
    results.push_back(run_seed(cfg, seed, advisor, options));
    curves.push_back({"seed_" + std::to_string(seed),
                      smooth_curve(rewards_of(results.back().episodes), cfg.smoothing_window)});
  }
  if (!cfg.output_dir.empty()) {
    write_text(cfg.output_dir / "config.ini", cfg.describe());
    emit_plotdata(cfg.output_dir / "plotdata.csv", curves);
  }
  return results;
}

eda::EpisodeResult greedy_episode(const ExperimentConfig& cfg, const eda::ActorCritic& model, std::uint64_t seed) {
  env::FroggerEnv env(cfg.env, cfg.reward_config(), cfg.observation);
  eda::ActingOptions acting;
  acting.mode = blend::SelectMode::Greedy;
  Rng unused(0);
  return eda::run_episode(env, model, seed, acting, unused, nullptr);
}

}  // namespace a3ps::harness

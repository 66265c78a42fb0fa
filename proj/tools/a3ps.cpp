#include <cstdio>
#include <iostream>
#include <map>

#include "CLI11.hpp"

#include "a3ps/advice/corpus.hpp"
#include "a3ps/errors.hpp"
#include "a3ps/harness/compare.hpp"
#include "a3ps/harness/experiment.hpp"

using namespace a3ps;

namespace {

const std::map<std::string, env::RewardMode> kRewardModes{{"dense", env::RewardMode::Dense},
                                                          {"sparse", env::RewardMode::Sparse}};
const std::map<std::string, harness::AgentMode> kAgentModes{{"eda", harness::AgentMode::EdaOnly},
                                                            {"a3ps", harness::AgentMode::A3ps}};
const std::map<std::string, env::ObservationMode> kObservationModes{{"features", env::ObservationMode::Features},
                                                                    {"pixels", env::ObservationMode::Pixels}};
const std::map<std::string, blend::SelectMode> kSelectModes{{"sample", blend::SelectMode::Sample},
                                                            {"greedy", blend::SelectMode::Greedy}};
const std::map<std::string, eda::RatioTarget> kRatioTargets{{"behavior", eda::RatioTarget::Behavior},
                                                            {"eda", eda::RatioTarget::Eda}};

const char* cause_name(env::TerminalCause c) {
  switch (c) {
    case env::TerminalCause::Goal: return "at the goal";
    case env::TerminalCause::Collision: return "in a collision";
    case env::TerminalCause::Timeout: return "at the step cap";
    case env::TerminalCause::None: break;
  }
  return "running";
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

void print_confusion(const ada::Evaluation& e) {
  std::cout << "label\\pred";
  for (env::Action a : env::kAllActions) std::cout << '\t' << env::action_name(a);
  std::cout << '\n';
  for (int l = 0; l < env::kNumActions; ++l) {
    std::cout << env::action_name(env::action_at(l));
    for (int p = 0; p < env::kNumActions; ++p) std::cout << '\t' << e.confusion[l][p];
    std::cout << '\n';
  }
}

struct CorpusBuildArgs {
  std::size_t size = harness::kDefaultCorpusSize;
  std::uint64_t seed = 0;
  std::string out = "corpus.jsonl";
};

struct AdaArgs {
  std::string corpus = "corpus.jsonl";
  std::string model = "ada.nnck";
  std::string vocab = "vocab.json";
  ada::AdaTrainConfig train;
  std::uint64_t model_seed = 0;
  std::string split = "tune";
};

struct RunArgs {
  harness::ExperimentConfig cfg;
  std::string out;
  int format_version = harness::kConfigFormatVersion;
  bool resume = false;
  std::int64_t stop_after = -1;
};

void add_corpus_commands(CLI::App& app) {
  CLI::App* corpus = app.add_subcommand("corpus", "Build or inspect advice corpora");
  corpus->require_subcommand(1);

  auto build = std::make_shared<CorpusBuildArgs>();
  CLI::App* b = corpus->add_subcommand("build", "Generate a template advice corpus from reachable states");
  b->add_option("--size", build->size, "Number of records")->capture_default_str();
  b->add_option("--seed", build->seed, "Sampling seed")->capture_default_str();
  b->add_option("--out", build->out, "Corpus file")->capture_default_str();
  b->callback([build] {
    const auto records = harness::build_template_corpus(env::EnvConfig::standard(), build->size, build->seed);
    advice::save_corpus(build->out, records);
    std::cout << "wrote " << records.size() << " records (" << advice::train_count(records.size()) << " train, "
              << records.size() - advice::train_count(records.size()) << " tune) to " << build->out << '\n';
  });

  auto path = std::make_shared<std::string>();
  auto show = std::make_shared<std::size_t>(5);
  CLI::App* i = corpus->add_subcommand("inspect", "Summarize a corpus file");
  i->add_option("corpus", *path, "Corpus file")->required();
  i->add_option("--show", *show, "Records to print")->capture_default_str();
  i->callback([path, show] {
    const auto records = advice::load_corpus(*path);
    std::array<std::size_t, env::kNumActions> per_action{};
    std::size_t train = 0;
    for (const auto& r : records) {
      ++per_action[env::index_of(r.action)];
      train += r.split == advice::Split::Train;
    }
    std::cout << records.size() << " records, " << train << " train, " << records.size() - train << " tune\n";
    for (env::Action a : env::kAllActions) {
      std::cout << "  " << env::action_name(a) << ": " << per_action[env::index_of(a)] << '\n';
    }
    std::cout << "vocabulary " << advice::build_vocab(records).size() << " entries\n";
    for (std::size_t k = 0; k < std::min(*show, records.size()); ++k) {
      const auto& r = records[k];
      std::cout << "  [" << advice::split_name(r.split) << "] agent (" << r.state.agent.row << ',' << r.state.agent.col
                << ") " << env::action_name(r.action) << ": " << r.advice << '\n';
    }
  });
}

void add_ada_commands(CLI::App& app) {
  CLI::App* ada_cmd = app.add_subcommand("ada", "Pretrain or evaluate the advice-driven classifier");
  ada_cmd->require_subcommand(1);

  auto args = std::make_shared<AdaArgs>();
  CLI::App* t = ada_cmd->add_subcommand("train", "Train on the corpus training split");
  t->add_option("--corpus", args->corpus, "Corpus file")->capture_default_str();
  t->add_option("--model", args->model, "Output checkpoint")->capture_default_str();
  t->add_option("--vocab", args->vocab, "Output vocabulary")->capture_default_str();
  t->add_option("--epochs", args->train.epochs)->capture_default_str();
  t->add_option("--batch", args->train.batch_size)->capture_default_str();
  t->add_option("--lr", args->train.learning_rate)->capture_default_str();
  t->add_option("--patience", args->train.patience)->capture_default_str();
  t->add_option("--shuffle-seed", args->train.seed)->capture_default_str();
  t->add_option("--label-smoothing", args->train.label_smoothing)->capture_default_str();
  t->add_option("--seed", args->model_seed, "Initialization seed")->capture_default_str();
  t->callback([args] {
    const auto records = advice::load_corpus(args->corpus);
    const harness::Pretrained p =
        harness::pretrain_ada(env::EnvConfig::standard(), records, args->train, args->model_seed);
    for (const auto& m : p.report.epochs) {
      std::cout << "epoch " << m.epoch << " train loss " << m.train_loss << " acc " << pct(m.train_accuracy)
                << " tune loss " << m.tune_loss << " acc " << pct(m.tune_accuracy) << '\n';
    }
    std::cout << "kept epoch " << p.report.best_epoch << ": train " << pct(p.train.accuracy) << ", tune "
              << pct(p.tune.accuracy) << '\n';
    ada::save_model(args->model, p.model);
    advice::save_vocabulary(args->vocab, p.vocab);
    std::cout << "wrote " << args->model << " and " << args->vocab << '\n';
  });

  auto eval = std::make_shared<AdaArgs>();
  CLI::App* e = ada_cmd->add_subcommand("eval", "Accuracy and confusion counts on a corpus split");
  e->add_option("--corpus", eval->corpus)->capture_default_str();
  e->add_option("--model", eval->model)->capture_default_str();
  e->add_option("--vocab", eval->vocab)->capture_default_str();
  e->add_option("--split", eval->split)->check(CLI::IsMember({"train", "tune"}))->capture_default_str();
  e->callback([eval] {
    const auto records = advice::load_corpus(eval->corpus);
    const advice::Vocabulary vocab = advice::load_vocabulary(eval->vocab);
    const ada::AdaModel model = ada::load_model(eval->model);
    const auto split = eval->split == "train" ? advice::Split::Train : advice::Split::Tune;
    const auto examples = ada::make_examples(advice::select_split(records, split), vocab);
    const ada::Evaluation r = ada::evaluate(model, examples);
    std::cout << eval->split << ": " << r.count << " records, accuracy " << pct(r.accuracy) << ", loss " << r.loss
              << '\n';
    print_confusion(r);
  });
}

void add_run_command(CLI::App& app) {
  auto a = std::make_shared<RunArgs>();
  harness::ExperimentConfig& c = a->cfg;
  CLI::App* r = app.add_subcommand("run", "Train EDA-only or A3PS agents and log every episode");
  // --config belongs to the top-level app; keys in its [run] section fill
  // these options unless given on the command line.
  r->fallthrough();
  r->add_option("--format-version", a->format_version)->group("")->check(CLI::Range(1, 1));
  r->add_option("--mode", c.mode)->transform(CLI::CheckedTransformer(kAgentModes))->capture_default_str();
  r->add_option("--reward", c.reward)->transform(CLI::CheckedTransformer(kRewardModes))->capture_default_str();
  r->add_option("--observation", c.observation)
      ->transform(CLI::CheckedTransformer(kObservationModes))
      ->capture_default_str();
  r->add_option("--episodes", c.episodes)->capture_default_str();
  r->add_option("--seed", c.seeds, "One or more seeds")->capture_default_str();
  r->add_option("--select", c.select)->transform(CLI::CheckedTransformer(kSelectModes))->capture_default_str();
  r->add_option("--alpha0", c.alpha.alpha0)->capture_default_str();
  r->add_option("--alpha-decay", c.alpha.decay_step)->capture_default_str();
  r->add_option("--alpha-interval", c.alpha.decay_interval)->capture_default_str();
  r->add_option("--alpha-floor", c.alpha.floor)->capture_default_str();
  r->add_option("--max-steps", c.env.max_steps)->capture_default_str();
  r->add_option("--gamma", c.ppo.gamma)->capture_default_str();
  r->add_option("--gae-lambda", c.ppo.gae_lambda)->capture_default_str();
  r->add_option("--clip-epsilon", c.ppo.clip_epsilon)->capture_default_str();
  r->add_option("--ppo-epochs", c.ppo.epochs_per_update)->capture_default_str();
  r->add_option("--minibatch", c.ppo.minibatch_size)->capture_default_str();
  r->add_option("--rollout", c.ppo.rollout_length)->capture_default_str();
  r->add_option("--value-coeff", c.ppo.value_loss_coeff)->capture_default_str();
  r->add_option("--entropy-coeff", c.ppo.entropy_coeff)->capture_default_str();
  r->add_option("--lr", c.ppo.learning_rate)->capture_default_str();
  r->add_option("--lr-anneal", c.lr_anneal, "Decay the learning rate linearly to zero")->capture_default_str();
  r->add_option("--reward-scale", c.ppo.reward_scale)->capture_default_str();
  r->add_option("--ratio-target", c.ppo.ratio_target)
      ->transform(CLI::CheckedTransformer(kRatioTargets))
      ->capture_default_str();
  r->add_option("--embedding", c.embedding)->capture_default_str();
  r->add_option("--hidden", c.hidden)->capture_default_str();
  r->add_option("--shared-encoder", c.shared_encoder)->capture_default_str();
  r->add_option("--smoothing", c.smoothing_window)->capture_default_str();
  r->add_option("--ada", c.ada_checkpoint, "ADA checkpoint (a3ps mode)");
  r->add_option("--vocab", c.vocabulary, "Vocabulary file (a3ps mode)");
  r->add_option("--checkpoint-every", c.checkpoint_every, "Episodes between checkpoints, 0 = off")
      ->capture_default_str();
  r->add_option("--out", a->out, std::string("Output directory (default $") + harness::kOutputDirEnv + " or runs)");
  r->add_flag("--resume", a->resume, "Continue from checkpoints in the output directory");
  r->add_option("--stop-after", a->stop_after, "Stop each seed after this many episodes");
  r->callback([a] {
    harness::ExperimentConfig cfg = a->cfg;
    cfg.output_dir = a->out.empty() ? harness::default_output_dir() : std::filesystem::path(a->out);
    cfg.validate();
    std::unique_ptr<harness::Advisor> advisor;
    if (cfg.mode == harness::AgentMode::A3ps) advisor = harness::load_advisor(cfg);
    harness::RunOptions opts;
    opts.resume = a->resume;
    opts.stop_after = a->stop_after;
    const auto results = harness::run_experiment(cfg, advisor.get(), opts);
    for (const auto& s : results) {
      const harness::RunSummary sum = harness::summarize(s.episodes, cfg.smoothing_window, 500);
      std::cout << "seed " << s.seed << ": " << s.episodes.size() << " episodes, " << s.updates.size()
                << " updates, first goal "
                << (sum.first_goal ? std::to_string(*sum.first_goal) : std::string("never"))
                << ", final goal rate " << pct(sum.final_goal_rate) << '\n';
    }
    std::cout << "logs in " << cfg.output_dir.string() << '\n';
  });
}

void add_compare_command(CLI::App& app) {
  struct Args {
    std::string a3ps, eda;
    int smoothing = 100, final_window = 500;
    harness::CompareThresholds thresholds;
  };
  auto a = std::make_shared<Args>();
  CLI::App* c = app.add_subcommand("compare", "Compare an A3PS run directory against an EDA-only one");
  c->add_option("a3ps_dir", a->a3ps, "A3PS run directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("eda_dir", a->eda, "EDA-only run directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--smoothing", a->smoothing)->capture_default_str();
  c->add_option("--final-window", a->final_window)->capture_default_str();
  c->add_option("--eda-max-rate", a->thresholds.eda_final_rate_max)->capture_default_str();
  c->add_option("--a3ps-min-rate", a->thresholds.a3ps_final_rate_min)->capture_default_str();
  c->callback([a] {
    const auto report = harness::compare_runs(harness::read_run_dir(a->a3ps), harness::read_run_dir(a->eda),
                                              a->smoothing, a->final_window, a->thresholds);
    std::cout << harness::format_report(report);
  });
}

void add_oracle_command(CLI::App& app) {
  CLI::App* o = app.add_subcommand("oracle", "Tabular planner over the default traffic");
  o->require_subcommand(1);
  auto reward = std::make_shared<env::RewardMode>(env::RewardMode::Dense);
  auto seed = std::make_shared<std::uint64_t>(0);
  CLI::App* s = o->add_subcommand("solve", "Run value iteration and show the greedy rollout");
  s->add_option("--reward", *reward)->transform(CLI::CheckedTransformer(kRewardModes));
  s->add_option("--seed", *seed, "Reset seed of the demonstrated episode")->capture_default_str();
  s->callback([reward, seed] {
    const env::EnvConfig cfg = env::EnvConfig::standard();
    const env::RewardConfig rc =
        *reward == env::RewardMode::Dense ? env::RewardConfig::dense() : env::RewardConfig::sparse();
    const env::OraclePolicy oracle = env::solve_oracle(cfg, rc);
    const auto reachable = env::reachable_keys(oracle);
    std::cout << oracle.size() << " keys, " << reachable.size() << " reachable, " << oracle.sweeps()
              << " sweeps, residual " << oracle.residual() << '\n';
    env::FroggerEnv e(cfg, rc);
    e.reset(*seed);
    std::cout << "start value " << oracle.lookup(e.state()).value << "\nrollout:";
    double total = 0.0;
    while (!e.needs_reset()) {
      const env::Action act = oracle.lookup(e.state()).action;
      total += e.step(act).reward;
      std::cout << ' ' << env::action_name(act);
    }
    std::cout << "\nreturn " << total << ", ended " << cause_name(e.state().terminal) << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Advice-shaped PPO on a Frogger gridworld"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Settings file for run (key = value under [run]); flags take precedence");
  add_corpus_commands(app);
  add_ada_commands(app);
  add_run_command(app);
  add_compare_command(app);
  add_oracle_command(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const FileError& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

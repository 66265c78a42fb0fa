#include "a3ps/ada/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "a3ps/errors.hpp"
#include "a3ps/nn/adam.hpp"
#include "a3ps/nn/checkpoint.hpp"

namespace a3ps::ada {

void AdaConfig::validate() const {
  if (frame_size < 1) throw ConfigError("ADA frame_size must be positive");
  if (vocab_size < 2) throw ConfigError("ADA vocabulary must hold the reserved entries");
  if (state_hidden < 1 || embedding < 1 || text_hidden < 1 || fusion_hidden < 1) {
    throw ConfigError("ADA layer sizes must be positive");
  }
  if (mode == env::ObservationMode::Pixels &&
      (patch < 1 || env::kPixelSide % patch != 0 || patch_features < 1 ||
       frame_size != env::kPixelSide * env::kPixelSide * 3)) {
    throw ConfigError("ADA pixel encoder settings are inconsistent");
  }
}

AdaModel::AdaModel(const AdaConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  auto state_in = static_cast<std::size_t>(cfg.frame_size);
  if (cfg.mode == env::ObservationMode::Pixels) {
    patches_ = nn::PatchEncoder("ada.patches", env::kPixelSide, 3, static_cast<std::size_t>(cfg.patch),
                                static_cast<std::size_t>(cfg.patch_features), rng);
    state_in = patches_.output_size();
  }
  state_encoder_ = nn::Linear("ada.state", state_in, static_cast<std::size_t>(cfg.state_hidden), rng);
  embedding_ = nn::Embedding("ada.embedding", static_cast<std::size_t>(cfg.vocab_size),
                             static_cast<std::size_t>(cfg.embedding), rng);
  text_encoder_ = nn::GruCell("ada.text", static_cast<std::size_t>(cfg.embedding),
                              static_cast<std::size_t>(cfg.text_hidden), rng);
  fusion_ = nn::Linear("ada.fusion", static_cast<std::size_t>(cfg.state_hidden + cfg.text_hidden),
                       static_cast<std::size_t>(cfg.fusion_hidden), rng);
  output_ = nn::Linear("ada.output", static_cast<std::size_t>(cfg.fusion_hidden), env::kNumActions, rng);
  if (cfg.zero_init_output) output_.zero_init();
}

nn::Var AdaModel::forward(nn::Tape& tape, const std::vector<AdaInput>& batch) const {
  if (batch.empty()) throw ContractError("ADA forward: empty batch");
  const std::size_t b = batch.size();
  const auto fs = static_cast<std::size_t>(cfg_.frame_size);
  nn::Tensor states = nn::Tensor::zeros(b, fs);
  std::size_t steps = 1;
  for (std::size_t i = 0; i < b; ++i) {
    if (!batch[i].features || batch[i].features->size() != fs) {
      throw ShapeError("ADA state features must have " + std::to_string(fs) + " values");
    }
    std::copy(batch[i].features->begin(), batch[i].features->end(), states.data() + i * fs);
    if (batch[i].tokens) steps = std::max(steps, batch[i].tokens->size());
  }

  // Sequences are left-aligned; rows that run out of tokens are held by
  // their mask. Empty sequences read a single PAD.
  std::vector<nn::Var> xs, masks;
  bool ragged = false;
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<int> ids(b, advice::Vocabulary::kPad);
    nn::Tensor mask = nn::Tensor::zeros(b, 1);
    for (std::size_t i = 0; i < b; ++i) {
      const std::vector<int>* tok = batch[i].tokens;
      const std::size_t len = tok ? tok->size() : 0;
      if (t < len) {
        const int id = (*tok)[t];
        if (id < 0 || id >= cfg_.vocab_size) throw ShapeError("ADA token index outside the vocabulary");
        ids[i] = id;
        mask[i] = 1.0;
      } else if (t == 0) {
        mask[i] = 1.0;
      } else {
        ragged = true;
      }
    }
    xs.push_back(embedding_(tape, ids));
    masks.push_back(tape.constant(std::move(mask)));
  }
  const nn::Var text = ragged ? text_encoder_.run(tape, xs, masks) : text_encoder_.run(tape, xs);

  nn::Var s = tape.constant(std::move(states));
  if (cfg_.mode == env::ObservationMode::Pixels) s = patches_(tape, s);
  const nn::Var state = nn::relu(state_encoder_(tape, s));
  const nn::Var fused = nn::relu(fusion_(tape, nn::concat_cols({state, text})));
  return output_(tape, fused);
}

std::vector<nn::Parameter*> AdaModel::parameters() {
  std::vector<nn::Parameter*> out;
  if (cfg_.mode == env::ObservationMode::Pixels) out = patches_.parameters();
  for (nn::Linear* l : {&state_encoder_}) {
    for (auto* p : l->parameters()) out.push_back(p);
  }
  for (auto* p : embedding_.parameters()) out.push_back(p);
  for (auto* p : text_encoder_.parameters()) out.push_back(p);
  for (auto* p : fusion_.parameters()) out.push_back(p);
  for (auto* p : output_.parameters()) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> AdaModel::parameters() const {
  const auto mutable_params = const_cast<AdaModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

blend::ActionScores action_scores(const AdaModel& model, const std::vector<double>& features,
                                  const std::vector<int>& tokens) {
  nn::Tape tape(false);
  const nn::Var out = model.forward(tape, {AdaInput{&features, &tokens}});
  blend::ActionScores s{};
  for (int a = 0; a < env::kNumActions; ++a) s[a] = out.value()[a];
  return s;
}

void AdaTrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("ADA learning rate must be positive");
  if (epochs < 1 || batch_size < 1 || patience < 0) throw ConfigError("ADA epochs and batch size must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("ADA label smoothing must be in [0, 1)");
}

std::vector<Example> make_examples(const std::vector<advice::AdviceRecord>& records, const advice::Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const advice::AdviceRecord& r : records) {
    out.push_back({r.features, vocab.encode(r.tokens), env::index_of(r.action)});
  }
  return out;
}

namespace {

std::vector<AdaInput> inputs_for(const std::vector<Example>& data, std::span<const std::size_t> idx) {
  std::vector<AdaInput> in;
  in.reserve(idx.size());
  for (std::size_t i : idx) in.push_back({&data[i].features, &data[i].tokens});
  return in;
}

}  // namespace

Evaluation evaluate(const AdaModel& model, const std::vector<Example>& examples) {
  Evaluation e;
  e.count = examples.size();
  if (examples.empty()) return e;
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx(examples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t start = 0; start < idx.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, idx.size() - start);
    const std::span<const std::size_t> chunk(idx.data() + start, len);
    nn::Tape tape(false);
    const nn::Var logits = model.forward(tape, inputs_for(examples, chunk));
    const nn::Tensor logp = nn::log_softmax(logits).value();
    for (std::size_t r = 0; r < len; ++r) {
      const Example& ex = examples[chunk[r]];
      std::size_t best = 0;
      for (std::size_t c = 1; c < env::kNumActions; ++c) {
        if (logp(r, c) > logp(r, best)) best = c;
      }
      if (static_cast<int>(best) == ex.label) ++correct;
      ++e.confusion[static_cast<std::size_t>(ex.label)][best];
      loss -= logp(r, static_cast<std::size_t>(ex.label));
    }
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  e.loss = loss / static_cast<double>(examples.size());
  return e;
}

TrainReport train_supervised(AdaModel& model, const std::vector<Example>& train, const std::vector<Example>& tune,
                             const AdaTrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw ContractError("train_supervised: empty training split");
  const std::vector<nn::Parameter*> params = model.parameters();
  nn::AdamConfig ac;
  ac.learning_rate = cfg.learning_rate;
  nn::AdamState opt(params, ac);
  Rng rng(cfg.seed);

  TrainReport report;
  std::vector<nn::NamedTensor> best;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<int> labels;
      labels.reserve(len);
      for (std::size_t i : idx) labels.push_back(train[i].label);
      nn::Tape tape;
      const nn::Var loss = nn::cross_entropy_logits(model.forward(tape, inputs_for(train, idx)), labels, cfg.label_smoothing);
      tape.backward(loss);
      nn::adam_step(params, opt);
    }

    const Evaluation tr = evaluate(model, train);
    EpochMetrics m{epoch, tr.loss, tr.accuracy, 0.0, 0.0};
    if (!tune.empty()) {
      const Evaluation tu = evaluate(model, tune);
      m.tune_loss = tu.loss;
      m.tune_accuracy = tu.accuracy;
      if (tu.loss < best_loss) {
        best_loss = tu.loss;
        best = nn::snapshot(params);
        report.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      report.best_epoch = epoch;
    }
    report.epochs.push_back(m);
    if (cfg.patience > 0 && since_best >= cfg.patience) break;
  }
  if (!best.empty()) nn::restore(params, best);
  return report;
}

namespace {

constexpr const char* kMetaName = "ada.meta";

}  // namespace

void save_model(const std::filesystem::path& path, const AdaModel& model) {
  const AdaConfig& c = model.config();
  std::vector<nn::NamedTensor> tensors;
  tensors.push_back({kMetaName, nn::Tensor::row({static_cast<double>(c.frame_size), static_cast<double>(c.vocab_size),
                                                 static_cast<double>(c.state_hidden), static_cast<double>(c.embedding),
                                                 static_cast<double>(c.text_hidden),
                                                 static_cast<double>(c.fusion_hidden),
                                                 c.mode == env::ObservationMode::Pixels ? 1.0 : 0.0,
                                                 static_cast<double>(c.patch),
                                                 static_cast<double>(c.patch_features)})});
  for (const nn::Parameter* p : model.parameters()) tensors.push_back({p->name, p->value});
  nn::save_checkpoint(path, tensors);
}

AdaModel load_model(const std::filesystem::path& path) {
  const std::vector<nn::NamedTensor> tensors = nn::load_checkpoint(path);
  auto meta = std::find_if(tensors.begin(), tensors.end(), [](const nn::NamedTensor& t) { return t.name == kMetaName; });
  if (meta == tensors.end() || meta->tensor.size() != 9) throw ContractError("ADA checkpoint lacks architecture data");
  const auto& v = meta->tensor.values();
  AdaConfig c;
  c.frame_size = static_cast<int>(v[0]);
  c.vocab_size = static_cast<int>(v[1]);
  c.state_hidden = static_cast<int>(v[2]);
  c.embedding = static_cast<int>(v[3]);
  c.text_hidden = static_cast<int>(v[4]);
  c.fusion_hidden = static_cast<int>(v[5]);
  c.mode = v[6] != 0.0 ? env::ObservationMode::Pixels : env::ObservationMode::Features;
  c.patch = static_cast<int>(v[7]);
  c.patch_features = static_cast<int>(v[8]);
  Rng rng(0);
  AdaModel model(c, rng);
  nn::restore(model.parameters(), tensors);
  return model;
}

}  // namespace a3ps::ada

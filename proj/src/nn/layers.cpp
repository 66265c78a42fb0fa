#include "a3ps/nn/layers.hpp"

#include <cmath>

#include "a3ps/errors.hpp"

namespace a3ps::nn {

Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(name + ".weight", uniform_init(in, out, in, rng)),
      bias(name + ".bias", uniform_init(1, out, in, rng)) {}

Var Linear::operator()(Tape& tape, Var x) const { return affine(x, tape.param(weight), tape.param(bias)); }

void Linear::zero_init() {
  weight.value.fill(0.0);
  bias.value.fill(0.0);
}

Embedding::Embedding(const std::string& name, std::size_t vocab, std::size_t dim, Rng& rng)
    : table(name + ".table", Tensor::zeros(vocab, dim)) {
  for (double& v : table.value.values()) v = rng.uniform(-0.5, 0.5);
}

Var Embedding::operator()(Tape& tape, const std::vector<int>& indices) const {
  return embed(tape.param(table), indices);
}

GruCell::GruCell(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng)
    : w_input(name + ".w_input", uniform_init(input, 3 * hidden, hidden, rng)),
      w_hidden(name + ".w_hidden", uniform_init(hidden, 3 * hidden, hidden, rng)),
      b_input(name + ".b_input", uniform_init(1, 3 * hidden, hidden, rng)),
      b_hidden(name + ".b_hidden", uniform_init(1, 3 * hidden, hidden, rng)) {}

Var GruCell::step(Tape& tape, Var x, Var h) const {
  const std::size_t hs = hidden_size();
  const Var gx = affine(x, tape.param(w_input), tape.param(b_input));
  const Var gh = affine(h, tape.param(w_hidden), tape.param(b_hidden));
  const Var r = sigmoid(add(slice_cols(gx, 0, hs), slice_cols(gh, 0, hs)));
  const Var z = sigmoid(add(slice_cols(gx, hs, hs), slice_cols(gh, hs, hs)));
  const Var n = nn::tanh(add(slice_cols(gx, 2 * hs, hs), mul(r, slice_cols(gh, 2 * hs, hs))));
  return add(mul(one_minus(z), n), mul(z, h));
}

Var GruCell::run(Tape& tape, const std::vector<Var>& xs, const std::vector<Var>& masks) const {
  if (xs.empty()) throw ContractError("GruCell::run: empty sequence");
  if (!masks.empty() && masks.size() != xs.size()) throw ShapeError("GruCell::run: one mask per step required");
  Var h = tape.constant(Tensor::zeros(xs.front().rows(), hidden_size()));
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const Var next = step(tape, xs[t], h);
    // h + m * (h' - h) keeps finished rows unchanged.
    h = masks.empty() ? next : add(h, mul(sub(next, h), masks[t]));
  }
  return h;
}

PatchEncoder::PatchEncoder(const std::string& name, std::size_t side_, std::size_t channels_, std::size_t patch_,
                           std::size_t features_per_patch, Rng& rng)
    : side(side_),
      channels(channels_),
      patch(patch_),
      weight(name + ".weight", uniform_init(patch_ * patch_ * channels_, features_per_patch,
                                            patch_ * patch_ * channels_, rng)),
      bias(name + ".bias", uniform_init(1, features_per_patch, patch_ * patch_ * channels_, rng)) {
  if (patch == 0 || side % patch) throw ConfigError("patch size must divide the image side");
}

Var PatchEncoder::operator()(Tape& tape, Var images) const {
  return relu(patch_affine(images, tape.param(weight), tape.param(bias), side, side, channels, patch));
}

std::size_t PatchEncoder::output_size() const {
  return (side / patch) * (side / patch) * weight.value.cols();
}

}  // namespace a3ps::nn

#pragma once

#include <string>
#include <vector>

#include "a3ps/nn/ops.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::nn {

// Weights drawn uniformly from +-1/sqrt(fan_in).
Tensor uniform_init(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var operator()(Tape& tape, Var x) const;
  void zero_init();
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::size_t in_features() const { return weight.value.rows(); }
  std::size_t out_features() const { return weight.value.cols(); }

  Parameter weight;
  Parameter bias;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(const std::string& name, std::size_t vocab, std::size_t dim, Rng& rng);

  Var operator()(Tape& tape, const std::vector<int>& indices) const;
  std::vector<Parameter*> parameters() { return {&table}; }
  std::size_t vocab_size() const { return table.value.rows(); }
  std::size_t dim() const { return table.value.cols(); }

  Parameter table;
};

// Gated recurrent cell:
//   r = sigmoid(x Wr + h Ur + br), z = sigmoid(x Wz + h Uz + bz)
//   n = tanh(x Wn + bn + r * (h Un + cn)), h' = (1 - z) * n + z * h
class GruCell {
 public:
  GruCell() = default;
  GruCell(const std::string& name, std::size_t input, std::size_t hidden, Rng& rng);

  Var step(Tape& tape, Var x, Var h) const;
  // Runs over xs from a zero state. masks[t] (B x 1, 0/1) freezes rows whose
  // sequence has ended; pass an empty vector when all sequences are full.
  Var run(Tape& tape, const std::vector<Var>& xs, const std::vector<Var>& masks = {}) const;

  std::vector<Parameter*> parameters() { return {&w_input, &w_hidden, &b_input, &b_hidden}; }
  std::size_t hidden_size() const { return w_hidden.value.rows(); }
  std::size_t input_size() const { return w_input.value.rows(); }

  Parameter w_input;   // input x 3H  (r, z, n blocks)
  Parameter w_hidden;  // H x 3H
  Parameter b_input;   // 1 x 3H
  Parameter b_hidden;  // 1 x 3H
};

// Shared affine map over non-overlapping square patches of an RGB image,
// followed by ReLU. Used for pixel observations.
class PatchEncoder {
 public:
  PatchEncoder() = default;
  PatchEncoder(const std::string& name, std::size_t side, std::size_t channels, std::size_t patch,
               std::size_t features_per_patch, Rng& rng);

  Var operator()(Tape& tape, Var images) const;
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  std::size_t output_size() const;

  std::size_t side = 0;
  std::size_t channels = 0;
  std::size_t patch = 0;
  Parameter weight;
  Parameter bias;
};

}  // namespace a3ps::nn

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "a3ps/nn/tape.hpp"

namespace a3ps::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::span<Parameter* const> params, AdamConfig cfg);

  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update over params (same order as the state was
// built with). Every parameter must hold a gradient; gradients are zeroed.
void adam_step(std::span<Parameter* const> params, AdamState& state);

void zero_grad(std::span<Parameter* const> params);

}  // namespace a3ps::nn

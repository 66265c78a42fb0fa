#pragma once

#include <functional>
#include <span>

#include "a3ps/nn/tape.hpp"
#include "a3ps/rng.hpp"

namespace a3ps::nn {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates beyond this count are subsampled uniformly.
  std::size_t max_coordinates = 10'000;
  // Denominator floor: error = |analytic - numeric| / max(|analytic|, |numeric|, floor).
  double floor = 1e-4;
  std::uint64_t seed = 0;
};

// loss builds a scalar on the given tape from the current parameter values.
// Compares backward() against central finite differences and returns the
// largest relative error found.
double gradient_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                      const GradCheckOptions& options = {});

}  // namespace a3ps::nn

#include "a3ps/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace a3ps::nn {

double gradient_check(const std::function<Var(Tape&)>& loss, std::span<Parameter* const> params,
                      const GradCheckOptions& options) {
  for (const Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<Tensor> analytic;
  for (const Parameter* p : params) analytic.push_back(p->grad);
  for (const Parameter* p : params) p->zero_grad();

  struct Coord {
    std::size_t param;
    std::size_t index;
  };
  std::vector<Coord> coords;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (std::size_t i = 0; i < params[k]->value.size(); ++i) coords.push_back({k, i});
  }
  if (coords.size() > options.max_coordinates) {
    Rng rng(options.seed);
    rng.shuffle(coords.begin(), coords.end());
    coords.resize(options.max_coordinates);
  }

  auto evaluate = [&loss]() {
    Tape tape(false);
    return loss(tape).value().item();
  };

  double worst = 0.0;
  for (const Coord& c : coords) {
    double& x = params[c.param]->value[c.index];
    const double saved = x;
    x = saved + options.step;
    const double up = evaluate();
    x = saved - options.step;
    const double down = evaluate();
    x = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double a = analytic[c.param][c.index];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace a3ps::nn

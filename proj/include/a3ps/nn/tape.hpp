#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "a3ps/nn/tensor.hpp"

namespace a3ps::nn {

// A learned tensor plus its gradient accumulator. The gradient is a cache
// written by Tape::backward and consumed by the optimizer, so it stays
// writable on const parameters.
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  std::string name;
  Tensor value;
  mutable Tensor grad;
  mutable bool has_grad = false;

  void zero_grad() const {
    grad.fill(0.0);
    has_grad = false;
  }
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

// Reverse-mode autodiff tape. Nodes are appended in evaluation order; a
// tape built with record = false keeps values only.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor t);
  Var param(const Parameter& p);

  const Tensor& value(int id) const;
  const Tensor& value(Var v) const { return value(v.id); }
  bool needs_grad(int id) const { return nodes_[id].needs_grad; }
  bool needs_grad(Var v) const { return needs_grad(v.id); }
  // Gradient buffer for node id, allocated on first use.
  Tensor& grad(int id);

  // Appends an op result. Non-finite values raise NumericError naming op.
  Var record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  // Accumulates d(loss)/d(param) into every parameter reached, then clears.
  void backward(Var loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    const Parameter* param = nullptr;
    BackwardFn backward;
  };

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_nodes_;
};

}  // namespace a3ps::nn

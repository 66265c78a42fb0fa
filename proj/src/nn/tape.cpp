#include "a3ps/nn/tape.hpp"

#include "a3ps/errors.hpp"

namespace a3ps::nn {

const Tensor& Var::value() const {
  if (!tape) throw ContractError("Var is not bound to a tape");
  return tape->value(id);
}

Var Tape::constant(Tensor t) {
  if (!t.all_finite()) throw NumericError("constant contains non-finite values");
  Node n;
  n.owned = std::move(t);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::param(const Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return {this, it->second};
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.needs_grad = record_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return {this, id};
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(id));
  return n.ref ? *n.ref : n.owned;
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor(value(id).shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& parents, BackwardFn fn) {
  if (!value.all_finite()) throw NumericError(std::string(op) + " produced non-finite values");
  Node n;
  n.owned = std::move(value);
  if (record_) {
    for (const Var& p : parents) {
      if (p.tape != this) throw ContractError(std::string(op) + ": operand from another tape");
      n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(p.id)].needs_grad;
    }
    if (n.needs_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size() - 1)};
}

void Tape::backward(Var loss) {
  if (!record_) throw ContractError("backward on a tape that does not record gradients");
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  if (value(loss.id).size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + value(loss.id).shape_string());
  }
  grad(loss.id)[0] = 1.0;
  for (int id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.has_grad || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) {
      Tensor& g = n.param->grad;
      if (!g.same_shape(n.grad)) g = Tensor(n.grad.shape(), 0.0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
      n.param->has_grad = true;
    }
  }
  clear();
}

void Tape::clear() {
  nodes_.clear();
  param_nodes_.clear();
}

}  // namespace a3ps::nn

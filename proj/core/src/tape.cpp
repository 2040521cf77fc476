#include "docrex/tape.hpp"

#include "docrex/errors.hpp"

namespace docrex::diffmath {

ParameterStore::ParameterStore(const ParameterStore& other) { *this = other; }

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this == &other) return *this;
  params_.clear();
  index_.clear();
  for (const auto& p : other.params_) {
    params_.push_back(std::make_unique<Parameter>(*p));
    index_.emplace(p->name, params_.size() - 1);
  }
  return *this;
}

Parameter& ParameterStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) throw ConfigError("duplicate parameter name " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = std::move(init);
  p->zero_grad();
  params_.push_back(std::move(p));
  index_.emplace(std::move(name), params_.size() - 1);
  return *params_.back();
}

Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return *params_[it->second];
}

const Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return *params_[it->second];
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

void ParameterStore::copy_values_from(const ParameterStore& other) {
  if (other.size() != size()) throw ConfigError("parameter stores differ in size");
  for (std::size_t i = 0; i < size(); ++i) {
    const Parameter& src = other.at(i);
    Parameter& dst = at(i);
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw ConfigError("parameter mismatch at " + dst.name);
    }
    dst.value = src.value;
  }
}

const Tensor& Var::value() const { return tape_->value(id_); }

void Tape::check_owner(Var v) const {
  if (v.tape() != this) throw ShapeError("var used on a tape that does not own it");
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_grads_;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.needs_grad = record_grads_;
  n.param = record_grads_ ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs, Backward backward) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op " + std::string(op) + " with shape " +
                       shape_string(value.shape()));
  }
  Node n;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    check_owner(v);
    n.inputs.push_back(v.id());
    n.needs_grad = n.needs_grad || nodes_[v.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tensor* Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.has_grad ? &n.grad : nullptr;
}

Tensor& Tape::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  check_owner(loss);
  if (loss.value().size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_string(loss.shape()));
  }
  if (backward_done_) throw ShapeError("backward: tape already differentiated");
  backward_done_ = true;
  if (!nodes_[loss.id()].needs_grad) return;
  grad_ref(loss.id())[0] = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) {
      Tensor& dst = n.param->grad;
      if (dst.shape() != n.value.shape()) dst = Tensor(n.value.shape());
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += n.grad[k];
    }
  }
}

}  // namespace docrex::diffmath

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "docrex/tensor.hpp"

namespace docrex::diffmath {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value once any gradient has been accumulated

  void zero_grad() { grad = Tensor(value.shape()); }
};

// Named parameters in insertion order. Addresses are stable for the lifetime
// of the store, so tapes may hold raw pointers to entries.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;

  Parameter& add(std::string name, Tensor init);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  const Parameter* find(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& at(std::size_t i) { return *params_[i]; }
  const Parameter& at(std::size_t i) const { return *params_[i]; }

  void zero_grad();
  // Copies values (not gradients) from a store with identical names/shapes.
  void copy_values_from(const ParameterStore& other);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording. Nodes are appended in evaluation order, which is a
// topological order of the graph; backward() walks it in reverse once.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  // With record_grads = false every node is treated as a constant and no
  // backward closures are kept (inference mode).
  explicit Tape(bool record_grads = true) : record_grads_(record_grads) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  Var param(Parameter& p);

  // Appends an op result. Throws NumericError if `value` is not finite.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, Backward backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. Parameter gradients are added
  // to Parameter::grad.
  void backward(Var loss);

  bool record_grads() const { return record_grads_; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool needs_grad(Var v) const { return needs_grad(v.id()); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Gradient of the node, or nullptr if nothing flowed into it.
  const Tensor* grad(std::size_t id) const;
  const Tensor* grad(Var v) const { return grad(v.id()); }
  // Accumulation target for backward closures; zero-initialized on demand.
  Tensor& grad_ref(std::size_t id);
  std::size_t input(std::size_t id, std::size_t k) const { return nodes_[id].inputs[k]; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    Parameter* param = nullptr;
    std::vector<std::size_t> inputs;
    Backward backward;
  };

  void check_owner(Var v) const;

  bool record_grads_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

}  // namespace docrex::diffmath

#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ptd/tensor.hpp"

// Reverse-mode automatic differentiation over dense double tensors.
//
// A Tape records every operation in creation order, so node ids are already a
// topological order and backward() is a single reverse sweep. Parameters live
// outside the tape in a ParameterStore and are bound read-only; their gradients
// are copied out into a Gradients buffer, which lets several tapes (one per
// thread) share the same parameters and have their gradients summed afterwards.
namespace ptd::ad {

enum class Op : std::uint8_t {
  constant,
  variable,
  parameter,
  add,
  sub,
  mul,
  scale,
  matmul,
  transpose,
  concat,
  slice,
  gather_rows,
  reshape,
  sum,
  sum_axis,
  mean,
  exp,
  log,
  tanh,
  sigmoid,
  relu,
  sqrt,
  softplus,
  softmax,
  squared_l2,
  binary_cross_entropy,
  min,
};

std::string_view op_name(Op op);

struct ParamId {
  std::size_t index = 0;
  bool operator==(const ParamId&) const = default;
};

struct Parameter {
  std::string name;
  Tensor value;
};

class ParameterStore {
 public:
  ParamId add(std::string name, Tensor value);

  Parameter& operator[](ParamId id) { return params_.at(id.index); }
  const Parameter& operator[](ParamId id) const { return params_.at(id.index); }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::optional<ParamId> find(std::string_view name) const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Parameter> params_;
};

// One gradient buffer per parameter, same shapes as the store.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterStore& params);

  Tensor& operator[](ParamId id) { return buffers_.at(id.index); }
  const Tensor& operator[](ParamId id) const { return buffers_.at(id.index); }
  std::size_t size() const { return buffers_.size(); }

  void add(const Gradients& other);
  void scale(double factor);
  void zero();
  double global_norm() const;
  bool all_finite() const;

 private:
  std::vector<Tensor> buffers_;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  struct Node {
    Op op = Op::constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;  // allocated during backward
    bool requires_grad = false;
    int axis = 0;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    std::vector<std::uint8_t> mask;
    Tensor aux;
    std::size_t param = 0;
  };

  explicit Tape(const ParameterStore* params = nullptr);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  // Binding is cached: the same parameter maps to one node per tape.
  Var param(ParamId id);

  void backward(const Var& root);
  // Gradient of the last backward root with respect to v (zeros if unreached).
  const Tensor& grad(const Var& v);
  void accumulate_parameter_grads(Gradients& out) const;

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  // Used by the op implementations.
  Var record(Node node);

 private:
  void backprop_node(std::size_t id);

  std::deque<Node> nodes_;
  const ParameterStore* params_;
  std::vector<std::size_t> param_nodes_;
  bool has_backward_ = false;
};

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var concat(const std::vector<Var>& parts, int axis);
Var slice(const Var& a, int axis, std::size_t begin, std::size_t end);
Var gather_rows(const Var& a, std::vector<std::size_t> rows);
Var reshape(const Var& a, Shape shape);
Var sum(const Var& a);
Var sum_axis(const Var& a, int axis);
Var mean(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var sqrt(const Var& a);
Var softplus(const Var& a);
// Masked entries (mask[i] == 0) get probability 0; an all-masked group is all zeros.
Var softmax(const Var& a, int axis, const std::vector<std::uint8_t>* mask = nullptr);
Var squared_l2(const Var& a);
// Mean BCE over elements; probabilities are clamped to [1e-7, 1 - 1e-7].
Var binary_cross_entropy(const Var& probs, const Tensor& targets);
Var min(const Var& a);

inline constexpr double kBceClamp = 1e-7;

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace ptd::ad

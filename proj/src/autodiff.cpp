#include "ptd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ptd::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::variable: return "variable";
    case Op::parameter: return "parameter";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::scale: return "scale";
    case Op::matmul: return "matmul";
    case Op::transpose: return "transpose";
    case Op::concat: return "concat";
    case Op::slice: return "slice";
    case Op::gather_rows: return "gather_rows";
    case Op::reshape: return "reshape";
    case Op::sum: return "sum";
    case Op::sum_axis: return "sum_axis";
    case Op::mean: return "mean";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::relu: return "relu";
    case Op::sqrt: return "sqrt";
    case Op::softplus: return "softplus";
    case Op::softmax: return "softmax";
    case Op::squared_l2: return "squared_l2";
    case Op::binary_cross_entropy: return "binary_cross_entropy";
    case Op::min: return "min";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// Parameters and gradient buffers

ParamId ParameterStore::add(std::string name, Tensor value) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  if (!value.all_finite()) throw std::domain_error("parameter '" + name + "' has non-finite values");
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return ParamId{params_.size() - 1};
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

Gradients::Gradients(const ParameterStore& params) {
  buffers_.reserve(params.size());
  for (const auto& p : params) buffers_.emplace_back(p.value.shape(), 0.0);
}

void Gradients::add(const Gradients& other) {
  if (other.buffers_.size() != buffers_.size()) {
    throw std::invalid_argument("gradient buffers of different parameter sets");
  }
  for (std::size_t i = 0; i < buffers_.size(); ++i) {
    auto dst = buffers_[i].values();
    auto src = other.buffers_[i].values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void Gradients::scale(double factor) {
  for (auto& b : buffers_) {
    for (auto& v : b.values()) v *= factor;
  }
}

void Gradients::zero() {
  for (auto& b : buffers_) b.fill(0.0);
}

double Gradients::global_norm() const {
  double s = 0.0;
  for (const auto& b : buffers_) {
    for (double v : b.values()) s += v * v;
  }
  return std::sqrt(s);
}

bool Gradients::all_finite() const {
  return std::all_of(buffers_.begin(), buffers_.end(), [](const Tensor& t) { return t.all_finite(); });
}

// ---------------------------------------------------------------------------
// Var and Tape

Tape& Var::tape() const {
  if (!tape_) throw std::logic_error("use of an unbound Var");
  return *tape_;
}

const Tensor& Var::value() const { return tape().node(id_).value; }

Tape::Tape(const ParameterStore* params) : params_(params) {
  if (params_) param_nodes_.assign(params_->size(), static_cast<std::size_t>(-1));
}

Var Tape::record(Node node) {
  for (auto in : node.inputs) {
    if (in >= nodes_.size()) throw std::logic_error("tape input refers to a later node (cycle)");
  }
  if (!node.value.all_finite()) {
    throw std::domain_error(std::string("op ") + std::string(op_name(node.op)) +
                            " produced non-finite values, shape " + shape_string(node.value.shape()));
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("constant with non-finite values");
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return record(std::move(n));
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw std::domain_error("variable with non-finite values");
  Node n;
  n.op = Op::variable;
  n.value = std::move(value);
  n.requires_grad = true;
  return record(std::move(n));
}

Var Tape::param(ParamId id) {
  if (!params_) throw std::logic_error("tape has no parameter store bound");
  if (id.index >= param_nodes_.size()) throw std::out_of_range("unknown parameter id");
  auto& cached = param_nodes_[id.index];
  if (cached != static_cast<std::size_t>(-1)) return Var(this, cached);
  Node n;
  n.op = Op::parameter;
  n.value = (*params_)[id].value;
  n.requires_grad = true;
  n.param = id.index;
  Var v = record(std::move(n));
  cached = v.id();
  return v;
}

const Tensor& Tape::grad(const Var& v) {
  if (&v.tape() != this) throw std::invalid_argument("Var belongs to another tape");
  auto& n = nodes_.at(v.id());
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

void Tape::accumulate_parameter_grads(Gradients& out) const {
  if (!has_backward_) throw std::logic_error("accumulate_parameter_grads before backward");
  for (std::size_t i = 0; i < param_nodes_.size(); ++i) {
    const auto id = param_nodes_[i];
    if (id == static_cast<std::size_t>(-1)) continue;
    const auto& n = nodes_[id];
    if (n.grad.empty()) continue;
    auto dst = out[ParamId{i}].values();
    auto src = n.grad.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

void Tape::backward(const Var& root) {
  if (&root.tape() != this) throw std::invalid_argument("backward root belongs to another tape");
  const auto& rv = nodes_.at(root.id()).value;
  if (rv.size() != 1) {
    throw std::invalid_argument("backward root must be scalar, got shape " + shape_string(rv.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  has_backward_ = true;
  auto& r = nodes_[root.id()];
  if (!r.requires_grad) return;
  r.grad = Tensor(r.value.shape(), 1.0);
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    backprop_node(id);
  }
}

// ---------------------------------------------------------------------------
// Kernels and helpers

namespace {

struct Dims {
  std::size_t r;
  std::size_t c;
  bool operator==(const Dims&) const = default;
};

Dims dims2(const Shape& s) {
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw std::invalid_argument("expected rank <= 2, got shape " + shape_string(s));
}

[[noreturn]] void shape_error(Op op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string("op ") + std::string(op_name(op)) + ": incompatible shapes " +
                              shape_string(a) + " and " + shape_string(b));
}

Tape& common_tape(Op op, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) {
    throw std::invalid_argument(std::string("op ") + std::string(op_name(op)) + ": operands on different tapes");
  }
  return a.tape();
}

Tensor& ensure_grad(Tape::Node& n) {
  if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s1) + (s2 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// C(n x m) += A(n x k) * B(k x m)
void gemm_nn(const double* a, const double* b, double* c, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av != 0.0) axpy(av, b + p * m, ci, m);
    }
  }
}

// A(n x k) += C(n x m) * B(k x m)^T
void gemm_nt(const double* c, const double* b, double* a, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ci = c + i * m;
    double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) ai[p] += dot(ci, b + p * m, m);
  }
}

// B(k x m) += A(n x k)^T * C(n x m)
void gemm_tn(const double* a, const double* c, double* b, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    const double* ci = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av != 0.0) axpy(av, ci, b + p * m, m);
    }
  }
}

// Output shape for broadcasting binary ops; 1-D tensors act as rows.
Shape broadcast_shape(Op op, const Shape& a, const Shape& b) {
  if (a == b) return a;
  if (shape_size(b) == 1) return a;
  if (shape_size(a) == 1) return b;
  const Dims da = dims2(a), db = dims2(b);
  auto ok = [](std::size_t x, std::size_t y) { return x == y || x == 1 || y == 1; };
  if (!ok(da.r, db.r) || !ok(da.c, db.c)) shape_error(op, a, b);
  const Dims out{std::max(da.r, db.r), std::max(da.c, db.c)};
  if (out == da) return a;
  if (out == db) return b;
  return Shape{out.r, out.c};
}

// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  const std::size_t n = shape_size(out);
  const std::size_t na = shape_size(a), nb = shape_size(b);
  if (na == n && nb == n) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (na == n && nb == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, std::size_t{0});
    return;
  }
  if (na == 1 && nb == n) {
    for (std::size_t i = 0; i < n; ++i) f(i, std::size_t{0}, i);
    return;
  }
  const Dims o = dims2(out), da = dims2(a), db = dims2(b);
  for (std::size_t i = 0; i < o.r; ++i) {
    for (std::size_t j = 0; j < o.c; ++j) {
      const std::size_t ia = (da.r == 1 ? 0 : i) * da.c + (da.c == 1 ? 0 : j);
      const std::size_t ib = (db.r == 1 ? 0 : i) * db.c + (db.c == 1 ? 0 : j);
      f(i * o.c + j, ia, ib);
    }
  }
}

Var binary(Op op, const Var& a, const Var& b) {
  Tape& tape = common_tape(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Shape out_shape = broadcast_shape(op, av.shape(), bv.shape());
  Tensor out(out_shape);
  const double* pa = av.data();
  const double* pb = bv.data();
  double* po = out.data();
  switch (op) {
    case Op::add:
      for_each_broadcast(out_shape, av.shape(), bv.shape(),
                         [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = pa[i] + pb[j]; });
      break;
    case Op::sub:
      for_each_broadcast(out_shape, av.shape(), bv.shape(),
                         [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = pa[i] - pb[j]; });
      break;
    case Op::mul:
      for_each_broadcast(out_shape, av.shape(), bv.shape(),
                         [&](std::size_t o, std::size_t i, std::size_t j) { po[o] = pa[i] * pb[j]; });
      break;
    default:
      throw std::logic_error("binary(): not a binary op");
  }
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  n.requires_grad = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(n));
}

template <typename F>
Var unary(Op op, const Var& a, F&& f) {
  Tape& tape = a.tape();
  Tensor out(a.value().shape());
  const auto in = a.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < in.size(); ++i) o[i] = f(in[i]);
  Tape::Node n;
  n.op = op;
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = tape.requires_grad(a);
  return tape.record(std::move(n));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// Layout of a reduction along `axis` of a rank <= 2 tensor:
// `groups` independent groups of `len` elements spaced `stride` apart.
struct AxisLayout {
  std::size_t groups;
  std::size_t len;
  std::size_t stride;
  std::size_t start(std::size_t g) const { return stride == 1 ? g * len : g; }
};

AxisLayout axis_layout(Op op, const Shape& s, int axis) {
  if (s.size() == 1) {
    if (axis != 0) throw std::invalid_argument(std::string("op ") + std::string(op_name(op)) + ": bad axis");
    return {1, s[0], 1};
  }
  if (s.size() == 2) {
    if (axis == 1) return {s[0], s[1], 1};
    if (axis == 0) return {s[1], s[0], s[1]};
  }
  throw std::invalid_argument(std::string("op ") + std::string(op_name(op)) + ": axis " + std::to_string(axis) +
                              " invalid for shape " + shape_string(s));
}

}  // namespace

// ---------------------------------------------------------------------------
// Ops

Var add(const Var& a, const Var& b) { return binary(Op::add, a, b); }
Var sub(const Var& a, const Var& b) { return binary(Op::sub, a, b); }
Var mul(const Var& a, const Var& b) { return binary(Op::mul, a, b); }

Var scale(const Var& a, double factor) {
  Tensor out(a.value().shape());
  const auto in = a.value().values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * factor;
  Tape::Node n;
  n.op = Op::scale;
  n.scalar = factor;
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var matmul(const Var& a, const Var& b) {
  Tape& tape = common_tape(Op::matmul, a, b);
  const Dims da = dims2(a.shape()), db = dims2(b.shape());
  if (da.c != db.r) shape_error(Op::matmul, a.shape(), b.shape());
  Tensor out(Shape{da.r, db.c}, 0.0);
  gemm_nn(a.value().data(), b.value().data(), out.data(), da.r, da.c, db.c);
  Tape::Node n;
  n.op = Op::matmul;
  n.inputs = {a.id(), b.id()};
  n.value = std::move(out);
  n.requires_grad = tape.requires_grad(a) || tape.requires_grad(b);
  return tape.record(std::move(n));
}

Var transpose(const Var& a) {
  const Dims d = dims2(a.shape());
  Tensor out(Shape{d.c, d.r});
  const Tensor& in = a.value();
  for (std::size_t i = 0; i < d.r; ++i)
    for (std::size_t j = 0; j < d.c; ++j) out.at(j, i) = in[i * d.c + j];
  Tape::Node n;
  n.op = Op::transpose;
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("op concat: no inputs");
  Tape& tape = parts.front().tape();
  const std::size_t rank = parts.front().shape().size();
  if (rank < 1 || rank > 2) throw std::invalid_argument("op concat: rank must be 1 or 2");
  if (rank == 1 && axis != 0) throw std::invalid_argument("op concat: axis must be 0 for rank-1 inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("op concat: axis must be 0 or 1");
  Shape out_shape = parts.front().shape();
  bool rg = false;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = parts[k];
    if (&p.tape() != &tape) throw std::invalid_argument("op concat: inputs on different tapes");
    const auto& s = p.shape();
    if (s.size() != rank) shape_error(Op::concat, parts.front().shape(), s);
    if (rank == 2 && s[1 - axis] != out_shape[1 - axis]) shape_error(Op::concat, parts.front().shape(), s);
    if (k) out_shape[axis] += s[axis];
    rg = rg || tape.requires_grad(p);
  }
  Tensor out(out_shape);
  Tape::Node n;
  n.op = Op::concat;
  n.axis = axis;
  if (rank == 1 || axis == 0) {
    std::size_t off = 0;
    for (const auto& p : parts) {
      std::copy(p.value().values().begin(), p.value().values().end(), out.values().begin() + off);
      n.index.push_back(off);
      off += p.size();
    }
  } else {
    const std::size_t rows = out_shape[0], cols = out_shape[1];
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t pc = p.shape()[1];
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(p.value().data() + r * pc, pc, out.data() + r * cols + off);
      }
      n.index.push_back(off);
      off += pc;
    }
  }
  for (const auto& p : parts) n.inputs.push_back(p.id());
  n.value = std::move(out);
  n.requires_grad = rg;
  return tape.record(std::move(n));
}

Var slice(const Var& a, int axis, std::size_t begin, std::size_t end) {
  const Shape& s = a.shape();
  if (s.size() < 1 || s.size() > 2 || axis < 0 || static_cast<std::size_t>(axis) >= s.size() || begin >= end ||
      end > s[axis]) {
    throw std::invalid_argument("op slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                ") on axis " + std::to_string(axis) + " invalid for shape " + shape_string(s));
  }
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  Tensor out(out_shape);
  const Tensor& in = a.value();
  if (s.size() == 1 || axis == 0) {
    const std::size_t stride = s.size() == 1 ? 1 : s[1];
    std::copy(in.data() + begin * stride, in.data() + end * stride, out.data());
  } else {
    const std::size_t w = end - begin;
    for (std::size_t r = 0; r < s[0]; ++r) std::copy_n(in.data() + r * s[1] + begin, w, out.data() + r * w);
  }
  Tape::Node n;
  n.op = Op::slice;
  n.axis = axis;
  n.index = {begin, end};
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var gather_rows(const Var& a, std::vector<std::size_t> rows) {
  const Dims d = dims2(a.shape());
  if (rows.empty()) throw std::invalid_argument("op gather_rows: empty row list");
  Tensor out(Shape{rows.size(), d.c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= d.r) {
      throw std::out_of_range("op gather_rows: row " + std::to_string(rows[i]) + " out of range for shape " +
                              shape_string(a.shape()));
    }
    std::copy_n(a.value().data() + rows[i] * d.c, d.c, out.data() + i * d.c);
  }
  Tape::Node n;
  n.op = Op::gather_rows;
  n.index = std::move(rows);
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var reshape(const Var& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw std::invalid_argument("op reshape: cannot reshape " + shape_string(a.shape()) + " to " +
                                shape_string(shape));
  }
  Tape::Node n;
  n.op = Op::reshape;
  n.inputs = {a.id()};
  n.value = Tensor(std::move(shape), std::vector<double>(a.value().values().begin(), a.value().values().end()));
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  Tape::Node n;
  n.op = Op::sum;
  n.inputs = {a.id()};
  n.value = Tensor::scalar(s);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var sum_axis(const Var& a, int axis) {
  const Dims d = dims2(a.shape());
  if (axis != 0 && axis != 1) throw std::invalid_argument("op sum_axis: axis must be 0 or 1");
  Tensor out(axis == 0 ? Shape{1, d.c} : Shape{d.r, 1}, 0.0);
  const Tensor& in = a.value();
  for (std::size_t i = 0; i < d.r; ++i)
    for (std::size_t j = 0; j < d.c; ++j) out[axis == 0 ? j : i] += in[i * d.c + j];
  Tape::Node n;
  n.op = Op::sum_axis;
  n.axis = axis;
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var mean(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  Tape::Node n;
  n.op = Op::mean;
  n.inputs = {a.id()};
  n.value = Tensor::scalar(s / static_cast<double>(a.size()));
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var exp(const Var& a) { return unary(Op::exp, a, [](double x) { return std::exp(x); }); }
Var log(const Var& a) { return unary(Op::log, a, [](double x) { return std::log(x); }); }
Var tanh(const Var& a) { return unary(Op::tanh, a, [](double x) { return std::tanh(x); }); }
Var sigmoid(const Var& a) { return unary(Op::sigmoid, a, stable_sigmoid); }
Var relu(const Var& a) { return unary(Op::relu, a, [](double x) { return x > 0.0 ? x : 0.0; }); }
Var sqrt(const Var& a) { return unary(Op::sqrt, a, [](double x) { return std::sqrt(x); }); }
Var softplus(const Var& a) { return unary(Op::softplus, a, stable_softplus); }

Var softmax(const Var& a, int axis, const std::vector<std::uint8_t>* mask) {
  const AxisLayout lay = axis_layout(Op::softmax, a.shape(), axis);
  if (mask && mask->size() != a.size()) {
    throw std::invalid_argument("op softmax: mask of size " + std::to_string(mask->size()) + " for shape " +
                                shape_string(a.shape()));
  }
  const Tensor& in = a.value();
  Tensor out(in.shape(), 0.0);
  auto keep = [&](std::size_t i) { return !mask || (*mask)[i] != 0; };
  for (std::size_t g = 0; g < lay.groups; ++g) {
    const std::size_t s0 = lay.start(g);
    double mx = -INFINITY;
    for (std::size_t k = 0; k < lay.len; ++k) {
      const std::size_t i = s0 + k * lay.stride;
      if (keep(i)) mx = std::max(mx, in[i]);
    }
    if (mx == -INFINITY) continue;
    double z = 0.0;
    for (std::size_t k = 0; k < lay.len; ++k) {
      const std::size_t i = s0 + k * lay.stride;
      if (keep(i)) {
        out[i] = std::exp(in[i] - mx);
        z += out[i];
      }
    }
    for (std::size_t k = 0; k < lay.len; ++k) out[s0 + k * lay.stride] /= z;
  }
  Tape::Node n;
  n.op = Op::softmax;
  n.axis = axis;
  if (mask) n.mask = *mask;
  n.inputs = {a.id()};
  n.value = std::move(out);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var squared_l2(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  Tape::Node n;
  n.op = Op::squared_l2;
  n.inputs = {a.id()};
  n.value = Tensor::scalar(s);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

Var binary_cross_entropy(const Var& probs, const Tensor& targets) {
  if (probs.size() != targets.size()) {
    throw std::invalid_argument("op binary_cross_entropy: incompatible shapes " + shape_string(probs.shape()) +
                                " and " + shape_string(targets.shape()));
  }
  const auto p = probs.value().values();
  const auto y = targets.values();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (y[i] < 0.0 || y[i] > 1.0) throw std::invalid_argument("op binary_cross_entropy: label outside [0,1]");
    const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    s -= y[i] * std::log(pc) + (1.0 - y[i]) * std::log(1.0 - pc);
  }
  Tape::Node n;
  n.op = Op::binary_cross_entropy;
  n.inputs = {probs.id()};
  n.aux = targets;
  n.value = Tensor::scalar(s / static_cast<double>(p.size()));
  n.requires_grad = probs.tape().requires_grad(probs);
  return probs.tape().record(std::move(n));
}

Var min(const Var& a) {
  const auto v = a.value().values();
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  Tape::Node n;
  n.op = Op::min;
  n.inputs = {a.id()};
  n.index = {best};
  n.value = Tensor::scalar(v[best]);
  n.requires_grad = a.tape().requires_grad(a);
  return a.tape().record(std::move(n));
}

// ---------------------------------------------------------------------------
// Backward rules

void Tape::backprop_node(std::size_t id) {
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const double* pg = g.data();
  auto input = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return input(k).requires_grad; };

  switch (n.op) {
    case Op::constant:
    case Op::variable:
    case Op::parameter:
      return;

    case Op::add:
    case Op::sub:
    case Op::mul: {
      Node& a = input(0);
      Node& b = input(1);
      const double sign_b = n.op == Op::sub ? -1.0 : 1.0;
      if (a.requires_grad) {
        double* ga = ensure_grad(a).data();
        const double* pb = b.value.data();
        if (n.op == Op::mul) {
          for_each_broadcast(n.value.shape(), a.value.shape(), b.value.shape(),
                             [&](std::size_t o, std::size_t i, std::size_t j) { ga[i] += pg[o] * pb[j]; });
        } else {
          for_each_broadcast(n.value.shape(), a.value.shape(), b.value.shape(),
                             [&](std::size_t o, std::size_t i, std::size_t) { ga[i] += pg[o]; });
        }
      }
      if (b.requires_grad) {
        double* gb = ensure_grad(b).data();
        const double* pa = a.value.data();
        if (n.op == Op::mul) {
          for_each_broadcast(n.value.shape(), a.value.shape(), b.value.shape(),
                             [&](std::size_t o, std::size_t i, std::size_t j) { gb[j] += pg[o] * pa[i]; });
        } else {
          for_each_broadcast(n.value.shape(), a.value.shape(), b.value.shape(),
                             [&](std::size_t o, std::size_t, std::size_t j) { gb[j] += sign_b * pg[o]; });
        }
      }
      return;
    }

    case Op::scale: {
      double* ga = ensure_grad(input(0)).data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.scalar * pg[i];
      return;
    }

    case Op::matmul: {
      Node& a = input(0);
      Node& b = input(1);
      const Dims da = dims2(a.value.shape()), db = dims2(b.value.shape());
      if (a.requires_grad) gemm_nt(pg, b.value.data(), ensure_grad(a).data(), da.r, da.c, db.c);
      if (b.requires_grad) gemm_tn(a.value.data(), pg, ensure_grad(b).data(), da.r, da.c, db.c);
      return;
    }

    case Op::transpose: {
      const Dims d = dims2(input(0).value.shape());
      double* ga = ensure_grad(input(0)).data();
      for (std::size_t i = 0; i < d.r; ++i)
        for (std::size_t j = 0; j < d.c; ++j) ga[i * d.c + j] += pg[j * d.r + i];
      return;
    }

    case Op::concat: {
      const bool flat = n.value.rank() == 1 || n.axis == 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (!wants(k)) continue;
        Node& in = input(k);
        double* gi = ensure_grad(in).data();
        const std::size_t off = n.index[k];
        if (flat) {
          for (std::size_t i = 0; i < in.value.size(); ++i) gi[i] += pg[off + i];
        } else {
          const std::size_t rows = n.value.shape()[0], cols = n.value.shape()[1], pc = in.value.shape()[1];
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) gi[r * pc + c] += pg[r * cols + off + c];
        }
      }
      return;
    }

    case Op::slice: {
      Node& in = input(0);
      double* gi = ensure_grad(in).data();
      const Shape& s = in.value.shape();
      const std::size_t begin = n.index[0], end = n.index[1];
      if (s.size() == 1 || n.axis == 0) {
        const std::size_t stride = s.size() == 1 ? 1 : s[1];
        for (std::size_t i = 0; i < (end - begin) * stride; ++i) gi[begin * stride + i] += pg[i];
      } else {
        const std::size_t w = end - begin;
        for (std::size_t r = 0; r < s[0]; ++r)
          for (std::size_t c = 0; c < w; ++c) gi[r * s[1] + begin + c] += pg[r * w + c];
      }
      return;
    }

    case Op::gather_rows: {
      Node& in = input(0);
      const std::size_t cols = dims2(in.value.shape()).c;
      double* gi = ensure_grad(in).data();
      for (std::size_t i = 0; i < n.index.size(); ++i) axpy(1.0, pg + i * cols, gi + n.index[i] * cols, cols);
      return;
    }

    case Op::reshape: {
      double* gi = ensure_grad(input(0)).data();
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += pg[i];
      return;
    }

    case Op::sum:
    case Op::mean: {
      Node& in = input(0);
      const double d = n.op == Op::sum ? pg[0] : pg[0] / static_cast<double>(in.value.size());
      double* gi = ensure_grad(in).data();
      for (std::size_t i = 0; i < in.value.size(); ++i) gi[i] += d;
      return;
    }

    case Op::sum_axis: {
      Node& in = input(0);
      const Dims d = dims2(in.value.shape());
      double* gi = ensure_grad(in).data();
      for (std::size_t i = 0; i < d.r; ++i)
        for (std::size_t j = 0; j < d.c; ++j) gi[i * d.c + j] += pg[n.axis == 0 ? j : i];
      return;
    }

    case Op::exp:
    case Op::tanh:
    case Op::sigmoid:
    case Op::sqrt: {
      Node& in = input(0);
      double* gi = ensure_grad(in).data();
      const double* y = n.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double dy = 0.0;
        switch (n.op) {
          case Op::exp: dy = y[i]; break;
          case Op::tanh: dy = 1.0 - y[i] * y[i]; break;
          case Op::sigmoid: dy = y[i] * (1.0 - y[i]); break;
          default: dy = y[i] > 0.0 ? 0.5 / y[i] : 0.0; break;
        }
        gi[i] += pg[i] * dy;
      }
      return;
    }

    case Op::log:
    case Op::relu:
    case Op::softplus: {
      Node& in = input(0);
      double* gi = ensure_grad(in).data();
      const double* x = in.value.data();
      for (std::size_t i = 0; i < g.size(); ++i) {
        double dy = 0.0;
        switch (n.op) {
          case Op::log: dy = 1.0 / x[i]; break;
          case Op::relu: dy = x[i] > 0.0 ? 1.0 : 0.0; break;
          default: dy = stable_sigmoid(x[i]); break;
        }
        gi[i] += pg[i] * dy;
      }
      return;
    }

    case Op::softmax: {
      Node& in = input(0);
      const AxisLayout lay = axis_layout(Op::softmax, in.value.shape(), n.axis);
      double* gi = ensure_grad(in).data();
      const double* y = n.value.data();
      for (std::size_t gidx = 0; gidx < lay.groups; ++gidx) {
        const std::size_t s0 = lay.start(gidx);
        double dotp = 0.0;
        for (std::size_t k = 0; k < lay.len; ++k) {
          const std::size_t i = s0 + k * lay.stride;
          dotp += y[i] * pg[i];
        }
        for (std::size_t k = 0; k < lay.len; ++k) {
          const std::size_t i = s0 + k * lay.stride;
          gi[i] += y[i] * (pg[i] - dotp);
        }
      }
      return;
    }

    case Op::squared_l2: {
      Node& in = input(0);
      double* gi = ensure_grad(in).data();
      const double* x = in.value.data();
      for (std::size_t i = 0; i < in.value.size(); ++i) gi[i] += 2.0 * x[i] * pg[0];
      return;
    }

    case Op::binary_cross_entropy: {
      Node& in = input(0);
      double* gi = ensure_grad(in).data();
      const double* p = in.value.data();
      const double* y = n.aux.data();
      const double inv_n = 1.0 / static_cast<double>(in.value.size());
      for (std::size_t i = 0; i < in.value.size(); ++i) {
        if (p[i] < kBceClamp || p[i] > 1.0 - kBceClamp) continue;
        gi[i] += pg[0] * inv_n * (p[i] - y[i]) / (p[i] * (1.0 - p[i]));
      }
      return;
    }

    case Op::min: {
      ensure_grad(input(0)).data()[n.index[0]] += pg[0];
      return;
    }
  }
}

}  // namespace ptd::ad

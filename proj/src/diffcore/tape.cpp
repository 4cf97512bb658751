#include "infocnf/tape.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

// ---------------------------------------------------------------------------
// ParamStore

ParamId ParamStore::add(std::string name, Shape shape, double fill) {
  if (find(name).valid()) throw UsageError("duplicate parameter name '" + name + "'");
  ParamEntry e;
  e.name = std::move(name);
  e.size = shape_size(shape);
  e.shape = std::move(shape);
  e.offset = values_.size();
  values_.resize(values_.size() + e.size, fill);
  entries_.push_back(std::move(e));
  return ParamId{static_cast<int>(entries_.size() - 1)};
}

ParamId ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return ParamId{static_cast<int>(i)};
  }
  return ParamId{};
}

std::span<double> ParamStore::values(ParamId id) {
  const auto& e = entry(id);
  return std::span<double>(values_).subspan(e.offset, e.size);
}

std::span<const double> ParamStore::values(ParamId id) const {
  const auto& e = entry(id);
  return std::span<const double>(values_).subspan(e.offset, e.size);
}

Tensor ParamStore::tensor(ParamId id) const {
  const auto v = values(id);
  return Tensor(entry(id).shape, std::vector<double>(v.begin(), v.end()));
}

void ParamStore::set(ParamId id, const Tensor& value) {
  const auto& e = entry(id);
  if (value.shape() != e.shape) {
    throw ShapeError(fmt::format("parameter '{}' has shape {}, got {}", e.name, shape_string(e.shape),
                                 shape_string(value.shape())));
  }
  std::copy(value.data().begin(), value.data().end(), values_.begin() + static_cast<std::ptrdiff_t>(e.offset));
}

std::size_t ParamStore::count_with_prefix(std::span<const std::string> prefixes) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    for (const auto& p : prefixes) {
      if (e.name.rfind(p, 0) == 0) {
        n += e.size;
        break;
      }
    }
  }
  return n;
}

// ---------------------------------------------------------------------------
// Tape

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Param: return "param";
    case Op::MatMul: return "matmul";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::AddBias: return "add_bias";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::SumRows: return "sum_rows";
    case Op::SumCols: return "sum_cols";
    case Op::ConcatCols: return "concat_cols";
    case Op::SliceCols: return "slice_cols";
    case Op::LogSumExp: return "logsumexp";
    case Op::LogSumExpRows: return "logsumexp_rows";
    case Op::LinComb: return "lincomb";
  }
  return "?";
}

const Tensor& Var::value() const {
  if (!tape_) throw UsageError("use of an unbound Var");
  return tape_->value(id_);
}

Var Tape::constant(Tensor value) { return record(Op::Leaf, {}, std::move(value)); }

Var Tape::variable(Tensor value) {
  Var v = record(Op::Leaf, {}, std::move(value));
  nodes_.back().needs_grad = true;
  return v;
}

Var Tape::param(ParamId id) {
  if (!params_) throw UsageError("tape has no parameter store bound");
  if (auto it = param_nodes_.find(id.index); it != param_nodes_.end()) return Var(this, it->second);
  Var v = record(Op::Param, {}, params_->tensor(id));
  nodes_.back().param = id.index;
  nodes_.back().needs_grad = true;
  param_nodes_.emplace(id.index, v.id());
  return v;
}

Var Tape::record(Op op, std::vector<int> inputs, Tensor value, double scalar, std::size_t begin, std::size_t end,
                 std::vector<double> coeffs) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  n.scalar = scalar;
  n.begin = begin;
  n.end = end;
  n.coeffs = std::move(coeffs);
  for (int in : inputs) n.needs_grad = n.needs_grad || nodes_[static_cast<std::size_t>(in)].needs_grad;
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Tensor& Tape::grad_slot(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
    return;
  }
  auto dst = n.grad.data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id()));
  if (!n.has_grad) return Tensor(n.value.shape(), 0.0);
  return n.grad;
}

std::vector<double> Tape::backward(const Var& root) {
  if (root.tape() != this) throw UsageError("backward: root belongs to a different tape");
  if (root.value().size() != 1) {
    throw UsageError("backward: root must be scalar, got shape " + shape_string(root.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  std::vector<double> param_grad(params_ ? params_->size() : 0, 0.0);
  nodes_[static_cast<std::size_t>(root.id())].grad = Tensor(root.shape(), 1.0);
  nodes_[static_cast<std::size_t>(root.id())].has_grad = true;
  last_visited_ = 0;
  for (std::size_t i = static_cast<std::size_t>(root.id()) + 1; i-- > 0;) {
    if (!nodes_[i].has_grad || !nodes_[i].needs_grad) continue;
    ++last_visited_;
    backprop_node(i, param_grad);
  }
  return param_grad;
}

namespace {

void require_same_tape(const Var& a, const Var& b, const char* what) {
  if (a.tape() != b.tape() || !a.tape()) throw UsageError(std::string(what) + ": operands on different tapes");
}

void require_same_shape(const Var& a, const Var& b, const char* what) {
  require_same_tape(a, b, what);
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", what, shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
}

void require_rank2(const Var& a, const char* what) {
  if (a.value().rank() != 2) throw ShapeError(std::string(what) + ": expected rank-2 operand, got " + shape_string(a.shape()));
}

template <class F>
Tensor map_values(const Tensor& a, F f) {
  Tensor out(a.shape(), 0.0);
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

template <class F>
Tensor zip_values(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.shape(), 0.0);
  auto x = a.data();
  auto y = b.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) dst[i] = f(x[i], y[i]);
  return out;
}

Var unary(Op op, const Var& a, Tensor value, double scalar = 0.0) {
  return a.tape()->record(op, {a.id()}, std::move(value), scalar);
}

Var binary(Op op, const Var& a, const Var& b, Tensor value) {
  return a.tape()->record(op, {a.id(), b.id()}, std::move(value));
}

}  // namespace

double softplus_value(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matmul_values(const Tensor& a, const Tensor& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  if (b.rows() != k) {
    throw ShapeError(fmt::format("matmul: shape mismatch {} x {}", shape_string(a.shape()), shape_string(b.shape())));
  }
  Tensor out({n, m}, 0.0);
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = C + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A[i * k + p];
      if (aip == 0.0) continue;
      const double* brow = B + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return out;
}

void Tape::backprop_node(std::size_t i, std::vector<double>& param_grad) {
  Node& node = nodes_[i];
  const Tensor& g = node.grad;
  const auto& in = node.inputs;
  auto needs = [&](std::size_t k) { return nodes_[static_cast<std::size_t>(in[k])].needs_grad; };
  auto input_value = [&](std::size_t k) -> const Tensor& { return nodes_[static_cast<std::size_t>(in[k])].value; };

  switch (node.op) {
    case Op::Leaf:
      break;
    case Op::Param: {
      const auto& e = params_->entry(ParamId{node.param});
      auto gd = g.data();
      for (std::size_t j = 0; j < gd.size(); ++j) param_grad[e.offset + j] += gd[j];
      break;
    }
    case Op::MatMul: {
      const Tensor& A = input_value(0);
      const Tensor& B = input_value(1);
      const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
      const double* G = g.data().data();
      if (needs(0)) {
        Tensor& dA = grad_slot(in[0]);
        const double* Bv = B.data().data();
        double* dAv = dA.data().data();
        for (std::size_t r = 0; r < n; ++r) {
          const double* grow = G + r * m;
          for (std::size_t p = 0; p < k; ++p) {
            const double* brow = Bv + p * m;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += grow[j] * brow[j];
            dAv[r * k + p] += acc;
          }
        }
      }
      if (needs(1)) {
        Tensor& dB = grad_slot(in[1]);
        const double* Av = A.data().data();
        double* dBv = dB.data().data();
        for (std::size_t r = 0; r < n; ++r) {
          const double* grow = G + r * m;
          for (std::size_t p = 0; p < k; ++p) {
            const double a = Av[r * k + p];
            if (a == 0.0) continue;
            double* drow = dBv + p * m;
            for (std::size_t j = 0; j < m; ++j) drow[j] += a * grow[j];
          }
        }
      }
      break;
    }
    case Op::Add:
      if (needs(0)) accumulate(in[0], g);
      if (needs(1)) accumulate(in[1], g);
      break;
    case Op::Sub:
      if (needs(0)) accumulate(in[0], g);
      if (needs(1)) {
        auto d = grad_slot(in[1]).data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] -= g[j];
      }
      break;
    case Op::Mul: {
      if (needs(0)) {
        const Tensor& B = input_value(1);
        auto d = grad_slot(in[0]).data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] * B[j];
      }
      if (needs(1)) {
        const Tensor& A = input_value(0);
        auto d = grad_slot(in[1]).data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] * A[j];
      }
      break;
    }
    case Op::Div: {
      const Tensor& A = input_value(0);
      const Tensor& B = input_value(1);
      if (needs(0)) {
        auto d = grad_slot(in[0]).data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] / B[j];
      }
      if (needs(1)) {
        auto d = grad_slot(in[1]).data();
        for (std::size_t j = 0; j < d.size(); ++j) d[j] -= g[j] * A[j] / (B[j] * B[j]);
      }
      break;
    }
    case Op::Scale: {
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += node.scalar * g[j];
      break;
    }
    case Op::AddScalar:
      accumulate(in[0], g);
      break;
    case Op::AddBias: {
      if (needs(0)) accumulate(in[0], g);
      if (needs(1)) {
        const std::size_t r = g.rows(), c = g.cols();
        auto d = grad_slot(in[1]).data();
        for (std::size_t a = 0; a < r; ++a)
          for (std::size_t b = 0; b < c; ++b) d[b] += g[a * c + b];
      }
      break;
    }
    case Op::Softplus: {
      const Tensor& A = input_value(0);
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] * sigmoid_value(A[j]);
      break;
    }
    case Op::Sigmoid: {
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) {
        const double s = node.value[j];
        d[j] += g[j] * s * (1.0 - s);
      }
      break;
    }
    case Op::Tanh: {
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) {
        const double t = node.value[j];
        d[j] += g[j] * (1.0 - t * t);
      }
      break;
    }
    case Op::Exp: {
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] * node.value[j];
      break;
    }
    case Op::Log: {
      const Tensor& A = input_value(0);
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] / A[j];
      break;
    }
    case Op::Square: {
      const Tensor& A = input_value(0);
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += 2.0 * A[j] * g[j];
      break;
    }
    case Op::Sqrt: {
      auto d = grad_slot(in[0]).data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[j] / (2.0 * node.value[j]);
      break;
    }
    case Op::Sum: {
      auto d = grad_slot(in[0]).data();
      for (auto& v : d) v += g[0];
      break;
    }
    case Op::Mean: {
      auto d = grad_slot(in[0]).data();
      const double s = g[0] / static_cast<double>(d.size());
      for (auto& v : d) v += s;
      break;
    }
    case Op::SumRows: {
      Tensor& dA = grad_slot(in[0]);
      const std::size_t r = dA.rows(), c = dA.cols();
      for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = 0; b < c; ++b) dA[a * c + b] += g[a];
      break;
    }
    case Op::SumCols: {
      Tensor& dA = grad_slot(in[0]);
      const std::size_t r = dA.rows(), c = dA.cols();
      for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = 0; b < c; ++b) dA[a * c + b] += g[b];
      break;
    }
    case Op::ConcatCols: {
      const std::size_t r = g.rows(), total = g.cols();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t c = input_value(k).cols();
        if (needs(k)) {
          Tensor& d = grad_slot(in[k]);
          for (std::size_t a = 0; a < r; ++a)
            for (std::size_t b = 0; b < c; ++b) d[a * c + b] += g[a * total + offset + b];
        }
        offset += c;
      }
      break;
    }
    case Op::SliceCols: {
      Tensor& d = grad_slot(in[0]);
      const std::size_t r = d.rows(), c = d.cols(), w = node.end - node.begin;
      for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = 0; b < w; ++b) d[a * c + node.begin + b] += g[a * w + b];
      break;
    }
    case Op::LogSumExp: {
      const Tensor& A = input_value(0);
      auto d = grad_slot(in[0]).data();
      const double out = node.value[0];
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += g[0] * std::exp(A[j] - out);
      break;
    }
    case Op::LogSumExpRows: {
      const Tensor& A = input_value(0);
      Tensor& dA = grad_slot(in[0]);
      const std::size_t r = A.rows(), c = A.cols();
      for (std::size_t a = 0; a < r; ++a)
        for (std::size_t b = 0; b < c; ++b) dA[a * c + b] += g[a] * std::exp(A[a * c + b] - node.value[a]);
      break;
    }
    case Op::LinComb: {
      for (std::size_t k = 0; k < in.size(); ++k) {
        if (!needs(k)) continue;
        auto d = grad_slot(in[k]).data();
        const double c = node.coeffs[k];
        for (std::size_t j = 0; j < d.size(); ++j) d[j] += c * g[j];
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Primitives

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b, "matmul");
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  return binary(Op::MatMul, a, b, matmul_values(a.value(), b.value()));
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return binary(Op::Add, a, b, zip_values(a.value(), b.value(), [](double x, double y) { return x + y; }));
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return binary(Op::Sub, a, b, zip_values(a.value(), b.value(), [](double x, double y) { return x - y; }));
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return binary(Op::Mul, a, b, zip_values(a.value(), b.value(), [](double x, double y) { return x * y; }));
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  for (double v : b.value().data()) {
    if (v == 0.0) throw DomainError("div: division by zero");
  }
  return binary(Op::Div, a, b, zip_values(a.value(), b.value(), [](double x, double y) { return x / y; }));
}

Var scale(const Var& a, double c) {
  return unary(Op::Scale, a, map_values(a.value(), [c](double x) { return c * x; }), c);
}

Var add_scalar(const Var& a, double c) {
  return unary(Op::AddScalar, a, map_values(a.value(), [c](double x) { return x + c; }), c);
}

Var add_bias(const Var& a, const Var& bias) {
  require_same_tape(a, bias, "add_bias");
  require_rank2(a, "add_bias");
  require_rank2(bias, "add_bias");
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw ShapeError(fmt::format("add_bias: shape mismatch {} vs {}", shape_string(a.shape()),
                                 shape_string(bias.shape())));
  }
  Tensor out = a.value();
  const std::size_t r = out.rows(), c = out.cols();
  const auto& bv = bias.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += bv[j];
  return binary(Op::AddBias, a, bias, std::move(out));
}

Var softplus(const Var& a) { return unary(Op::Softplus, a, map_values(a.value(), softplus_value)); }

Var sigmoid(const Var& a) { return unary(Op::Sigmoid, a, map_values(a.value(), sigmoid_value)); }

Var tanh(const Var& a) { return unary(Op::Tanh, a, map_values(a.value(), [](double x) { return std::tanh(x); })); }

Var exp(const Var& a) { return unary(Op::Exp, a, map_values(a.value(), [](double x) { return std::exp(x); })); }

Var log(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError(fmt::format("log: non-positive argument {}", v));
  }
  return unary(Op::Log, a, map_values(a.value(), [](double x) { return std::log(x); }));
}

Var square(const Var& a) { return unary(Op::Square, a, map_values(a.value(), [](double x) { return x * x; })); }

Var sqrt(const Var& a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw DomainError(fmt::format("sqrt: non-positive argument {}", v));
  }
  return unary(Op::Sqrt, a, map_values(a.value(), [](double x) { return std::sqrt(x); }));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return unary(Op::Sum, a, Tensor::scalar(s));
}

Var mean(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return unary(Op::Mean, a, Tensor::scalar(s / static_cast<double>(a.value().size())));
}

Var sum_rows(const Var& a) {
  require_rank2(a, "sum_rows");
  const auto& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out({r, 1}, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += v[i * c + j];
    out[i] = s;
  }
  return unary(Op::SumRows, a, std::move(out));
}

Var sum_cols(const Var& a) {
  require_rank2(a, "sum_cols");
  const auto& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out({1, c}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += v[i * c + j];
  return unary(Op::SumCols, a, std::move(out));
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no operands");
  Tape* tape = parts[0].tape();
  const std::size_t r = parts[0].rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_same_tape(parts[0], p, "concat_cols");
    require_rank2(p, "concat_cols");
    if (p.rows() != r) {
      throw ShapeError(fmt::format("concat_cols: row mismatch {} vs {}", shape_string(parts[0].shape()),
                                   shape_string(p.shape())));
    }
    total += p.cols();
  }
  Tensor out({r, total}, 0.0);
  std::vector<int> ids;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    const std::size_t c = v.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = v[i * c + j];
    offset += c;
    ids.push_back(p.id());
  }
  return tape->record(Op::ConcatCols, std::move(ids), std::move(out));
}

Var concat_cols(const Var& a, const Var& b) {
  const Var parts[2] = {a, b};
  return concat_cols(parts);
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  const auto& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  if (begin >= end || end > c) {
    throw ShapeError(fmt::format("slice_cols: range [{}, {}) invalid for shape {}", begin, end, shape_string(v.shape())));
  }
  const std::size_t w = end - begin;
  Tensor out({r, w}, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = v[i * c + begin + j];
  return a.tape()->record(Op::SliceCols, {a.id()}, std::move(out), 0.0, begin, end);
}

Var logsumexp(const Var& a) {
  const auto& v = a.value();
  double m = -INFINITY;
  for (double x : v.data()) m = std::max(m, x);
  double s = 0.0;
  for (double x : v.data()) s += std::exp(x - m);
  return unary(Op::LogSumExp, a, Tensor::scalar(m + std::log(s)));
}

Var logsumexp_rows(const Var& a) {
  require_rank2(a, "logsumexp_rows");
  const auto& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out({r, 1}, 0.0);
  for (std::size_t i = 0; i < r; ++i) {
    double m = -INFINITY;
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, v[i * c + j]);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(v[i * c + j] - m);
    out[i] = m + std::log(s);
  }
  return unary(Op::LogSumExpRows, a, std::move(out));
}

Var lincomb(std::span<const Var> terms, std::span<const double> coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) throw UsageError("lincomb: terms and coefficients differ in count");
  Tensor out(terms[0].shape(), 0.0);
  std::vector<int> ids;
  ids.reserve(terms.size());
  auto dst = out.data();
  for (std::size_t k = 0; k < terms.size(); ++k) {
    require_same_shape(terms[0], terms[k], "lincomb");
    const auto src = terms[k].value().data();
    const double c = coeffs[k];
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += c * src[j];
    ids.push_back(terms[k].id());
  }
  return terms[0].tape()->record(Op::LinComb, std::move(ids), std::move(out), 0.0, 0, 0,
                                 std::vector<double>(coeffs.begin(), coeffs.end()));
}

}  // namespace infocnf

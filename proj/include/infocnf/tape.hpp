#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "infocnf/tensor.hpp"

namespace infocnf {

struct ParamId {
  int index = -1;
  bool valid() const { return index >= 0; }
  friend bool operator==(ParamId, ParamId) = default;
};

struct ParamEntry {
  std::string name;
  Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Named slices into a single flat parameter vector. Models own one store;
/// optimizers and checkpoints see only the flat vector plus the registry.
class ParamStore {
 public:
  ParamId add(std::string name, Shape shape, double fill = 0.0);

  std::size_t size() const { return values_.size(); }
  std::size_t count() const { return entries_.size(); }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  const ParamEntry& entry(ParamId id) const { return entries_.at(static_cast<std::size_t>(id.index)); }
  ParamId find(const std::string& name) const;

  std::span<double> values(ParamId id);
  std::span<const double> values(ParamId id) const;
  Tensor tensor(ParamId id) const;
  void set(ParamId id, const Tensor& value);

  std::vector<double>& flat() { return values_; }
  const std::vector<double>& flat() const { return values_; }

  /// Sum of entry sizes whose name starts with one of the prefixes.
  std::size_t count_with_prefix(std::span<const std::string> prefixes) const;

 private:
  std::vector<double> values_;
  std::vector<ParamEntry> entries_;
};

enum class Op : std::uint8_t {
  Leaf,
  Param,
  MatMul,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  AddBias,
  Softplus,
  Sigmoid,
  Tanh,
  Exp,
  Log,
  Square,
  Sqrt,
  Sum,
  Mean,
  SumRows,
  SumCols,
  ConcatCols,
  SliceCols,
  LogSumExp,
  LogSumExpRows,
  LinComb,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Append-only record of primitive applications. Node inputs always refer to
/// earlier nodes, so a single reverse sweep in index order is a valid
/// topological traversal.
class Tape {
 public:
  explicit Tape(const ParamStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that does not need an adjoint (data, masks, probe vectors).
  Var constant(Tensor value);
  /// Leaf whose adjoint is tracked, for derivatives w.r.t. inputs.
  Var variable(Tensor value);
  /// Leaf node for a registered parameter. Repeated calls return the same node.
  Var param(ParamId id);

  Var record(Op op, std::vector<int> inputs, Tensor value, double scalar = 0.0, std::size_t begin = 0,
             std::size_t end = 0, std::vector<double> coeffs = {});

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  std::size_t size() const { return nodes_.size(); }
  const ParamStore* params() const { return params_; }

  /// Reverse sweep from a one-element root. Returns d(root)/d(theta) aligned
  /// with the bound parameter store; parameters off the path get exactly 0.
  std::vector<double> backward(const Var& root);
  /// Adjoint of any node after backward(); zeros when the node received none.
  Tensor grad(const Var& v) const;
  /// Number of nodes the last backward() visited with a nonzero adjoint path.
  std::size_t last_visited() const { return last_visited_; }

 private:
  struct Node {
    Op op = Op::Leaf;
    std::vector<int> inputs;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool needs_grad = false;
    double scalar = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<double> coeffs;
    int param = -1;
  };

  void accumulate(int id, const Tensor& g);
  Tensor& grad_slot(int id);
  void backprop_node(std::size_t i, std::vector<double>& param_grad);

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::unordered_map<int, int> param_nodes_;
  std::size_t last_visited_ = 0;
};

// Primitives. Each records one node; shape errors name both operand shapes.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
/// a is [r, c], bias is [1, c]; the bias row is added to every row.
Var add_bias(const Var& a, const Var& bias);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);
/// [r, c] -> [r, 1]
Var sum_rows(const Var& a);
/// [r, c] -> [1, c]
Var sum_cols(const Var& a);
Var concat_cols(std::span<const Var> parts);
Var concat_cols(const Var& a, const Var& b);
/// Columns [begin, end).
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
/// Over all entries -> [1, 1].
Var logsumexp(const Var& a);
/// [r, c] -> [r, 1]
Var logsumexp_rows(const Var& a);
/// sum_k coeffs[k] * terms[k]; all terms share a shape.
Var lincomb(std::span<const Var> terms, std::span<const double> coeffs);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }

// Plain-value helpers used by the primitives and by test oracles.
double softplus_value(double x);
double sigmoid_value(double x);
Tensor matmul_values(const Tensor& a, const Tensor& b);

}  // namespace infocnf

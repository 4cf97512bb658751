#include "infocnf/tensor.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ", ")); }

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto s : shape_) {
    if (s == 0) throw ShapeError("tensor shape " + shape_string(shape_) + " has a zero extent");
  }
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto s : shape_) {
    if (s == 0) throw ShapeError("tensor shape " + shape_string(shape_) + " has a zero extent");
  }
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError(fmt::format("tensor shape {} needs {} values, got {}", shape_string(shape_),
                                 shape_size(shape_), data_.size()));
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::column(std::span<const double> values) {
  return Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.size() != 2) throw ShapeError("expected a rank-2 tensor, got " + shape_string(shape_));
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() != 2) throw ShapeError("expected a rank-2 tensor, got " + shape_string(shape_));
  return shape_[1];
}

double Tensor::item() const {
  if (data_.size() != 1) throw UsageError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  const std::size_t c = cols();
  if (begin >= end || end > rows()) throw ShapeError("row slice out of range");
  return Tensor({end - begin, c}, std::vector<double>(data_.begin() + begin * c, data_.begin() + end * c));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> idx) const {
  const std::size_t c = cols();
  std::vector<double> out;
  out.reserve(idx.size() * c);
  for (auto r : idx) {
    if (r >= rows()) throw ShapeError("row index out of range");
    out.insert(out.end(), data_.begin() + r * c, data_.begin() + (r + 1) * c);
  }
  return Tensor({idx.size(), c}, std::move(out));
}

std::vector<double> Tensor::row_values(std::size_t r) const {
  const std::size_t c = cols();
  return std::vector<double>(data_.begin() + r * c, data_.begin() + (r + 1) * c);
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double max_abs(const Tensor& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace infocnf

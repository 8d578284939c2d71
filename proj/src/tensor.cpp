#include "snn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace snn {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
  data_.assign(shape_size(shape_), real(0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, real value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<real> data) {
  if (shape_size(shape) != data.size()) {
    throw std::invalid_argument("Tensor::from: shape " +
                                Tensor(shape).shape_str() + " wants " +
                                std::to_string(shape_size(shape)) +
                                " elements, got " + std::to_string(data.size()));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

std::size_t Tensor::flat_index(const std::vector<std::size_t>& idx) const {
  if (idx.size() != shape_.size()) {
    throw std::out_of_range("Tensor::at: rank mismatch");
  }
  std::size_t off = 0;
  for (std::size_t d = 0; d < idx.size(); ++d) {
    if (idx[d] >= shape_[d]) throw std::out_of_range("Tensor::at: index out of range");
    off = off * shape_[d] + idx[d];
  }
  return off;
}

real& Tensor::at(const std::vector<std::size_t>& idx) { return data_[flat_index(idx)]; }
real Tensor::at(const std::vector<std::size_t>& idx) const { return data_[flat_index(idx)]; }

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("Tensor::reshaped: element count mismatch");
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(real value) {
  for (real& x : data_) x = value;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t d = 0; d < shape_.size(); ++d) {
    if (d) os << 'x';
    os << shape_[d];
  }
  os << ']';
  return os.str();
}

void check_finite(const Tensor& t, const std::string& what) {
  const real* p = t.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(p[i])) {
      throw std::runtime_error("non-finite value in " + what + " at flat index " +
                               std::to_string(i));
    }
  }
}

}  // namespace snn

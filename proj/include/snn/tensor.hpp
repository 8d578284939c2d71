#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace snn {

#ifdef SNN_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

/// Dense row-major n-dimensional array of `real`. The single value carrier
/// used throughout the library; compute kernels live in kernels.hpp as free
/// functions. Instances are treated as immutable once they leave a kernel,
/// so they can be shared across threads for reading.
class Tensor {
 public:
  Tensor() = default;

  /// Zero-filled tensor of the given shape.
  explicit Tensor(std::vector<std::size_t> shape);

  static Tensor full(std::vector<std::size_t> shape, real value);
  static Tensor from(std::vector<std::size_t> shape, std::vector<real> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }

  /// Multi-index access with bounds checking. Convenience for tests and
  /// cold paths; hot loops index flat offsets directly.
  real& at(const std::vector<std::size_t>& idx);
  real at(const std::vector<std::size_t>& idx) const;

  /// Same data, new shape; element counts must agree.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  void fill(real value);

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

  std::string shape_str() const;

 private:
  std::size_t flat_index(const std::vector<std::size_t>& idx) const;

  std::vector<std::size_t> shape_;
  std::vector<real> data_;
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

/// Throws std::runtime_error naming `what` if any element is NaN/Inf.
/// Every public kernel runs its output through this so non-finite values
/// surface at the operation that produced them.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace snn

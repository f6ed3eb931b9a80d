#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <stdexcept>

namespace ldct {

/// Dense N x C x H x W tensor with row-major storage and an optional
/// gradient buffer of the same shape. Activations and layer parameters
/// share this type; parameter tensors keep has_grad() true during training.
template <class Scalar>
class Tensor {
public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  Tensor() : dims_{0, 0, 0, 0} {}

  Tensor(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w)
      : dims_{n, c, h, w}, values_(Storage::Zero(n * c * h * w)) {
    if (n < 1 || c < 1 || h < 1 || w < 1)
      throw std::invalid_argument("Tensor: all dims must be >= 1");
  }

  static Tensor zeros(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w) {
    return Tensor(n, c, h, w);
  }

  Eigen::Index n() const { return dims_[0]; }
  Eigen::Index c() const { return dims_[1]; }
  Eigen::Index h() const { return dims_[2]; }
  Eigen::Index w() const { return dims_[3]; }
  const std::array<Eigen::Index, 4>& dims() const { return dims_; }
  Eigen::Index size() const { return values_.size(); }
  Eigen::Index plane() const { return dims_[2] * dims_[3]; }

  bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }

  Scalar& operator()(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w) {
    return values_[offset(n, c, h, w)];
  }
  Scalar operator()(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w) const {
    return values_[offset(n, c, h, w)];
  }

  Storage& values() { return values_; }
  const Storage& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  /// Pointer to the start of channel c of item n.
  Scalar* plane_data(Eigen::Index n, Eigen::Index c) { return data() + offset(n, c, 0, 0); }
  const Scalar* plane_data(Eigen::Index n, Eigen::Index c) const {
    return data() + offset(n, c, 0, 0);
  }

  bool has_grad() const { return grad_.size() == values_.size() && values_.size() > 0; }
  Storage& grad() {
    if (!has_grad()) grad_ = Storage::Zero(values_.size());
    return grad_;
  }
  const Storage& grad() const { return grad_; }
  void zero_grad() {
    if (has_grad())
      grad_.setZero();
    else
      grad_ = Storage::Zero(values_.size());
  }

  void set_zero() { values_.setZero(); }

  template <class Other>
  Tensor<Other> cast() const {
    Tensor<Other> out(dims_[0], dims_[1], dims_[2], dims_[3]);
    out.values() = values_.template cast<Other>();
    return out;
  }

private:
  Eigen::Index offset(Eigen::Index n, Eigen::Index c, Eigen::Index h, Eigen::Index w) const {
    return ((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
  }

  std::array<Eigen::Index, 4> dims_;
  Storage values_;
  Storage grad_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace ldct

#pragma once

#include "semu/types.hpp"

namespace semu {

// Dense H x W x C tensor stored as an (H*W) x C Eigen matrix, pixel index
// p = y*W + x. Keeping channels as columns makes every convolution a GEMM.
template <typename Scalar>
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(Index h, Index w, Index c) : w_(w), m_(Mat<Scalar>::Zero(h * w, c)) {}
  Tensor3(Index h, Index w, Mat<Scalar> m) : w_(w), m_(std::move(m)) {
    if (m_.rows() != h * w) throw DimensionError("Tensor3: data rows do not match h*w");
  }

  Index height() const { return w_ == 0 ? 0 : m_.rows() / w_; }
  Index width() const { return w_; }
  Index channels() const { return m_.cols(); }

  Scalar& operator()(Index y, Index x, Index c) { return m_(y * w_ + x, c); }
  Scalar operator()(Index y, Index x, Index c) const { return m_(y * w_ + x, c); }

  Mat<Scalar>& mat() { return m_; }
  const Mat<Scalar>& mat() const { return m_; }

  template <typename T>
  Tensor3<T> cast() const {
    return Tensor3<T>(height(), width(), m_.template cast<T>().eval());
  }

 private:
  Index w_ = 0;
  Mat<Scalar> m_;
};

// Channel-wise concatenation [a | b].
template <typename Scalar>
Tensor3<Scalar> concat(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  if (a.height() != b.height() || a.width() != b.width())
    throw DimensionError("concat: spatial shape mismatch");
  Mat<Scalar> m(a.mat().rows(), a.channels() + b.channels());
  m.leftCols(a.channels()) = a.mat();
  m.rightCols(b.channels()) = b.mat();
  return Tensor3<Scalar>(a.height(), a.width(), std::move(m));
}

}  // namespace semu

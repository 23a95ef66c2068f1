#pragma once

#include <cmath>

#include "semu/types.hpp"

namespace semu {

// Plain ADAM with bias correction.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  explicit Adam(Index n, Scalar lr = Scalar(1e-4), Scalar beta1 = Scalar(0.9),
                Scalar beta2 = Scalar(0.999), Scalar eps = Scalar(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
        m_(Vec<Scalar>::Zero(n)), v_(Vec<Scalar>::Zero(n)) {}

  void step(Vec<Scalar>& params, const Vec<Scalar>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size())
      throw DimensionError("Adam::step: size mismatch");
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseProduct(grad);
    const Scalar bc1 = Scalar(1) - std::pow(beta1_, Scalar(t_));
    const Scalar bc2 = Scalar(1) - std::pow(beta2_, Scalar(t_));
    params.array() -=
        lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
  }

  Scalar learning_rate() const { return lr_; }
  long steps() const { return t_; }
  Vec<Scalar>& moment1() { return m_; }
  Vec<Scalar>& moment2() { return v_; }
  const Vec<Scalar>& moment1() const { return m_; }
  const Vec<Scalar>& moment2() const { return v_; }
  void restore(Vec<Scalar> m, Vec<Scalar> v, long t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
  }

 private:
  Scalar lr_ = Scalar(1e-4), beta1_ = Scalar(0.9), beta2_ = Scalar(0.999), eps_ = Scalar(1e-8);
  Vec<Scalar> m_, v_;
  long t_ = 0;
};

}  // namespace semu

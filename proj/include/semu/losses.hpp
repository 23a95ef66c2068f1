#pragma once

#include <cmath>

#include "semu/tensor.hpp"
#include "semu/types.hpp"

// Training losses: mean-absolute reconstruction error, per-pixel softmax
// cross-entropy with the 1/(N*C) normalization, and their weighted sum.
// Note the cross-entropy divides by N*C (not the usual N); the uniform
// prediction value is therefore ln(C)/C.

namespace semu {

template <typename Scalar>
struct LossBreakdown {
  Scalar recon = 0;
  Scalar seg = 0;
  Scalar total = 0;
  Scalar lambda = 0;
};

template <typename Scalar>
Scalar l1_loss(const Mat<Scalar>& pred, const Mat<Scalar>& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DimensionError("l1_loss: shape mismatch");
  return (pred - target).cwiseAbs().sum() / Scalar(pred.size());
}

// Subgradient: sign(pred - target) / N.
template <typename Scalar>
Mat<Scalar> l1_loss_grad(const Mat<Scalar>& pred, const Mat<Scalar>& target) {
  const Scalar inv_n = Scalar(1) / Scalar(pred.size());
  return (pred - target).unaryExpr([inv_n](Scalar d) {
    return d > Scalar(0) ? inv_n : (d < Scalar(0) ? -inv_n : Scalar(0));
  });
}

// Row-wise (per-pixel) softmax over the channel axis.
template <typename Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& logits) {
  Mat<Scalar> p = (logits.colwise() - logits.rowwise().maxCoeff()).array().exp();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

template <typename Scalar>
void check_labels(const MatI& labels, Index c, Index n_pixels, const char* op) {
  if (labels.size() != n_pixels) throw DimensionError(std::string(op) + ": label shape mismatch");
  if ((labels.array() < 0).any() || (labels.array() >= int(c)).any())
    throw ContractError(std::string(op) + ": label index out of range [0," + std::to_string(c) + ")");
}

// labels are row-major H x W class indices; logits a Tensor3 over the same grid.
template <typename Scalar>
Scalar cross_entropy_loss(const Tensor3<Scalar>& logits, const MatI& labels) {
  const Index c = logits.channels();
  check_labels<Scalar>(labels, c, logits.mat().rows(), "cross_entropy_loss");
  const Mat<Scalar> p = softmax_rows(logits.mat());
  Scalar sum = 0;
  for (Index y = 0; y < labels.rows(); ++y)
    for (Index x = 0; x < labels.cols(); ++x)
      sum -= std::log(std::max(p(y * labels.cols() + x, labels(y, x)), Scalar(1e-30)));
  return sum / (Scalar(logits.mat().rows()) * Scalar(c));
}

// d loss / d logits = (softmax - onehot) / (N*C).
template <typename Scalar>
Tensor3<Scalar> cross_entropy_grad(const Tensor3<Scalar>& logits, const MatI& labels) {
  const Index c = logits.channels();
  check_labels<Scalar>(labels, c, logits.mat().rows(), "cross_entropy_grad");
  Mat<Scalar> g = softmax_rows(logits.mat());
  for (Index y = 0; y < labels.rows(); ++y)
    for (Index x = 0; x < labels.cols(); ++x) g(y * labels.cols() + x, labels(y, x)) -= Scalar(1);
  g /= Scalar(logits.mat().rows()) * Scalar(c);
  return Tensor3<Scalar>(logits.height(), logits.width(), std::move(g));
}

template <typename Scalar>
LossBreakdown<Scalar> hybrid_loss(const Mat<Scalar>& recon_pred, const Mat<Scalar>& recon_target,
                                  const Tensor3<Scalar>& seg_logits, const MatI& seg_labels,
                                  Scalar lambda) {
  LossBreakdown<Scalar> lb;
  lb.lambda = lambda;
  lb.recon = l1_loss(recon_pred, recon_target);
  lb.seg = cross_entropy_loss(seg_logits, seg_labels);
  lb.total = lb.recon + lambda * lb.seg;
  return lb;
}

}  // namespace semu

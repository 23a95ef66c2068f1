#pragma once

#include <cmath>
#include <vector>

#include "semu/types.hpp"

// Evaluation metrics: PSNR (capped 99 dB sentinel at zero error), mean
// local SSIM with a 7x7 uniform window, and per-class Dice. A class absent
// from both maps scores 1.0 by convention and is excluded from the mean,
// which averages over present foreground classes only.

namespace semu {

constexpr double kPsnrCap = 99.0;

inline double psnr(const MatD& pred, const MatD& target, double data_range) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DimensionError("psnr: shape mismatch");
  if (!(data_range > 0)) throw ContractError("psnr: data_range must be positive");
  const double mse = (pred - target).squaredNorm() / double(pred.size());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

inline double ssim(const MatD& pred, const MatD& target, double data_range) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw DimensionError("ssim: shape mismatch");
  constexpr int kWin = 7;
  if (pred.rows() < kWin || pred.cols() < kWin)
    throw DimensionError("ssim: image smaller than 7x7 window");
  const double c1 = std::pow(0.01 * data_range, 2);
  const double c2 = std::pow(0.03 * data_range, 2);

  // box filter over valid windows via running column sums
  const auto box = [&](const MatD& m) {
    MatD colsum(m.rows() - kWin + 1, m.cols());
    for (Index c = 0; c < m.cols(); ++c) {
      double s = m.col(c).head(kWin).sum();
      colsum(0, c) = s;
      for (Index r = 1; r + kWin - 1 < m.rows(); ++r) {
        s += m(r + kWin - 1, c) - m(r - 1, c);
        colsum(r, c) = s;
      }
    }
    MatD out(colsum.rows(), m.cols() - kWin + 1);
    for (Index r = 0; r < colsum.rows(); ++r) {
      double s = colsum.row(r).head(kWin).sum();
      out(r, 0) = s;
      for (Index c = 1; c + kWin - 1 < m.cols(); ++c) {
        s += colsum(r, c + kWin - 1) - colsum(r, c - 1);
        out(r, c) = s;
      }
    }
    return MatD(out / double(kWin * kWin));
  };

  const MatD mu_x = box(pred), mu_y = box(target);
  const MatD xx = box(pred.cwiseProduct(pred)) - mu_x.cwiseProduct(mu_x);
  const MatD yy = box(target.cwiseProduct(target)) - mu_y.cwiseProduct(mu_y);
  const MatD xy = box(pred.cwiseProduct(target)) - mu_x.cwiseProduct(mu_y);

  const auto num = ((2.0 * mu_x.cwiseProduct(mu_y)).array() + c1) * ((2.0 * xy).array() + c2);
  const auto den = (mu_x.cwiseProduct(mu_x) + mu_y.cwiseProduct(mu_y)).array() + c1;
  const auto den2 = (xx + yy).array() + c2;
  return (num / (den * den2)).mean();
}

struct DiceResult {
  std::vector<double> per_class;  // size C, absent-from-both classes score 1.0
  double mean = 0.0;              // over present foreground classes
};

inline DiceResult dice(const MatI& pred_labels, const MatI& true_labels, int class_count) {
  if (pred_labels.rows() != true_labels.rows() || pred_labels.cols() != true_labels.cols())
    throw DimensionError("dice: shape mismatch");
  DiceResult res;
  res.per_class.assign(static_cast<size_t>(class_count), 1.0);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < class_count; ++c) {
    Index np = 0, nt = 0, inter = 0;
    for (Index r = 0; r < pred_labels.rows(); ++r)
      for (Index col = 0; col < pred_labels.cols(); ++col) {
        const bool p = pred_labels(r, col) == c;
        const bool t = true_labels(r, col) == c;
        np += p;
        nt += t;
        inter += p && t;
      }
    if (np + nt > 0) res.per_class[static_cast<size_t>(c)] = 2.0 * double(inter) / double(np + nt);
    if (c > 0 && np + nt > 0) {  // background excluded from the mean
      sum += res.per_class[static_cast<size_t>(c)];
      ++present;
    }
  }
  res.mean = present > 0 ? sum / present : 1.0;
  return res;
}

}  // namespace semu

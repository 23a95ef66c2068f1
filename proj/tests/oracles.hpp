#pragma once

// Independent reference implementations used to cross-check the library:
// a brute-force O(N^2) DFT, a direct-summation SSIM, and a naive sliding
// window convolution. Deliberately slow and written from the definitions.

#include <cmath>
#include <complex>

#include "semu/backbone.hpp"
#include "semu/fourier.hpp"
#include "semu/types.hpp"

namespace oracle {

using semu::Index;
using semu::Mat;
using semu::MatD;

// Centered unitary 2D DFT straight from the definition:
//   X(k,l) = 1/sqrt(HW) * sum_{y,x} x(y,x) exp(-2*pi*i*(ky' + lx')/H)
// with indices shifted so the zero frequency lands at (H/2, W/2).
inline Mat<std::complex<double>> dft2c_reference(const Mat<std::complex<double>>& img) {
  const Index h = img.rows(), w = img.cols();
  const double scale = 1.0 / std::sqrt(double(h * w));
  Mat<std::complex<double>> out(h, w);
  for (Index k = 0; k < h; ++k)
    for (Index l = 0; l < w; ++l) {
      std::complex<double> acc(0, 0);
      const double fk = double(k - h / 2), fl = double(l - w / 2);
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double ph =
              -2.0 * M_PI * (fk * double(y - h / 2) / double(h) + fl * double(x - w / 2) / double(w));
          acc += img(y, x) * std::complex<double>(std::cos(ph), std::sin(ph));
        }
      out(k, l) = acc * scale;
    }
  return out;
}

// SSIM by direct per-window summation, same 7x7 uniform window and
// K1=0.01, K2=0.03 constants; biased (1/n) moments over valid windows.
inline double ssim_reference(const MatD& a, const MatD& b, double data_range) {
  constexpr int kWin = 7;
  const double c1 = std::pow(0.01 * data_range, 2), c2 = std::pow(0.03 * data_range, 2);
  const Index rows = a.rows() - kWin + 1, cols = a.cols() - kWin + 1;
  double total = 0.0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < kWin; ++i)
        for (int j = 0; j < kWin; ++j) {
          const double x = a(r + i, c + j), y = b(r + i, c + j);
          sx += x;
          sy += y;
          sxx += x * x;
          syy += y * y;
          sxy += x * y;
        }
      const double n = kWin * kWin;
      const double mx = sx / n, my = sy / n;
      const double vx = sxx / n - mx * mx, vy = syy / n - my * my, cov = sxy / n - mx * my;
      total += ((2 * mx * my + c1) * (2 * cov + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / double(rows * cols);
}

// Zero-padded 3x3 (or 1x1) convolution + optional ReLU, straight loops.
template <typename Scalar>
semu::Tensor3<Scalar> conv_reference(const semu::NetworkParameters<Scalar>& params,
                                     const semu::ConvSpec& spec, const semu::Tensor3<Scalar>& in) {
  const Index h = in.height(), w = in.width();
  semu::Tensor3<Scalar> out(h, w, spec.cout);
  const int r = spec.kernel / 2;
  for (Index oc = 0; oc < spec.cout; ++oc)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x) {
        Scalar acc = params.bias(spec)[oc];
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const Index yy = y + dy, xx = x + dx;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            const Index o = (dy + r) * spec.kernel + (dx + r);
            for (Index ic = 0; ic < spec.cin; ++ic)
              acc += in(yy, xx, ic) * params.weight(spec)(o * spec.cin + ic, oc);
          }
        if (spec.relu && acc < Scalar(0)) acc = Scalar(0);
        out(y, x, oc) = acc;
      }
  return out;
}

}  // namespace oracle

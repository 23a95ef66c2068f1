#pragma once

#include <unsupported/Eigen/FFT>

#include <complex>

#include "semu/types.hpp"

// Centered unitary 2D Fourier operators and the mask-weighted
// undersampling forward model m .* F x.
//
// All grids are square H x H. The k-space layout places the zero-frequency
// coefficient at (H/2, W/2) (floor division), matching the center-weighted
// sampling masks this operator feeds.

namespace semu {

enum class GridLayout { ImageDomain, KspaceCentered };

template <typename Scalar>
struct ComplexGrid {
  Mat<Scalar> real;
  Mat<Scalar> imag;
  GridLayout layout = GridLayout::ImageDomain;

  Index rows() const { return real.rows(); }
  Index cols() const { return real.cols(); }

  static ComplexGrid fromReal(const Mat<Scalar>& r, GridLayout lay = GridLayout::ImageDomain) {
    return ComplexGrid{r, Mat<Scalar>::Zero(r.rows(), r.cols()), lay};
  }

  Scalar squaredNorm() const { return real.squaredNorm() + imag.squaredNorm(); }
};

namespace detail {

template <typename Scalar>
void checkSquare(const ComplexGrid<Scalar>& g, const char* op) {
  if (g.rows() == 0 || g.cols() == 0)
    throw DimensionError(std::string(op) + ": empty input grid");
  if (g.rows() != g.cols())
    throw DimensionError(std::string(op) + ": grid must be square, got " +
                         std::to_string(g.rows()) + "x" + std::to_string(g.cols()));
  if (g.real.rows() != g.imag.rows() || g.real.cols() != g.imag.cols())
    throw DimensionError(std::string(op) + ": real/imag plane shape mismatch");
}

// Circular shift moving index `shift` to index 0.
template <typename Scalar>
Mat<std::complex<Scalar>> circShift(const Mat<std::complex<Scalar>>& m, Index dr, Index dc) {
  const Index h = m.rows(), w = m.cols();
  Mat<std::complex<Scalar>> out(h, w);
  for (Index c = 0; c < w; ++c)
    for (Index r = 0; r < h; ++r) out((r + dr) % h, (c + dc) % w) = m(r, c);
  return out;
}

template <typename Scalar>
Mat<std::complex<Scalar>> fftshift(const Mat<std::complex<Scalar>>& m) {
  return circShift<Scalar>(m, m.rows() / 2, m.cols() / 2);
}

template <typename Scalar>
Mat<std::complex<Scalar>> ifftshift(const Mat<std::complex<Scalar>>& m) {
  return circShift<Scalar>(m, (m.rows() + 1) / 2, (m.cols() + 1) / 2);
}

template <typename Scalar>
Mat<std::complex<Scalar>> toComplex(const ComplexGrid<Scalar>& g) {
  Mat<std::complex<Scalar>> z(g.rows(), g.cols());
  z.real() = g.real;
  z.imag() = g.imag;
  return z;
}

template <typename Scalar>
ComplexGrid<Scalar> fromComplex(const Mat<std::complex<Scalar>>& z, GridLayout lay) {
  return ComplexGrid<Scalar>{z.real(), z.imag(), lay};
}

// Unscaled 2D DFT applied as row transforms then column transforms.
template <typename Scalar>
Mat<std::complex<Scalar>> dft2(const Mat<std::complex<Scalar>>& in, bool inverse) {
  using CVec = Vec<std::complex<Scalar>>;
  Eigen::FFT<Scalar> fft;
  const Index h = in.rows(), w = in.cols();
  Mat<std::complex<Scalar>> tmp(h, w), out(h, w);
  CVec line(w), spec(w);
  for (Index r = 0; r < h; ++r) {
    line = in.row(r).transpose();
    if (inverse)
      fft.inv(spec, line);
    else
      fft.fwd(spec, line);
    tmp.row(r) = spec.transpose();
  }
  CVec col(h), cspec(h);
  for (Index c = 0; c < w; ++c) {
    col = tmp.col(c);
    if (inverse)
      fft.inv(cspec, col);
    else
      fft.fwd(cspec, col);
    out.col(c) = cspec;
  }
  return out;
}

}  // namespace detail

// Centered orthonormal 2D DFT: fftshift(F(ifftshift(x))) / sqrt(N).
template <typename Scalar>
ComplexGrid<Scalar> fft2c(const ComplexGrid<Scalar>& img) {
  detail::checkSquare(img, "fft2c");
  if (img.layout != GridLayout::ImageDomain)
    throw ContractError("fft2c: input must be image-domain layout");
  auto z = detail::ifftshift(detail::toComplex(img));
  z = detail::dft2(z, /*inverse=*/false);
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(img.rows() * img.cols()));
  z = detail::fftshift<Scalar>((z * scale).eval());
  return detail::fromComplex(z, GridLayout::KspaceCentered);
}

// Exact inverse of fft2c.
template <typename Scalar>
ComplexGrid<Scalar> ifft2c(const ComplexGrid<Scalar>& ksp) {
  detail::checkSquare(ksp, "ifft2c");
  if (ksp.layout != GridLayout::KspaceCentered)
    throw ContractError("ifft2c: input must be kspace-centered layout");
  auto z = detail::ifftshift(detail::toComplex(ksp));
  z = detail::dft2(z, /*inverse=*/true);
  // Eigen's inv scales by 1/n per axis; undo down to the unitary 1/sqrt(N).
  const Scalar scale = std::sqrt(Scalar(ksp.rows() * ksp.cols()));
  z = detail::fftshift<Scalar>((z * scale).eval());
  return detail::fromComplex(z, GridLayout::ImageDomain);
}

// mask .* fft2c(x). Mask entries must lie in [0,1]; the same weighting is
// applied to the real and imaginary planes, so the op is linear in both
// x and mask.
template <typename Scalar>
ComplexGrid<Scalar> undersample(const ComplexGrid<Scalar>& x, const Mat<Scalar>& mask) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols())
    throw DimensionError("undersample: mask shape " + std::to_string(mask.rows()) + "x" +
                         std::to_string(mask.cols()) + " does not match image " +
                         std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
  if ((mask.array() < Scalar(0)).any() || (mask.array() > Scalar(1)).any())
    throw ContractError("undersample: mask entries must lie in [0,1]");
  ComplexGrid<Scalar> k = fft2c(x);
  k.real.array() *= mask.array();
  k.imag.array() *= mask.array();
  return k;
}

// Inverse FFT of (partially) sampled k-space; the network input of the
// reconstruction stage.
template <typename Scalar>
ComplexGrid<Scalar> zero_filled_recon(const ComplexGrid<Scalar>& ksp) {
  return ifft2c(ksp);
}

// Gradient of sum(g_real .* out.real + g_imag .* out.imag) with respect to
// the mask, for out = undersample(x, mask). Pure adjoint bookkeeping:
// d out / d mask_ij is the (i,j) coefficient of fft2c(x).
template <typename Scalar>
Mat<Scalar> undersample_mask_grad(const ComplexGrid<Scalar>& x, const ComplexGrid<Scalar>& grad_ksp) {
  ComplexGrid<Scalar> k = fft2c(x);
  return (grad_ksp.real.array() * k.real.array() + grad_ksp.imag.array() * k.imag.array()).matrix();
}

}  // namespace semu

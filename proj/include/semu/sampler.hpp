#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "semu/types.hpp"

// Trainable probabilistic k-space sampling pattern: parameter layer
// (parametrized sigmoid over unconstrained weights), scaling layer
// (mean pinned to the target rate), Monte-Carlo layer (smooth threshold
// against fresh uniform noise), plus Booleanization and the fixed
// radial/random baseline generators.

namespace semu {

template <typename Scalar>
struct ProbabilisticMask {
  Mat<Scalar> weights;           // unconstrained, pre-sigmoid
  Scalar slope_prob = Scalar(40);
  Scalar slope_threshold = Scalar(10);
  Scalar rate = Scalar(0.1);

  Index rows() const { return weights.rows(); }
  Index cols() const { return weights.cols(); }
};

class BinaryMask {
 public:
  BinaryMask(MatI pattern, double rate)
      : pattern_(std::move(pattern)), rate_(rate), ones_count_(pattern_.sum()) {}

  const MatI& pattern() const { return pattern_; }
  double rate() const { return rate_; }
  Index ones_count() const { return ones_count_; }
  Index rows() const { return pattern_.rows(); }
  Index cols() const { return pattern_.cols(); }

  template <typename Scalar>
  Mat<Scalar> asReal() const {
    return pattern_.cast<Scalar>();
  }

 private:
  MatI pattern_;
  double rate_;
  Index ones_count_;
};

inline Index mask_ones_for_rate(double rate, Index n_total) {
  return static_cast<Index>(std::llround(rate * static_cast<double>(n_total)));
}

template <typename Scalar>
Mat<Scalar> draw_uniform(Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Mat<Scalar> u(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) u(r, c) = Scalar(unif(rng));
  return u;
}

// Draw v ~ U[0,1) per entry and store weights = inverse-sigmoid(v)/slope so
// the parameter layer reproduces v exactly.
template <typename Scalar>
ProbabilisticMask<Scalar> init_uniform(Index h, Index w, Scalar rate, std::uint64_t seed,
                                       Scalar slope_prob = Scalar(40),
                                       Scalar slope_threshold = Scalar(10)) {
  if (!(rate > Scalar(0) && rate <= Scalar(1)))
    throw ConfigError("init_uniform: rate must lie in (0,1], got " + std::to_string(rate));
  if (h < 4 || w < 4) throw ConfigError("init_uniform: mask must be at least 4x4");
  ProbabilisticMask<Scalar> pm;
  pm.slope_prob = slope_prob;
  pm.slope_threshold = slope_threshold;
  pm.rate = rate;
  pm.weights = draw_uniform<Scalar>(h, w, seed);
  // logit clamped away from 0 so the inverse stays finite
  pm.weights = pm.weights.unaryExpr([slope_prob](Scalar v) {
    v = std::min(std::max(v, Scalar(1e-12)), Scalar(1) - Scalar(1e-12));
    return std::log(v / (Scalar(1) - v)) / slope_prob;
  });
  return pm;
}

template <typename Scalar>
Mat<Scalar> probability_layer(const ProbabilisticMask<Scalar>& pm) {
  const Scalar k = pm.slope_prob;
  return pm.weights.unaryExpr([k](Scalar w) { return Scalar(1) / (Scalar(1) + std::exp(-k * w)); });
}

// d loss / d weights given d loss / d probabilities.
template <typename Scalar>
Mat<Scalar> probability_layer_backward(const ProbabilisticMask<Scalar>& pm, const Mat<Scalar>& p,
                                       const Mat<Scalar>& grad_p) {
  return (grad_p.array() * pm.slope_prob * p.array() * (Scalar(1) - p.array())).matrix();
}

// Rescale so mean(output) == rate. For mean >= rate a plain multiplicative
// scale suffices; below the rate the complement form keeps values <= 1.
template <typename Scalar>
Mat<Scalar> scaling_layer(const Mat<Scalar>& p, Scalar rate) {
  const Scalar mu = p.mean();
  if (mu <= Scalar(0) || mu >= Scalar(1))
    throw NumericalError("scaling_layer: degenerate input mean " + std::to_string(mu));
  if (mu >= rate) return p * (rate / mu);
  const Scalar f = (Scalar(1) - rate) / (Scalar(1) - mu);
  return (Scalar(1) - (Scalar(1) - p.array()) * f).matrix();
}

template <typename Scalar>
Mat<Scalar> scaling_layer_backward(const Mat<Scalar>& p, Scalar rate, const Mat<Scalar>& grad_out) {
  const Scalar mu = p.mean();
  const Scalar n = Scalar(p.size());
  if (mu >= rate) {
    // out_i = p_i * rate / mu
    const Scalar dot = (grad_out.array() * p.array()).sum();
    return (grad_out.array() * (rate / mu) - dot * rate / (mu * mu * n)).matrix();
  }
  // out_i = 1 - (1 - p_i) * (1 - rate) / (1 - mu)
  const Scalar nu = Scalar(1) - mu;
  const Scalar f = Scalar(1) - rate;
  const Scalar dot = (grad_out.array() * (Scalar(1) - p.array())).sum();
  return (grad_out.array() * (f / nu) - dot * f / (nu * nu * n)).matrix();
}

// sigma(slope * (p - u)): a smooth realization of the Bernoulli draw
// 1[p > u], unbiased in expectation under the hard threshold.
template <typename Scalar>
Mat<Scalar> monte_carlo_from_noise(const Mat<Scalar>& p_scaled, const Mat<Scalar>& u, Scalar slope) {
  return ((p_scaled - u) * slope)
      .unaryExpr([](Scalar z) { return Scalar(1) / (Scalar(1) + std::exp(-z)); });
}

template <typename Scalar>
Mat<Scalar> monte_carlo_layer(const Mat<Scalar>& p_scaled, std::uint64_t noise_seed, Scalar slope) {
  return monte_carlo_from_noise(p_scaled, draw_uniform<Scalar>(p_scaled.rows(), p_scaled.cols(), noise_seed),
                                slope);
}

// d loss / d p_scaled with the noise draw held constant.
template <typename Scalar>
Mat<Scalar> monte_carlo_backward(const Mat<Scalar>& mc_out, Scalar slope, const Mat<Scalar>& grad_out) {
  return (grad_out.array() * slope * mc_out.array() * (Scalar(1) - mc_out.array())).matrix();
}

namespace detail {

inline BinaryMask topn_mask(const MatD& values, double rate) {
  const Index h = values.rows(), w = values.cols();
  const Index n = mask_ones_for_rate(rate, h * w);
  if (n <= 0) throw ConfigError("booleanize: rate * N rounds to zero samples");
  std::vector<Index> idx(static_cast<size_t>(h * w));
  std::iota(idx.begin(), idx.end(), Index(0));
  // row-major position; ties broken toward the smaller index
  auto value_at = [&](Index i) { return values(i / w, i % w); };
  std::sort(idx.begin(), idx.end(), [&](Index a, Index b) {
    const double va = value_at(a), vb = value_at(b);
    if (va != vb) return va > vb;
    return a < b;
  });
  MatI pattern = MatI::Zero(h, w);
  for (Index i = 0; i < n; ++i) pattern(idx[i] / w, idx[i] % w) = 1;
  return BinaryMask(pattern, rate);
}

}  // namespace detail

// Deterministic top-n of the scaled probabilities (no Monte-Carlo noise).
template <typename Scalar>
BinaryMask booleanize(const ProbabilisticMask<Scalar>& pm) {
  const Mat<Scalar> scaled = scaling_layer(probability_layer(pm), pm.rate);
  return detail::topn_mask(scaled.template cast<double>(), double(pm.rate));
}

enum class FixedMaskKind { Radial, Random };

BinaryMask fixed_mask(FixedMaskKind kind, Index h, Index w, double rate, std::uint64_t seed);

void write_mask_pgm(const BinaryMask& mask, const std::string& path, std::uint64_t seed);
BinaryMask read_mask_pgm(const std::string& path, double rate);

}  // namespace semu

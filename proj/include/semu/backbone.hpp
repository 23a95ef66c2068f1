#pragma once

#include <random>
#include <string>
#include <vector>

#include "semu/tensor.hpp"
#include "semu/types.hpp"

// Shared encoder-decoder backbone of the reconstruction and segmentation
// networks. Each encoder level applies two 3x3 convolutions + ReLU, then
// 2x max-pooling; the decoder mirrors it with nearest-neighbor upsampling,
// a 3x3 convolution, skip concatenation and two more convolutions, closed
// by a linear 1x1 projection to the output channels.

namespace semu {

struct EncoderDecoderConfig {
  int in_channels = 2;
  int out_channels = 1;
  int base_channels = 32;
  int depth = 4;
  std::uint64_t param_seed = 0;

  bool operator==(const EncoderDecoderConfig&) const = default;
};

struct ConvSpec {
  std::string name;
  int kernel = 3;  // 3 or 1
  Index cin = 0, cout = 0;
  Index w_off = 0, b_off = 0;  // offsets into the flat parameter vector
  bool relu = true;

  Index w_rows() const { return Index(kernel) * kernel * cin; }
  Index weight_count() const { return w_rows() * cout; }
};

template <typename Scalar>
struct NetworkParameters {
  EncoderDecoderConfig config;
  std::vector<ConvSpec> layers;
  Vec<Scalar> flat;

  Index count() const { return flat.size(); }

  Eigen::Map<const Mat<Scalar>> weight(const ConvSpec& s) const {
    return Eigen::Map<const Mat<Scalar>>(flat.data() + s.w_off, s.w_rows(), s.cout);
  }
  Eigen::Map<Mat<Scalar>> weight(const ConvSpec& s) {
    return Eigen::Map<Mat<Scalar>>(flat.data() + s.w_off, s.w_rows(), s.cout);
  }
  Eigen::Map<const Vec<Scalar>> bias(const ConvSpec& s) const {
    return Eigen::Map<const Vec<Scalar>>(flat.data() + s.b_off, s.cout);
  }
  Eigen::Map<Vec<Scalar>> bias(const ConvSpec& s) {
    return Eigen::Map<Vec<Scalar>>(flat.data() + s.b_off, s.cout);
  }

  const ConvSpec& layer(const std::string& name) const {
    for (const auto& s : layers)
      if (s.name == name) return s;
    throw ConfigError("no such layer: " + name);
  }
};

inline std::vector<ConvSpec> backbone_layers(const EncoderDecoderConfig& cfg) {
  if (cfg.depth < 1 || cfg.base_channels < 1 || cfg.in_channels < 1 || cfg.out_channels < 1)
    throw ConfigError("backbone config: depth, channels must be positive");
  std::vector<ConvSpec> specs;
  const auto ch = [&](int level) { return Index(cfg.base_channels) << level; };
  for (int k = 0; k < cfg.depth; ++k) {
    specs.push_back({"enc" + std::to_string(k) + ".conv1", 3,
                     k == 0 ? Index(cfg.in_channels) : ch(k - 1), ch(k)});
    specs.push_back({"enc" + std::to_string(k) + ".conv2", 3, ch(k), ch(k)});
  }
  specs.push_back({"bott.conv1", 3, ch(cfg.depth - 1), ch(cfg.depth)});
  specs.push_back({"bott.conv2", 3, ch(cfg.depth), ch(cfg.depth)});
  for (int k = cfg.depth - 1; k >= 0; --k) {
    specs.push_back({"dec" + std::to_string(k) + ".up", 3, ch(k + 1), ch(k)});
    specs.push_back({"dec" + std::to_string(k) + ".conv1", 3, 2 * ch(k), ch(k)});
    specs.push_back({"dec" + std::to_string(k) + ".conv2", 3, ch(k), ch(k)});
  }
  specs.push_back({"final", 1, ch(0), Index(cfg.out_channels), 0, 0, false});
  Index off = 0;
  for (auto& s : specs) {
    s.w_off = off;
    off += s.weight_count();
    s.b_off = off;
    off += s.cout;
  }
  return specs;
}

// Xavier-uniform weights, zero biases, deterministic in param_seed.
template <typename Scalar>
NetworkParameters<Scalar> build(const EncoderDecoderConfig& cfg) {
  NetworkParameters<Scalar> params;
  params.config = cfg;
  params.layers = backbone_layers(cfg);
  const ConvSpec& last = params.layers.back();
  params.flat = Vec<Scalar>::Zero(last.b_off + last.cout);
  std::mt19937_64 rng(cfg.param_seed);
  for (const auto& s : params.layers) {
    const double fan_in = double(s.kernel) * s.kernel * double(s.cin);
    const double fan_out = double(s.kernel) * s.kernel * double(s.cout);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> unif(-limit, limit);
    for (Index i = 0; i < s.weight_count(); ++i)
      params.flat[s.w_off + i] = Scalar(unif(rng));
  }
  return params;
}

namespace detail {

// col(p, o*cin + c) = in(y+dy, x+dx, c), zero outside; offset o scans the
// 3x3 neighborhood row-major.
template <typename Scalar>
void im2col3(const Tensor3<Scalar>& in, Mat<Scalar>& col) {
  const Index h = in.height(), w = in.width(), cin = in.channels();
  col.setZero(h * w, 9 * cin);
  // In the flattened p = y*w + x layout a (dy, dx) shift is one linear
  // offset, so each kernel tap is a single big block copy; the x wrap-around
  // rows it brings in are zeroed afterwards.
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const Index o = Index(dy + 1) * 3 + (dx + 1);
      const Index ys = std::max<Index>(0, -dy), ye = std::min<Index>(h - 1, h - 1 - dy);
      if (ys > ye) continue;
      Index src = (ys + dy) * w + dx, dst = ys * w, n = (ye - ys + 1) * w;
      if (src < 0) {
        dst -= src;
        n += src;
        src = 0;
      }
      if (src + n > h * w) n = h * w - src;
      col.block(dst, o * cin, n, cin) = in.mat().block(src, 0, n, cin);
      if (dx != 0) {
        const Index edge = dx < 0 ? 0 : w - 1;  // x + dx falls outside the image
        for (Index y = ys; y <= ye; ++y) col.block(y * w + edge, o * cin, 1, cin).setZero();
      }
    }
  }
}

template <typename Scalar>
void col2im3_add(const Mat<Scalar>& dcol, Index h, Index w, Index cin, Tensor3<Scalar>& din) {
  // Transpose of im2col3: one big block accumulation per tap, then the
  // spurious x wrap-around contributions are subtracted back out.
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const Index o = Index(dy + 1) * 3 + (dx + 1);
      const Index ys = std::max<Index>(0, -dy), ye = std::min<Index>(h - 1, h - 1 - dy);
      if (ys > ye) continue;
      Index src = (ys + dy) * w + dx, dst = ys * w, n = (ye - ys + 1) * w;
      if (src < 0) {
        dst -= src;
        n += src;
        src = 0;
      }
      if (src + n > h * w) n = h * w - src;
      din.mat().block(src, 0, n, cin) += dcol.block(dst, o * cin, n, cin);
      if (dx != 0) {
        const Index edge = dx < 0 ? 0 : w - 1;
        for (Index y = ys; y <= ye; ++y) {
          const Index d = y * w + edge;        // dcol row whose target wrapped
          if (d < dst || d >= dst + n) continue;
          din.mat().block(d + dy * w + dx, 0, 1, cin) -= dcol.block(d, o * cin, 1, cin);
        }
      }
    }
  }
}

template <typename Scalar>
using ArgmaxMat = Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
Tensor3<Scalar> maxpool2(const Tensor3<Scalar>& in, ArgmaxMat<Scalar>& argmax) {
  const Index h = in.height(), w = in.width(), c = in.channels();
  Tensor3<Scalar> out(h / 2, w / 2, c);
  argmax.resize(h / 2 * (w / 2), c);
  for (Index ch = 0; ch < c; ++ch) {
    for (Index y = 0; y < h / 2; ++y) {
      for (Index x = 0; x < w / 2; ++x) {
        Index best = (2 * y) * w + 2 * x;
        Scalar bv = in.mat()(best, ch);
        for (int q = 1; q < 4; ++q) {
          const Index p = (2 * y + q / 2) * w + 2 * x + q % 2;
          if (in.mat()(p, ch) > bv) {
            bv = in.mat()(p, ch);
            best = p;
          }
        }
        out(y, x, ch) = bv;
        argmax(y * (w / 2) + x, ch) = best;
      }
    }
  }
  return out;
}

template <typename Scalar>
Tensor3<Scalar> maxpool2_backward(const Tensor3<Scalar>& grad_out, const ArgmaxMat<Scalar>& argmax,
                                  Index in_h, Index in_w) {
  Tensor3<Scalar> din(in_h, in_w, grad_out.channels());
  for (Index ch = 0; ch < grad_out.channels(); ++ch)
    for (Index p = 0; p < grad_out.mat().rows(); ++p)
      din.mat()(argmax(p, ch), ch) += grad_out.mat()(p, ch);
  return din;
}

template <typename Scalar>
Tensor3<Scalar> upsample2(const Tensor3<Scalar>& in) {
  const Index h = in.height(), w = in.width(), c = in.channels();
  Tensor3<Scalar> out(2 * h, 2 * w, c);
  // nearest neighbor: out(y, x) = in(y/2, x/2)
  for (Index y = 0; y < 2 * h; ++y)
    for (Index x = 0; x < 2 * w; ++x)
      out.mat().row(y * 2 * w + x) = in.mat().row((y / 2) * w + x / 2);
  return out;
}

template <typename Scalar>
Tensor3<Scalar> upsample2_backward(const Tensor3<Scalar>& grad_out) {
  const Index h2 = grad_out.height(), w2 = grad_out.width(), c = grad_out.channels();
  Tensor3<Scalar> din(h2 / 2, w2 / 2, c);
  for (Index y = 0; y < h2; ++y)
    for (Index x = 0; x < w2; ++x)
      din.mat().row((y / 2) * (w2 / 2) + x / 2) += grad_out.mat().row(y * w2 + x);
  return din;
}

}  // namespace detail

template <typename Scalar>
struct Workspace {
  Tensor3<Scalar> input;
  std::vector<Mat<Scalar>> cols;        // im2col input per conv layer (execution order)
  std::vector<Tensor3<Scalar>> acts;    // post-activation output per conv layer
  std::vector<detail::ArgmaxMat<Scalar>> pool_argmax;
  std::vector<std::pair<Index, Index>> pool_in_shape;
};

namespace detail {

template <typename Scalar>
Tensor3<Scalar> conv_forward(const NetworkParameters<Scalar>& params, Index layer_idx,
                             const Tensor3<Scalar>& in, Workspace<Scalar>& ws) {
  const ConvSpec& s = params.layers[static_cast<size_t>(layer_idx)];
  if (in.channels() != s.cin)
    throw DimensionError("conv " + s.name + ": expected " + std::to_string(s.cin) +
                         " channels, got " + std::to_string(in.channels()));
  Mat<Scalar>& col = ws.cols[static_cast<size_t>(layer_idx)];
  if (s.kernel == 3)
    im2col3(in, col);
  else
    col = in.mat();
  Tensor3<Scalar> out(in.height(), in.width(), s.cout);
  out.mat().noalias() = col * params.weight(s);
  out.mat().rowwise() += params.bias(s).transpose();
  if (s.relu) out.mat() = out.mat().cwiseMax(Scalar(0));
  ws.acts[static_cast<size_t>(layer_idx)] = out;
  return out;
}

// Returns the gradient with respect to the conv input; accumulates weight
// and bias gradients into grad_flat.
template <typename Scalar>
Tensor3<Scalar> conv_backward(const NetworkParameters<Scalar>& params, Index layer_idx,
                              const Workspace<Scalar>& ws, const Tensor3<Scalar>& grad_out,
                              Vec<Scalar>& grad_flat, Index in_h, Index in_w) {
  const ConvSpec& s = params.layers[static_cast<size_t>(layer_idx)];
  const Mat<Scalar>& col = ws.cols[static_cast<size_t>(layer_idx)];
  Mat<Scalar> g = grad_out.mat();
  if (s.relu) {
    const Mat<Scalar>& act = ws.acts[static_cast<size_t>(layer_idx)].mat();
    g.array() *= (act.array() > Scalar(0)).template cast<Scalar>();
  }
  Eigen::Map<Mat<Scalar>> dW(grad_flat.data() + s.w_off, s.w_rows(), s.cout);
  dW.noalias() += col.transpose() * g;
  Eigen::Map<Vec<Scalar>>(grad_flat.data() + s.b_off, s.cout) += g.colwise().sum().transpose();
  Mat<Scalar> dcol = g * params.weight(s).transpose();
  Tensor3<Scalar> din(in_h, in_w, s.cin);
  if (s.kernel == 3)
    col2im3_add(dcol, in_h, in_w, s.cin, din);
  else
    din.mat() = std::move(dcol);
  return din;
}

}  // namespace detail

// Deterministic forward pass; fills `ws` with everything backward() needs.
template <typename Scalar>
Tensor3<Scalar> forward(const NetworkParameters<Scalar>& params, const Tensor3<Scalar>& input,
                        Workspace<Scalar>& ws) {
  const auto& cfg = params.config;
  const Index h = input.height(), w = input.width();
  const Index div = Index(1) << cfg.depth;
  if (h == 0 || w == 0 || h % div != 0 || w % div != 0)
    throw DimensionError("forward: spatial dims must be divisible by 2^depth = " +
                         std::to_string(div));
  if (input.channels() != cfg.in_channels)
    throw DimensionError("forward: expected " + std::to_string(cfg.in_channels) + " channels");
  ws.input = input;
  // resize, do not reassign: repeated passes of the same shape then reuse
  // every scratch allocation
  ws.cols.resize(params.layers.size());
  ws.acts.resize(params.layers.size());
  ws.pool_argmax.resize(static_cast<size_t>(cfg.depth));
  ws.pool_in_shape.resize(static_cast<size_t>(cfg.depth));

  Tensor3<Scalar> cur = input;
  std::vector<Tensor3<Scalar>> skip(static_cast<size_t>(cfg.depth));
  Index li = 0;
  for (int k = 0; k < cfg.depth; ++k) {
    cur = detail::conv_forward(params, li++, cur, ws);
    cur = detail::conv_forward(params, li++, cur, ws);
    skip[static_cast<size_t>(k)] = cur;
    ws.pool_in_shape[static_cast<size_t>(k)] = {cur.height(), cur.width()};
    cur = detail::maxpool2(cur, ws.pool_argmax[static_cast<size_t>(k)]);
  }
  cur = detail::conv_forward(params, li++, cur, ws);
  cur = detail::conv_forward(params, li++, cur, ws);
  for (int k = cfg.depth - 1; k >= 0; --k) {
    cur = detail::upsample2(cur);
    cur = detail::conv_forward(params, li++, cur, ws);
    cur = concat(cur, skip[static_cast<size_t>(k)]);
    cur = detail::conv_forward(params, li++, cur, ws);
    cur = detail::conv_forward(params, li++, cur, ws);
  }
  return detail::conv_forward(params, li, cur, ws);
}

template <typename Scalar>
Tensor3<Scalar> forward(const NetworkParameters<Scalar>& params, const Tensor3<Scalar>& input) {
  Workspace<Scalar> ws;
  return forward(params, input, ws);
}

// Backward pass for a scalar loss: accumulates parameter gradients into
// grad_flat (must be sized like params.flat) and returns the gradient with
// respect to the input tensor.
template <typename Scalar>
Tensor3<Scalar> backward(const NetworkParameters<Scalar>& params, const Workspace<Scalar>& ws,
                         const Tensor3<Scalar>& grad_output, Vec<Scalar>& grad_flat) {
  const auto& cfg = params.config;
  if (grad_flat.size() != params.flat.size())
    throw DimensionError("backward: grad vector size mismatch");
  const Index D = cfg.depth;
  const auto ch = [&](int level) { return Index(cfg.base_channels) << level; };
  const Index H = ws.input.height(), W = ws.input.width();
  const auto level_h = [&](int k) { return H >> k; };
  const auto level_w = [&](int k) { return W >> k; };

  // final 1x1 conv
  const Index final_idx = Index(params.layers.size()) - 1;
  Tensor3<Scalar> g =
      detail::conv_backward(params, final_idx, ws, grad_output, grad_flat, H, W);

  std::vector<Tensor3<Scalar>> gskip(static_cast<size_t>(D));
  // decoder levels, reverse of execution (k ascending)
  for (int k = 0; k < D; ++k) {
    const Index base = 2 * D + 2 + 3 * Index(D - 1 - k);
    const Index hk = level_h(k), wk = level_w(k);
    g = detail::conv_backward(params, base + 2, ws, g, grad_flat, hk, wk);
    g = detail::conv_backward(params, base + 1, ws, g, grad_flat, hk, wk);
    // split concat [up | skip]
    Tensor3<Scalar> gu(hk, wk, ch(k));
    gu.mat() = g.mat().leftCols(ch(k));
    Tensor3<Scalar> gs(hk, wk, ch(k));
    gs.mat() = g.mat().rightCols(ch(k));
    gskip[static_cast<size_t>(k)] = std::move(gs);
    gu = detail::conv_backward(params, base, ws, gu, grad_flat, hk, wk);
    g = detail::upsample2_backward(gu);
  }
  // bottleneck
  {
    const Index hb = level_h(int(D)), wb = level_w(int(D));
    g = detail::conv_backward(params, 2 * D + 1, ws, g, grad_flat, hb, wb);
    g = detail::conv_backward(params, 2 * D, ws, g, grad_flat, hb, wb);
  }
  // encoder levels, reverse
  for (int k = int(D) - 1; k >= 0; --k) {
    const auto [ph, pw] = ws.pool_in_shape[static_cast<size_t>(k)];
    g = detail::maxpool2_backward(g, ws.pool_argmax[static_cast<size_t>(k)], ph, pw);
    g.mat() += gskip[static_cast<size_t>(k)].mat();
    g = detail::conv_backward(params, 2 * k + 1, ws, g, grad_flat, ph, pw);
    g = detail::conv_backward(params, 2 * k, ws, g, grad_flat, ph, pw);
  }
  return g;
}

}  // namespace semu

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "semu/backbone.hpp"

using namespace semu;

namespace {

template <typename Scalar>
Tensor3<Scalar> random_input(Index h, Index w, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor3<Scalar> t(h, w, c);
  for (Index i = 0; i < t.mat().rows(); ++i)
    for (Index j = 0; j < c; ++j) t.mat()(i, j) = Scalar(g(rng));
  return t;
}

}  // namespace

TEST_CASE("parameter count matches the analytic layer table") {
  // hand-summed from the per-layer (k*k*cin*cout + cout) closed form
  const auto big = build<double>({2, 1, 32, 4, 0});
  CHECK(big.count() == 8630209);
  const auto seg = build<double>({1, 8, 8, 2, 0});
  CHECK(seg.count() == 32584);
  const auto tiny = build<double>({2, 1, 2, 1, 0});
  CHECK(tiny.count() == 489);

  // offsets tile the flat vector exactly, no gaps or overlap
  Index off = 0;
  for (const auto& s : tiny.layers) {
    CHECK(s.w_off == off);
    off += s.weight_count();
    CHECK(s.b_off == off);
    off += s.cout;
  }
  CHECK(off == tiny.count());
}

TEST_CASE("layer table shape for depth 2") {
  const auto layers = backbone_layers({2, 3, 8, 2, 0});
  REQUIRE(layers.size() == 13);
  CHECK(layers[0].name == "enc0.conv1");
  CHECK(layers[0].cin == 2);
  CHECK(layers[0].cout == 8);
  CHECK(layers[4].name == "bott.conv1");
  CHECK(layers[4].cin == 16);
  CHECK(layers[4].cout == 32);
  CHECK(layers[6].name == "dec1.up");
  CHECK(layers[7].name == "dec1.conv1");
  CHECK(layers[7].cin == 32);  // concat doubles the channel count
  CHECK(layers.back().name == "final");
  CHECK(layers.back().kernel == 1);
  CHECK(layers.back().cout == 3);
  CHECK(!layers.back().relu);
  CHECK_THROWS_AS((void)backbone_layers({2, 1, 0, 2, 0}), ConfigError);
}

TEST_CASE("initialization is deterministic in the seed and Xavier-bounded") {
  const EncoderDecoderConfig cfg{2, 1, 4, 2, 42};
  const auto a = build<float>(cfg), b = build<float>(cfg);
  CHECK((a.flat.array() == b.flat.array()).all());
  auto cfg2 = cfg;
  cfg2.param_seed = 43;
  CHECK(!(build<float>(cfg2).flat.array() == a.flat.array()).all());
  for (const auto& s : a.layers) {
    const double limit = std::sqrt(6.0 / (double(s.kernel) * s.kernel * double(s.cin + s.cout)));
    CHECK(double(a.weight(s).cwiseAbs().maxCoeff()) <= limit);
    CHECK(a.bias(s).cwiseAbs().maxCoeff() == 0.0f);
  }
}

TEST_CASE("forward shape contract and divisibility check") {
  const auto params = build<double>({2, 3, 4, 2, 1});
  const auto out = forward(params, random_input<double>(16, 16, 2, 9));
  CHECK(out.height() == 16);
  CHECK(out.width() == 16);
  CHECK(out.channels() == 3);
  CHECK_THROWS_AS((void)forward(params, random_input<double>(10, 10, 2, 9)), DimensionError);
  CHECK_THROWS_AS((void)forward(params, random_input<double>(16, 16, 3, 9)), DimensionError);
}

TEST_CASE("zero input with zero biases maps to exactly zero output") {
  const auto params = build<double>({1, 2, 4, 2, 7});
  const auto out = forward(params, Tensor3<double>(8, 8, 1));
  CHECK(out.mat().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single conv layer matches a hand-built identity kernel") {
  auto params = build<double>({1, 1, 2, 1, 0});
  params.flat.setZero();
  // depth-1 net: enc0 passes channel 0 through via center taps, pool 2x2,
  // identity continues through bottleneck/decoder, final picks channel 0.
  // Instead of tracing the whole net, check one conv against the oracle.
  const auto& spec = params.layers.front();  // enc0.conv1: 1 -> 2 channels
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 1);
  for (Index i = 0; i < spec.weight_count(); ++i) params.flat[spec.w_off + i] = g(rng);
  params.flat[spec.b_off] = 0.25;
  params.flat[spec.b_off + 1] = -0.25;

  const auto in = random_input<double>(6, 6, 1, 11);
  Workspace<double> ws;
  ws.acts.assign(params.layers.size(), {});
  ws.cols.assign(params.layers.size(), {});
  const auto got = detail::conv_forward(params, 0, in, ws);
  const auto ref = oracle::conv_reference(params, spec, in);
  CHECK((got.mat() - ref.mat()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full forward matches the naive sliding-window reference") {
  // reimplements the whole topology with loop convolutions and compares
  const EncoderDecoderConfig cfg{2, 3, 4, 2, 21};
  const auto params = build<double>(cfg);
  const auto in = random_input<double>(8, 8, 2, 31);

  const auto pool = [](const Tensor3<double>& t) {
    Tensor3<double> out(t.height() / 2, t.width() / 2, t.channels());
    for (Index c = 0; c < t.channels(); ++c)
      for (Index y = 0; y < out.height(); ++y)
        for (Index x = 0; x < out.width(); ++x)
          out(y, x, c) = std::max(std::max(t(2 * y, 2 * x, c), t(2 * y, 2 * x + 1, c)),
                                  std::max(t(2 * y + 1, 2 * x, c), t(2 * y + 1, 2 * x + 1, c)));
    return out;
  };
  const auto up = [](const Tensor3<double>& t) {
    Tensor3<double> out(t.height() * 2, t.width() * 2, t.channels());
    for (Index c = 0; c < t.channels(); ++c)
      for (Index y = 0; y < out.height(); ++y)
        for (Index x = 0; x < out.width(); ++x) out(y, x, c) = t(y / 2, x / 2, c);
    return out;
  };
  const auto conv = [&](const char* name, const Tensor3<double>& t) {
    return oracle::conv_reference(params, params.layer(name), t);
  };

  auto e0 = conv("enc0.conv2", conv("enc0.conv1", in));
  auto e1 = conv("enc1.conv2", conv("enc1.conv1", pool(e0)));
  auto bt = conv("bott.conv2", conv("bott.conv1", pool(e1)));
  auto d1 = conv("dec1.conv2", conv("dec1.conv1", concat(conv("dec1.up", up(bt)), e1)));
  auto d0 = conv("dec0.conv2", conv("dec0.conv1", concat(conv("dec0.up", up(d1)), e0)));
  const auto ref = conv("final", d0);

  const auto got = forward(params, in);
  CHECK((got.mat() - ref.mat()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("forward is bitwise deterministic") {
  const auto params = build<float>({2, 1, 4, 2, 3});
  const auto in = random_input<float>(16, 16, 2, 77);
  const auto a = forward(params, in), b = forward(params, in);
  CHECK((a.mat().array() == b.mat().array()).all());
}

TEST_CASE("backward gradients match central finite differences") {
  const EncoderDecoderConfig cfg{2, 2, 2, 2, 13};
  auto params = build<double>(cfg);
  const auto in = random_input<double>(8, 8, 2, 41);
  const Tensor3<double> gout = random_input<double>(8, 8, 2, 42);

  const auto loss = [&](const Vec<double>& flat) {
    auto p = params;
    p.flat = flat;
    const auto out = forward(p, in);
    return (gout.mat().array() * out.mat().array()).sum();
  };

  Workspace<double> ws;
  const auto out = forward(params, in, ws);
  Vec<double> grad = Vec<double>::Zero(params.count());
  const auto gin = backward(params, ws, gout, grad);
  CHECK(gin.height() == 8);
  CHECK(gin.channels() == 2);

  const double eps = 1e-6;
  std::mt19937_64 rng(55);
  int checked = 0;
  while (checked < 20) {
    const Index i = Index(rng() % std::uint64_t(params.count()));
    Vec<double> fp = params.flat, fm = params.flat;
    fp[i] += eps;
    fm[i] -= eps;
    const double fd = (loss(fp) - loss(fm)) / (2 * eps);
    if (std::abs(fd) < 1e-8 && std::abs(grad[i]) < 1e-8) continue;  // dead ReLU path
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-2));
    ++checked;
  }

  // input gradient against finite differences on a few pixels
  for (int trial = 0; trial < 6; ++trial) {
    const Index i = Index(rng() % std::uint64_t(in.mat().rows()));
    const Index c = Index(rng() % 2);
    auto ip = in, im = in;
    ip.mat()(i, c) += eps;
    im.mat()(i, c) -= eps;
    const double fd = ((gout.mat().array() * forward(params, ip).mat().array()).sum() -
                       (gout.mat().array() * forward(params, im).mat().array()).sum()) /
                      (2 * eps);
    if (std::abs(fd) < 1e-8 && std::abs(gin.mat()(i, c)) < 1e-8) continue;
    CHECK(gin.mat()(i, c) == doctest::Approx(fd).epsilon(1e-2));
  }
}

TEST_CASE("capacity grows monotonically with width and depth") {
  const Index b4 = build<float>({2, 1, 4, 2, 0}).count();
  const Index b8 = build<float>({2, 1, 8, 2, 0}).count();
  const Index d3 = build<float>({2, 1, 4, 3, 0}).count();
  CHECK(b8 > b4);
  CHECK(d3 > b4);
}

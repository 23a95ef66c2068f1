#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "semu/dataset.hpp"

namespace semu {
namespace {

struct Ellipse {
  double cy, cx, a, b, angle;

  bool contains(double y, double x) const {
    const double dy = y - cy, dx = x - cx;
    const double ca = std::cos(angle), sa = std::sin(angle);
    const double u = dx * ca + dy * sa;
    const double v = -dx * sa + dy * ca;
    return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
  }
};

}  // namespace

LabeledSlice generate_phantom(Index h, Index w, int class_count, std::uint64_t seed) {
  if (class_count < 2) throw ConfigError("generate_phantom: need at least 2 classes");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int tissues = class_count - 1;
  // distinct mean intensities spread over [0.15, 0.95], shuffled per slice
  std::vector<double> intensity(static_cast<size_t>(tissues));
  for (int k = 0; k < tissues; ++k)
    intensity[static_cast<size_t>(k)] =
        tissues == 1 ? 0.55 : 0.15 + 0.8 * double(k) / double(tissues - 1);
  std::shuffle(intensity.begin(), intensity.end(), rng);

  // nested ellipses, outermost first; radii follow an equal-area schedule so
  // every annulus claims a comparable pixel share (balanced class frequencies)
  const double scale = 0.5 * double(std::min(h, w));
  std::vector<Ellipse> ell(static_cast<size_t>(tissues));
  for (int k = 0; k < tissues; ++k) {
    const double frac = 0.85 * std::sqrt(double(tissues - k) / double(tissues));
    const double base = std::max(0.10, frac);
    Ellipse e;
    e.a = scale * base * (0.95 + 0.1 * unif(rng));
    e.b = scale * base * (0.95 + 0.1 * unif(rng));
    e.cy = 0.5 * double(h) + scale * 0.08 * (2.0 * unif(rng) - 1.0) * (1.0 + 0.5 * k);
    e.cx = 0.5 * double(w) + scale * 0.08 * (2.0 * unif(rng) - 1.0) * (1.0 + 0.5 * k);
    e.angle = std::numbers::pi * unif(rng);
    ell[static_cast<size_t>(k)] = e;
  }

  // smooth low-frequency intensity modulation
  const double ph1 = 2.0 * std::numbers::pi * unif(rng);
  const double ph2 = 2.0 * std::numbers::pi * unif(rng);
  std::normal_distribution<double> noise(0.0, 0.01);

  LabeledSlice slice;
  slice.image.resize(h, w);
  slice.labels = MatI::Zero(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) {
      int top = 0;
      for (int k = 0; k < tissues; ++k)
        if (ell[static_cast<size_t>(k)].contains(double(r) + 0.5, double(c) + 0.5)) top = k + 1;
      slice.labels(r, c) = top;
      double v = top == 0 ? 0.02 : intensity[static_cast<size_t>(top - 1)];
      v += 0.02 * std::sin(2.0 * std::numbers::pi * double(r) / double(h) + ph1) *
           std::cos(2.0 * std::numbers::pi * double(c) / double(w) + ph2);
      v += noise(rng);
      slice.image(r, c) = std::clamp(v, 0.0, 1.0);
    }
  }
  return slice;
}

DatasetSplit phantom_dataset(Index h, Index w, int class_count, int n_train, int n_test,
                             std::uint64_t seed) {
  constexpr int kSlicesPerSubject = 20;
  DatasetSplit split;
  split.class_count = class_count;
  split.class_names.push_back("background");
  for (int c = 1; c < class_count; ++c) split.class_names.push_back("tissue" + std::to_string(c));
  int subject = 0, in_subject = 0;
  const auto next = [&](int slice_index, bool test) {
    LabeledSlice s = generate_phantom(h, w, class_count, seed + std::uint64_t(slice_index));
    s.subject_id = (test ? "ptest" : "ptrain") + std::to_string(subject);
    s.slice_index = slice_index;
    if (++in_subject == kSlicesPerSubject) {
      in_subject = 0;
      ++subject;
    }
    return s;
  };
  for (int i = 0; i < n_train; ++i) split.train.push_back(next(i, false));
  subject = 1000;  // disjoint synthetic subjects for the test block
  in_subject = 0;
  for (int i = 0; i < n_test; ++i) split.test.push_back(next(n_train + i, true));
  return split;
}

}  // namespace semu

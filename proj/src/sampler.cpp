#include "semu/sampler.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "semu/image_io.hpp"

namespace semu {
namespace {

constexpr double kGoldenAngle = std::numbers::pi * (3.0 - 2.2360679774997896964091736687747);  // pi*(3-sqrt(5))

struct Candidate {
  Index idx;
  double radius2;
};

BinaryMask radial_mask(Index h, Index w, double rate) {
  const Index n_total = h * w;
  const Index n = mask_ones_for_rate(rate, n_total);
  if (n <= 0) throw ConfigError("fixed_mask: rate * N rounds to zero samples");
  const Index cr = h / 2, cc = w / 2;
  MatI marked = MatI::Zero(h, w);
  Index count = 0;
  const double rmax = std::hypot(double(h), double(w));
  const Index max_lines = 8 * (h + w);
  for (Index line = 0; line < max_lines && count < n; ++line) {
    const double ang = double(line) * kGoldenAngle;
    const double dr = std::sin(ang), dc = std::cos(ang);
    for (double t = -rmax; t <= rmax; t += 0.5) {
      const Index r = cr + static_cast<Index>(std::llround(t * dr));
      const Index c = cc + static_cast<Index>(std::llround(t * dc));
      if (r < 0 || r >= h || c < 0 || c >= w) continue;
      if (!marked(r, c)) {
        marked(r, c) = 1;
        ++count;
      }
    }
  }
  // lines may not reach isolated pixels at very high rates; fill nearest-first
  if (count < n) {
    std::vector<Candidate> rest;
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c)
        if (!marked(r, c))
          rest.push_back({r * w + c, double((r - cr) * (r - cr) + (c - cc) * (c - cc))});
    std::sort(rest.begin(), rest.end(), [](const Candidate& a, const Candidate& b) {
      if (a.radius2 != b.radius2) return a.radius2 < b.radius2;
      return a.idx < b.idx;
    });
    for (const auto& cand : rest) {
      if (count >= n) break;
      marked(cand.idx / w, cand.idx % w) = 1;
      ++count;
    }
  }
  // trim surplus farthest from center, deterministically
  if (count > n) {
    std::vector<Candidate> on;
    for (Index r = 0; r < h; ++r)
      for (Index c = 0; c < w; ++c)
        if (marked(r, c))
          on.push_back({r * w + c, double((r - cr) * (r - cr) + (c - cc) * (c - cc))});
    std::sort(on.begin(), on.end(), [](const Candidate& a, const Candidate& b) {
      if (a.radius2 != b.radius2) return a.radius2 > b.radius2;
      return a.idx > b.idx;
    });
    for (Index i = 0; i < count - n; ++i) marked(on[i].idx / w, on[i].idx % w) = 0;
  }
  return BinaryMask(marked, rate);
}

BinaryMask random_mask(Index h, Index w, double rate, std::uint64_t seed) {
  const Index n = mask_ones_for_rate(rate, h * w);
  const Index cr = h / 2, cc = w / 2;
  // always-sampled 4x4 block around the DC coefficient
  const Index r0 = cr - 1, c0 = cc - 1;
  MatI marked = MatI::Zero(h, w);
  Index block = 0;
  for (Index r = r0; r < r0 + 4; ++r)
    for (Index c = c0; c < c0 + 4; ++c)
      if (r >= 0 && r < h && c >= 0 && c < w) {
        marked(r, c) = 1;
        ++block;
      }
  if (n < block)
    throw ConfigError("fixed_mask: random pattern needs at least " + std::to_string(block) +
                      " samples for the center block, got n=" + std::to_string(n));
  std::vector<Index> rest;
  rest.reserve(static_cast<size_t>(h * w - block));
  for (Index i = 0; i < h * w; ++i)
    if (!marked(i / w, i % w)) rest.push_back(i);
  std::mt19937_64 rng(seed);
  std::shuffle(rest.begin(), rest.end(), rng);
  for (Index i = 0; i < n - block; ++i) marked(rest[static_cast<size_t>(i)] / w, rest[static_cast<size_t>(i)] % w) = 1;
  return BinaryMask(marked, rate);
}

}  // namespace

BinaryMask fixed_mask(FixedMaskKind kind, Index h, Index w, double rate, std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0))
    throw ConfigError("fixed_mask: rate must lie in (0,1], got " + std::to_string(rate));
  return kind == FixedMaskKind::Radial ? radial_mask(h, w, rate) : random_mask(h, w, rate, seed);
}

void write_mask_pgm(const BinaryMask& mask, const std::string& path, std::uint64_t seed) {
  GrayImage img;
  img.rows = mask.rows();
  img.cols = mask.cols();
  img.max_value = 255;
  img.pixels.resize(static_cast<size_t>(img.rows * img.cols));
  for (Index r = 0; r < img.rows; ++r)
    for (Index c = 0; c < img.cols; ++c)
      img.pixels[static_cast<size_t>(r * img.cols + c)] = mask.pattern()(r, c) ? 255 : 0;
  write_pgm(img, path);

  std::ofstream side(path + ".txt");
  if (!side) throw DataError("cannot write mask sidecar: " + path + ".txt");
  side << "H " << mask.rows() << "\nW " << mask.cols() << "\nalpha " << mask.rate()
       << "\nones_count " << mask.ones_count() << "\nseed " << seed << "\n";
}

BinaryMask read_mask_pgm(const std::string& path, double rate) {
  const GrayImage img = read_gray(path);
  MatI pattern(img.rows, img.cols);
  for (Index r = 0; r < img.rows; ++r)
    for (Index c = 0; c < img.cols; ++c) pattern(r, c) = img.at(r, c) > 127 ? 1 : 0;
  return BinaryMask(pattern, rate);
}

}  // namespace semu

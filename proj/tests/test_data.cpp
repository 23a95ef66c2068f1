#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "semu/dataset.hpp"
#include "semu/image_io.hpp"

using namespace semu;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("phantom slices are deterministic, in range, and cover every class") {
  const auto a = generate_phantom(64, 64, 8, 5);
  const auto b = generate_phantom(64, 64, 8, 5);
  CHECK((a.image.array() == b.image.array()).all());
  CHECK((a.labels.array() == b.labels.array()).all());
  CHECK(!(generate_phantom(64, 64, 8, 6).image.array() == a.image.array()).all());

  CHECK(a.image.minCoeff() >= 0.0);
  CHECK(a.image.maxCoeff() <= 1.0);
  CHECK(a.labels.minCoeff() == 0);
  CHECK(a.labels.maxCoeff() <= 7);

  // class histogram: background plus all 7 tissues present at 64x64
  std::vector<int> hist(8, 0);
  for (Index r = 0; r < 64; ++r)
    for (Index c = 0; c < 64; ++c) ++hist[static_cast<size_t>(a.labels(r, c))];
  for (int c = 0; c < 8; ++c) CHECK(hist[static_cast<size_t>(c)] > 0);
  CHECK(hist[0] > 64 * 64 / 4);  // background dominates
}

TEST_CASE("two-class phantom degenerates to a single tissue over background") {
  const auto s = generate_phantom(64, 64, 2, 1);
  CHECK(s.labels.maxCoeff() == 1);
  std::set<int> seen;
  for (Index r = 0; r < 64; ++r)
    for (Index c = 0; c < 64; ++c) seen.insert(s.labels(r, c));
  CHECK(seen == std::set<int>{0, 1});
}

TEST_CASE("labels mark brighter-than-background tissue") {
  const auto s = generate_phantom(64, 64, 8, 2);
  double bg_sum = 0, fg_sum = 0;
  int bg_n = 0, fg_n = 0;
  for (Index r = 0; r < 64; ++r)
    for (Index c = 0; c < 64; ++c) {
      if (s.labels(r, c) == 0) {
        bg_sum += s.image(r, c);
        ++bg_n;
      } else {
        fg_sum += s.image(r, c);
        ++fg_n;
      }
    }
  CHECK(fg_sum / fg_n > bg_sum / bg_n + 0.05);
}

TEST_CASE("phantom dataset honors sizes, class count, and subject-level split") {
  const auto split = phantom_dataset(32, 32, 4, 40, 10, 3);
  CHECK(split.train.size() == 40);
  CHECK(split.test.size() == 10);
  CHECK(split.class_count == 4);
  std::set<std::string> train_subj, test_subj;
  for (const auto& s : split.train) train_subj.insert(s.subject_id);
  for (const auto& s : split.test) test_subj.insert(s.subject_id);
  for (const auto& s : test_subj) CHECK(train_subj.count(s) == 0);

  // deterministic
  const auto again = phantom_dataset(32, 32, 4, 40, 10, 3);
  CHECK((split.train[7].image.array() == again.train[7].image.array()).all());
}

TEST_CASE("write_slice / ingest round trip against a percentile oracle") {
  TempDir dir("semu_ingest_rt");
  const auto slice = generate_phantom(32, 32, 4, 11);
  write_slice(slice, (dir.path / "s0_img.pgm").string(), (dir.path / "s0_lab.pgm").string());
  {
    std::ofstream mf(dir.path / "manifest.txt");
    mf << "# round-trip fixture\n@classes 4\n";
    mf << "s0_img.pgm s0_lab.pgm subjA\n";
  }
  const auto split =
      ingest_slices(dir.path.string(), (dir.path / "manifest.txt").string(), 32, 32);
  REQUIRE(split.train.size() == 1);
  CHECK((split.train[0].labels.array() == slice.labels.array()).all());

  // oracle: quantize to 16 bits, divide by the full-sort 99.9th percentile
  std::vector<double> q(32 * 32);
  for (Index r = 0; r < 32; ++r)
    for (Index c = 0; c < 32; ++c)
      q[static_cast<size_t>(r * 32 + c)] = double(std::lround(slice.image(r, c) * 65535.0));
  std::vector<double> sorted = q;
  std::sort(sorted.begin(), sorted.end());
  const double p = sorted[static_cast<size_t>(0.999 * (sorted.size() - 1))];
  for (Index r = 0; r < 32; ++r)
    for (Index c = 0; c < 32; ++c) {
      const double expect = std::min(q[static_cast<size_t>(r * 32 + c)] / p, 1.0);
      CHECK(split.train[0].image(r, c) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("ingest resizes via center crop and zero pad") {
  TempDir dir("semu_ingest_fit");
  auto slice = generate_phantom(48, 48, 4, 21);
  write_slice(slice, (dir.path / "img.pgm").string(), (dir.path / "lab.pgm").string());
  {
    std::ofstream mf(dir.path / "manifest.txt");
    mf << "@classes 4\nimg.pgm lab.pgm subjA\n";
  }
  // crop 48 -> 32: center block survives
  auto crop = ingest_slices(dir.path.string(), (dir.path / "manifest.txt").string(), 32, 32);
  CHECK((crop.train[0].labels.array() == slice.labels.block(8, 8, 32, 32).array()).all());
  // pad 48 -> 64: border is background / zero intensity
  auto pad = ingest_slices(dir.path.string(), (dir.path / "manifest.txt").string(), 64, 64);
  CHECK(pad.train[0].labels.row(0).maxCoeff() == 0);
  CHECK(pad.train[0].image.row(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK((pad.train[0].labels.block(8, 8, 48, 48).array() == slice.labels.array()).all());
}

TEST_CASE("ingest errors name the offending entry") {
  TempDir dir("semu_ingest_err");
  const auto slice = generate_phantom(32, 32, 4, 1);
  write_slice(slice, (dir.path / "img.pgm").string(), (dir.path / "lab.pgm").string());

  const auto run = [&](const std::string& text) {
    std::ofstream(dir.path / "m.txt") << text;
    return ingest_slices(dir.path.string(), (dir.path / "m.txt").string(), 32, 32);
  };

  CHECK_THROWS_WITH_AS((void)run("img.pgm lab.pgm subjA\n"),
                       doctest::Contains("@classes"), DataError);
  CHECK_THROWS_WITH_AS((void)run("@classes 4\nmissing.pgm lab.pgm subjA\n"),
                       doctest::Contains("missing.pgm"), DataError);
  CHECK_THROWS_WITH_AS((void)run("@classes 4\nimg.pgm lab.pgm\n"),
                       doctest::Contains("expected"), DataError);
  // labels exceeding the class count
  CHECK_THROWS_WITH_AS((void)run("@classes 2\nimg.pgm lab.pgm subjA\n"),
                       doctest::Contains("out of range"), DataError);
  CHECK_THROWS_AS((void)ingest_slices(dir.path.string(), (dir.path / "nope.txt").string(), 32, 32),
                  DataError);
}

TEST_CASE("@test directive routes subjects to the test split") {
  TempDir dir("semu_ingest_split");
  for (int i = 0; i < 2; ++i) {
    const auto slice = generate_phantom(32, 32, 4, 30 + std::uint64_t(i));
    write_slice(slice, (dir.path / ("img" + std::to_string(i) + ".pgm")).string(),
                (dir.path / ("lab" + std::to_string(i) + ".pgm")).string());
  }
  std::ofstream(dir.path / "m.txt") << "@classes 4\n@test subjB\n"
                                    << "img0.pgm lab0.pgm subjA\n"
                                    << "img1.pgm lab1.pgm subjB\n";
  const auto split = ingest_slices(dir.path.string(), (dir.path / "m.txt").string(), 32, 32);
  REQUIRE(split.train.size() == 1);
  REQUIRE(split.test.size() == 1);
  CHECK(split.train[0].subject_id == "subjA");
  CHECK(split.test[0].subject_id == "subjB");
}

TEST_CASE("make_split is subject-disjoint and deterministic") {
  std::vector<LabeledSlice> slices;
  for (int subj = 0; subj < 6; ++subj)
    for (int i = 0; i < 4; ++i) {
      auto s = generate_phantom(16, 16, 2, std::uint64_t(subj * 10 + i));
      s.subject_id = "s" + std::to_string(subj);
      slices.push_back(std::move(s));
    }
  const auto a = make_split(slices, 2, 0.3, 9);
  CHECK(a.train.size() + a.test.size() == slices.size());
  CHECK(!a.test.empty());
  std::set<std::string> tr, te;
  for (const auto& s : a.train) tr.insert(s.subject_id);
  for (const auto& s : a.test) te.insert(s.subject_id);
  for (const auto& s : te) CHECK(tr.count(s) == 0);
  const auto b = make_split(slices, 2, 0.3, 9);
  CHECK(a.test.size() == b.test.size());
  CHECK(a.test[0].subject_id == b.test[0].subject_id);

  std::vector<LabeledSlice> lone(slices.begin(), slices.begin() + 4);
  CHECK_THROWS_AS((void)make_split(lone, 2, 0.3, 1), DataError);
}

TEST_CASE("PGM and PNG image IO round trips") {
  TempDir dir("semu_imgio");
  GrayImage img;
  img.rows = 5;
  img.cols = 7;
  img.max_value = 65535;
  img.pixels.resize(35);
  for (size_t i = 0; i < 35; ++i) img.pixels[i] = std::uint16_t(i * 1801 + 3);

  write_pgm(img, (dir.path / "a.pgm").string());
  const auto back = read_gray((dir.path / "a.pgm").string());
  CHECK(back.rows == 5);
  CHECK(back.max_value == 65535);
  CHECK(back.pixels == img.pixels);

  write_png_gray(img, (dir.path / "a.png").string());
  const auto png = read_gray((dir.path / "a.png").string());
  CHECK(png.rows == 5);
  CHECK(png.cols == 7);
  CHECK(png.pixels == img.pixels);

  img.max_value = 255;
  for (auto& p : img.pixels) p &= 0xff;
  write_png_gray(img, (dir.path / "b.png").string());
  CHECK(read_gray((dir.path / "b.png").string()).pixels == img.pixels);

  CHECK_THROWS_AS((void)read_gray((dir.path / "missing.pgm").string()), DataError);
}

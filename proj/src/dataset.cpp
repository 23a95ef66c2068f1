#include "semu/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "semu/image_io.hpp"

namespace semu {
namespace {

// normalize by the 99.9th-percentile intensity, clip to [0,1]
MatD normalize_image(const GrayImage& img) {
  std::vector<std::uint16_t> sorted = img.pixels;
  const size_t k = static_cast<size_t>(0.999 * double(sorted.size() - 1));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(k), sorted.end());
  double p = double(sorted[k]);
  if (p <= 0.0) p = 1.0;  // degenerate all-zero input
  MatD out(img.rows, img.cols);
  for (Index r = 0; r < img.rows; ++r)
    for (Index c = 0; c < img.cols; ++c)
      out(r, c) = std::clamp(double(img.at(r, c)) / p, 0.0, 1.0);
  return out;
}

// center-crop or zero-pad to (h, w); labels pad with background 0
template <typename M>
M fit_to(const M& in, Index h, Index w) {
  M out = M::Zero(h, w);
  const Index copy_h = std::min(h, in.rows()), copy_w = std::min(w, in.cols());
  const Index sr = (in.rows() - copy_h) / 2, sc = (in.cols() - copy_w) / 2;
  const Index dr = (h - copy_h) / 2, dc = (w - copy_w) / 2;
  out.block(dr, dc, copy_h, copy_w) = in.block(sr, sc, copy_h, copy_w);
  return out;
}

}  // namespace

DatasetSplit ingest_slices(const std::string& root_path, const std::string& manifest_path,
                           Index h, Index w) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("cannot open manifest: " + manifest_path);
  const std::filesystem::path root(root_path);

  DatasetSplit split;
  std::set<std::string> test_subjects;
  std::vector<std::tuple<std::string, std::string, std::string>> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string tok;
    if (!(ss >> tok)) continue;
    if (tok == "@classes") {
      if (!(ss >> split.class_count) || split.class_count < 2)
        throw DataError("manifest line " + std::to_string(line_no) + ": bad @classes value");
    } else if (tok == "@test") {
      std::string subj;
      if (!(ss >> subj))
        throw DataError("manifest line " + std::to_string(line_no) + ": @test needs a subject id");
      test_subjects.insert(subj);
    } else {
      std::string label_path, subject;
      if (!(ss >> label_path >> subject))
        throw DataError("manifest line " + std::to_string(line_no) +
                        ": expected `<image> <label> <subject>`, got: " + line);
      records.emplace_back(tok, label_path, subject);
    }
  }
  if (split.class_count == 0)
    throw DataError("manifest " + manifest_path + " is missing the @classes directive");

  int slice_index = 0;
  for (const auto& [img_rel, lab_rel, subject] : records) {
    const std::string img_path = (root / img_rel).string();
    const std::string lab_path = (root / lab_rel).string();
    if (!std::filesystem::exists(img_path))
      throw DataError("manifest entry for subject " + subject + ": missing image file " + img_path);
    if (!std::filesystem::exists(lab_path))
      throw DataError("manifest entry for subject " + subject + ": missing label file " + lab_path);
    LabeledSlice slice;
    slice.image = fit_to<MatD>(normalize_image(read_gray(img_path)), h, w);
    const GrayImage lab = read_gray(lab_path);
    if (lab.max_value > 255)
      throw DataError("label file must be 8-bit: " + lab_path);
    MatI labels(lab.rows, lab.cols);
    for (Index r = 0; r < lab.rows; ++r)
      for (Index c = 0; c < lab.cols; ++c) {
        const int v = lab.at(r, c);
        if (v >= split.class_count)
          throw DataError("label " + std::to_string(v) + " out of range [0," +
                          std::to_string(split.class_count) + ") in " + lab_path);
        labels(r, c) = v;
      }
    slice.labels = fit_to<MatI>(labels, h, w);
    slice.subject_id = subject;
    slice.slice_index = slice_index++;
    (test_subjects.count(subject) ? split.test : split.train).push_back(std::move(slice));
  }
  for (int c = 0; c < split.class_count; ++c) split.class_names.push_back("class" + std::to_string(c));
  return split;
}

DatasetSplit make_split(const std::vector<LabeledSlice>& slices, int class_count,
                        double test_fraction, std::uint64_t seed) {
  std::set<std::string> subject_set;
  for (const auto& s : slices) subject_set.insert(s.subject_id);
  if (subject_set.size() < 2)
    throw DataError("make_split: need at least 2 distinct subjects, got " +
                    std::to_string(subject_set.size()));
  std::vector<std::string> subjects(subject_set.begin(), subject_set.end());
  std::mt19937_64 rng(seed);
  std::shuffle(subjects.begin(), subjects.end(), rng);
  const auto n_test = static_cast<size_t>(std::llround(test_fraction * double(subjects.size())));
  if (n_test == 0)
    throw DataError("make_split: test_fraction " + std::to_string(test_fraction) +
                    " yields an empty test set");
  if (n_test >= subjects.size())
    throw DataError("make_split: test_fraction leaves no training subjects");
  std::set<std::string> test_subjects(subjects.begin(), subjects.begin() + static_cast<long>(n_test));

  DatasetSplit split;
  split.class_count = class_count;
  for (const auto& s : slices)
    (test_subjects.count(s.subject_id) ? split.test : split.train).push_back(s);
  return split;
}

void write_slice(const LabeledSlice& slice, const std::string& image_path,
                 const std::string& label_path) {
  GrayImage img;
  img.rows = slice.image.rows();
  img.cols = slice.image.cols();
  img.max_value = 65535;
  img.pixels.resize(static_cast<size_t>(slice.image.size()));
  for (Index r = 0; r < img.rows; ++r)
    for (Index c = 0; c < img.cols; ++c)
      img.pixels[static_cast<size_t>(r * img.cols + c)] =
          static_cast<std::uint16_t>(std::lround(std::clamp(slice.image(r, c), 0.0, 1.0) * 65535.0));
  write_pgm(img, image_path);

  GrayImage lab;
  lab.rows = slice.labels.rows();
  lab.cols = slice.labels.cols();
  lab.max_value = 255;
  lab.pixels.resize(static_cast<size_t>(slice.labels.size()));
  for (Index r = 0; r < lab.rows; ++r)
    for (Index c = 0; c < lab.cols; ++c)
      lab.pixels[static_cast<size_t>(r * lab.cols + c)] =
          static_cast<std::uint16_t>(slice.labels(r, c));
  write_pgm(lab, label_path);
}

}  // namespace semu

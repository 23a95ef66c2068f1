#pragma once

#include <string>
#include <vector>

#include "semu/types.hpp"

// Labeled-slice data: synthetic ellipse phantoms, manifest-driven slice
// ingestion, and subject-level train/test splitting.

namespace semu {

struct LabeledSlice {
  MatD image;    // [0,1]
  MatI labels;   // class indices in [0, C)
  std::string subject_id;
  int slice_index = 0;
};

struct DatasetSplit {
  std::vector<LabeledSlice> train;
  std::vector<LabeledSlice> test;
  int class_count = 0;
  std::vector<std::string> class_names;
};

// C-1 randomized nested ellipse tissues over background; label map records
// the topmost tissue per pixel. Deterministic per seed.
LabeledSlice generate_phantom(Index h, Index w, int class_count, std::uint64_t seed);

// Manifest format, one record per line: `<image-path> <label-path> <subject-id>`.
// Directive lines: `@classes <C>` (required) and `@test <subject-id>`
// (repeatable; subjects named there form the test split). `#` starts a comment.
// Paths are resolved relative to root_path. Images are normalized by their
// 99.9th-percentile intensity and center-cropped / zero-padded to (h, w).
DatasetSplit ingest_slices(const std::string& root_path, const std::string& manifest_path,
                           Index h, Index w);

DatasetSplit make_split(const std::vector<LabeledSlice>& slices, int class_count,
                        double test_fraction, std::uint64_t seed);

// Writes slice.image as 16-bit PGM and slice.labels as 8-bit PGM.
void write_slice(const LabeledSlice& slice, const std::string& image_path,
                 const std::string& label_path);

// Deterministic phantom dataset: n_train + n_test slices, one synthetic
// subject per `slices_per_subject` block so splits stay subject-level.
DatasetSplit phantom_dataset(Index h, Index w, int class_count, int n_train, int n_test,
                             std::uint64_t seed);

}  // namespace semu

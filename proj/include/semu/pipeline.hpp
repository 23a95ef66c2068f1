#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semu/adam.hpp"
#include "semu/backbone.hpp"
#include "semu/dataset.hpp"
#include "semu/losses.hpp"
#include "semu/sampler.hpp"

// End-to-end composition: sampling pattern -> undersampled k-space ->
// zero-filled input -> reconstruction net -> segmentation net, the
// two-stage training strategy (joint optimization, Booleanize, finetune
// against the binary mask), and the fixed-pattern / reconstruction-only
// baseline modes.

namespace semu {

enum class Mode { Semunet, BaselineFixed, Loupe, LoupeSeg };
enum class Stage { Joint, Finetune, TestReady };

std::string to_string(Mode m);
std::string to_string(Stage s);
Mode mode_from_string(const std::string& s);

struct TrainConfig {
  Mode mode = Mode::Semunet;
  FixedMaskKind mask_kind = FixedMaskKind::Random;  // baseline-fixed only
  double rate = 0.10;
  double lambda = 0.1;
  double learning_rate = 1e-4;
  int batch_size = 12;
  int joint_epochs = 50;
  int finetune_epochs = 30;
  std::uint64_t seed_init = 0, seed_noise = 1, seed_data = 2;
  int image_size = 64;
  int class_count = 8;
  int base_channels = 8;   // fast-test preset; dataset runs use 32 / depth 4
  int depth = 2;
  bool binary_finetune = true;  // false: keep the stochastic relaxation while finetuning
  double slope_prob = 40.0;
  double slope_threshold = 10.0;
  std::string data = "phantom";  // "phantom" or a manifest path
  int phantom_train = 400;
  int phantom_test = 100;

  void set_seed(std::uint64_t s) {
    seed_init = s;
    seed_noise = s * 6364136223846793005ULL + 1442695040888963407ULL;
    seed_data = s * 2862933555777941757ULL + 3037000493ULL;
  }
  EncoderDecoderConfig recon_config() const {
    return {2, 1, base_channels, depth, seed_init};
  }
  EncoderDecoderConfig seg_config() const {
    return {1, class_count, base_channels, depth, seed_init + 0x9e3779b97f4a7c15ULL};
  }
  void validate() const;
  std::string serialize() const;  // canonical key=value text
};

TrainConfig parse_train_config(const std::string& text);

struct EpochLog {
  int epoch = 0;
  double recon = 0, seg = 0, total = 0, mask_mean = 0;
};

struct PipelineState {
  TrainConfig config;
  Stage stage = Stage::Joint;
  int epoch = 0;
  std::optional<ProbabilisticMask<double>> prob_mask;
  std::optional<BinaryMask> bin_mask;
  NetworkParameters<float> recon, seg;
  Adam<float> recon_opt, seg_opt;
  Adam<double> mask_opt;
  std::vector<EpochLog> log;

  // mask applied at test time; ContractError when not yet Booleanized
  const BinaryMask& test_mask() const;
};

PipelineState init_state(const TrainConfig& config);

struct ForwardResult {
  std::vector<MatD> recons;
  std::vector<Tensor3<float>> seg_logits;
  LossBreakdown<double> loss;
};

// Single differentiable forward pass of a batch under the Monte-Carlo
// relaxed mask (stage must be Joint). One mask realization is shared
// across the batch.
ForwardResult forward_train(PipelineState& state, const std::vector<const LabeledSlice*>& batch,
                            std::uint64_t noise_seed);

// Joint stage: ADAM over (mask weights, recon, seg) per the mode table.
PipelineState train_joint(const TrainConfig& config, const DatasetSplit& data);
void train_joint(PipelineState& state, const DatasetSplit& data);

// Booleanize the converged mask, then finetune the networks against it.
void freeze_and_finetune(PipelineState& state, const DatasetSplit& data);

// baseline-fixed / loupe / loupe-seg end-to-end runs.
PipelineState run_baseline(Mode mode, const TrainConfig& config, const DatasetSplit& data);

// Full protocol for any mode: joint stage + Booleanize + finetune.
PipelineState run_protocol(const TrainConfig& config, const DatasetSplit& data);

struct SliceMetrics {
  int slice_index = 0;
  double psnr_db = 0, ssim_pct = 0, dice_mean_pct = 0;
  std::vector<double> dice_per_class_pct;
};

struct MetricsReport {
  std::string method;
  double rate = 0;
  std::uint64_t seed = 0;
  int class_count = 0;
  std::vector<SliceMetrics> rows;
  SliceMetrics summary;  // arithmetic mean of rows
  std::string config_hash;
  bool oracle_bypass = false;
};

// Per-slice PSNR/SSIM of the reconstruction and DSC of the argmax
// segmentation under the frozen binary mask. `oracle_bypass` feeds the
// ground-truth image through SegNet instead (upper-bound row).
MetricsReport evaluate(const PipelineState& state, const std::vector<LabeledSlice>& test,
                       bool oracle_bypass = false);

MatD reconstruct_slice(const PipelineState& state, const LabeledSlice& slice, MatI* seg_labels);

void save_checkpoint(const PipelineState& state, const std::string& path);
PipelineState load_checkpoint(const std::string& path);

std::string config_hash(const TrainConfig& config);

}  // namespace semu

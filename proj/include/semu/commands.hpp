#pragma once

#include <string>

#include "semu/pipeline.hpp"

// Library backing of the CLI subcommands, callable from tests.

namespace semu {

// Resolves the data source named in the config (synthetic phantoms or an
// ingestion manifest).
DatasetSplit load_data(const TrainConfig& config);

// Runs the configured pipeline mode end to end; writes checkpoint.bin,
// train_log.csv and mask.pgm (+ sidecar) into out_dir.
void cmd_train(const TrainConfig& config, const std::string& out_dir);

// Evaluates a test-ready checkpoint; writes metrics.csv, run_info.txt,
// reconstruction and segmentation PNGs into out_dir.
void cmd_eval(const std::string& checkpoint_path, const std::string& out_dir,
              bool oracle_bypass = false, const std::string& data_override = "");

// Comparison manifest: key=value lines with methods=, rates=, seeds=,
// runs=<dir of train outputs>, out=<dir>. Emits compare.csv and one mask
// gallery PGM per rate.
void cmd_compare(const std::string& manifest_path);

void write_metrics_csv(const MetricsReport& report, const std::string& path);

// canonical run directory name used by train/compare
std::string run_dir_name(Mode mode, FixedMaskKind kind, double rate, std::uint64_t seed);

}  // namespace semu

// semu — learned k-space sampling with joint reconstruction/segmentation.
//
// Subcommands:
//   train    train a pipeline mode, write checkpoint + logs + mask
//   eval     evaluate a test-ready checkpoint, write metrics + images
//   compare  cross-method comparison table and mask gallery
//
// Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical abort.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "semu/commands.hpp"

namespace {

std::string default_out_root() {
  const char* env = std::getenv("SEMU_OUT");
  return env ? env : "runs";
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw semu::DataError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semu: joint sampling/reconstruction/segmentation pipeline"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a pipeline");
  std::string config_path, mode_str, mask_str, out_dir, data_str;
  double rate = -1, lambda = -1, lr = -1;
  int epochs_joint = -1, epochs_finetune = -1;
  long long seed = -1;
  train->add_option("--config", config_path, "key=value config file");
  train->add_option("--mode", mode_str, "semunet|baseline-fixed|loupe|loupe-seg");
  train->add_option("--mask", mask_str, "learned|radial|random");
  train->add_option("--rate", rate, "sampling rate alpha in (0,1]");
  train->add_option("--lambda", lambda, "segmentation loss weight");
  train->add_option("--lr", lr, "ADAM learning rate");
  train->add_option("--epochs-joint", epochs_joint, "joint-stage epochs");
  train->add_option("--epochs-finetune", epochs_finetune, "finetune-stage epochs");
  train->add_option("--seed", seed, "master seed (expands to init/noise/data)");
  train->add_option("--data", data_str, "'phantom' or ingestion manifest path");
  train->add_option("--out", out_dir, "output directory (default $SEMU_OUT/<run-name>)");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ckpt_path, eval_out, eval_data;
  bool oracle = false;
  eval->add_option("checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--data", eval_data, "data source override");
  eval->add_flag("--oracle-bypass", oracle, "feed ground truth as its own reconstruction");

  // compare
  auto* compare = app.add_subcommand("compare", "compare trained checkpoints");
  std::string cmp_manifest;
  compare->add_option("manifest", cmp_manifest, "comparison manifest file")->required();

  try {
    app.parse(argc, argv);

    if (train->parsed()) {
      semu::TrainConfig cfg;
      if (!config_path.empty()) cfg = semu::parse_train_config(read_text(config_path));
      if (!mode_str.empty()) cfg.mode = semu::mode_from_string(mode_str);
      if (!mask_str.empty()) {
        if (mask_str == "radial") {
          cfg.mask_kind = semu::FixedMaskKind::Radial;
        } else if (mask_str == "random") {
          cfg.mask_kind = semu::FixedMaskKind::Random;
        } else if (mask_str != "learned") {
          throw semu::ConfigError("unknown --mask value: " + mask_str);
        }
      }
      if (rate >= 0) cfg.rate = rate;
      if (lambda >= 0) cfg.lambda = lambda;
      if (lr >= 0) cfg.learning_rate = lr;
      if (epochs_joint >= 0) cfg.joint_epochs = epochs_joint;
      if (epochs_finetune >= 0) cfg.finetune_epochs = epochs_finetune;
      if (seed >= 0) cfg.set_seed(static_cast<std::uint64_t>(seed));
      if (!data_str.empty()) cfg.data = data_str;
      cfg.validate();
      if (out_dir.empty())
        out_dir = (std::filesystem::path(default_out_root()) /
                   semu::run_dir_name(cfg.mode, cfg.mask_kind, cfg.rate, cfg.seed_init))
                      .string();
      semu::cmd_train(cfg, out_dir);
      std::cout << "trained " << semu::to_string(cfg.mode) << " -> " << out_dir << "\n";
    } else if (eval->parsed()) {
      semu::cmd_eval(ckpt_path, eval_out, oracle, eval_data);
      std::cout << "evaluated " << ckpt_path << " -> " << eval_out << "\n";
    } else if (compare->parsed()) {
      semu::cmd_compare(cmp_manifest);
      std::cout << "compare done: " << cmp_manifest << "\n";
    }
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const semu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const semu::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const semu::NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

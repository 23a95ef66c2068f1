#include "semu/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "semu/image_io.hpp"

#ifndef SEMU_GIT_SHA
#define SEMU_GIT_SHA "unknown"
#endif

namespace semu {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string rate_tag(double rate) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", rate);
  return buf;
}

// fixed 8-entry class color map (wraps for larger C); documented in README
constexpr std::uint8_t kClassColors[8][3] = {
    {0, 0, 0},      {230, 25, 75},  {60, 180, 75},  {255, 225, 25},
    {0, 130, 200},  {245, 130, 48}, {145, 30, 180}, {70, 240, 240}};

void write_seg_png(const MatI& labels, const std::string& path) {
  RgbImage img;
  img.rows = labels.rows();
  img.cols = labels.cols();
  img.pixels.resize(static_cast<size_t>(labels.size()) * 3);
  for (Index r = 0; r < labels.rows(); ++r)
    for (Index c = 0; c < labels.cols(); ++c) {
      const auto* rgb = kClassColors[labels(r, c) % 8];
      const size_t o = static_cast<size_t>(r * labels.cols() + c) * 3;
      img.pixels[o] = rgb[0];
      img.pixels[o + 1] = rgb[1];
      img.pixels[o + 2] = rgb[2];
    }
  write_png_rgb(img, path);
}

std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const auto strip = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
  }
  return kv;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

struct MethodSpec {
  std::string token;  // as written in the manifest
  Mode mode;
  FixedMaskKind mask_kind = FixedMaskKind::Random;
};

MethodSpec parse_method(const std::string& token) {
  if (token == "baseline-random") return {token, Mode::BaselineFixed, FixedMaskKind::Random};
  if (token == "baseline-radial") return {token, Mode::BaselineFixed, FixedMaskKind::Radial};
  return {token, mode_from_string(token)};
}

}  // namespace

std::string run_dir_name(Mode mode, FixedMaskKind kind, double rate, std::uint64_t seed) {
  std::string name = to_string(mode);
  if (mode == Mode::BaselineFixed)
    name += kind == FixedMaskKind::Radial ? "-radial" : "-random";
  return name + "_r" + rate_tag(rate) + "_s" + std::to_string(seed);
}

DatasetSplit load_data(const TrainConfig& config) {
  if (config.data == "phantom")
    return phantom_dataset(config.image_size, config.image_size, config.class_count,
                           config.phantom_train, config.phantom_test, config.seed_data);
  const fs::path manifest(config.data);
  return ingest_slices(manifest.parent_path().string(), manifest.string(), config.image_size,
                       config.image_size);
}

void cmd_train(const TrainConfig& config, const std::string& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  const DatasetSplit data = load_data(config);
  const PipelineState state = run_protocol(config, data);

  save_checkpoint(state, (fs::path(out_dir) / "checkpoint.bin").string());

  std::ofstream log((fs::path(out_dir) / "train_log.csv").string());
  log << "epoch,recon_loss,seg_loss,total_loss,mask_mean\n";
  for (const auto& l : state.log)
    log << l.epoch << "," << fmt(l.recon) << "," << fmt(l.seg) << "," << fmt(l.total) << ","
        << fmt(l.mask_mean) << "\n";

  write_mask_pgm(state.test_mask(), (fs::path(out_dir) / "mask.pgm").string(), config.seed_init);
}

void write_metrics_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics file: " + path);
  out << "slice,psnr_db,ssim_pct,dice_mean_pct";
  for (int c = 0; c < report.class_count; ++c) out << ",dice_class" << c << "_pct";
  out << "\n";
  const auto row = [&](const std::string& label, const SliceMetrics& m) {
    out << label << "," << fmt(m.psnr_db) << "," << fmt(m.ssim_pct) << "," << fmt(m.dice_mean_pct);
    for (double v : m.dice_per_class_pct) out << "," << fmt(v);
    out << "\n";
  };
  for (const auto& m : report.rows) row(std::to_string(m.slice_index), m);
  row("mean", report.summary);
  out << "# schema=semu-metrics-v1\n"
      << "# method=" << report.method << " rate=" << rate_tag(report.rate)
      << " seed=" << report.seed << (report.oracle_bypass ? " oracle_bypass=1" : "") << "\n"
      << "# config_hash=" << report.config_hash << "\n"
      << "# commit=" << SEMU_GIT_SHA << "\n"
      << "# dice: classes absent from both maps score 1.0 and are excluded from the mean; "
         "background is never averaged\n"
      << "# full-scale reference values (not desk-reproducible): "
         "semunet alpha=5% PSNR 31.20 dB, SSIM 93.16%, DSC 72.45%; "
         "alpha=10% PSNR 34.30 dB, SSIM 96.47%\n";
}

void cmd_eval(const std::string& checkpoint_path, const std::string& out_dir, bool oracle_bypass,
              const std::string& data_override) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  const PipelineState state = load_checkpoint(checkpoint_path);
  TrainConfig cfg = state.config;
  if (!data_override.empty()) cfg.data = data_override;
  const DatasetSplit data = load_data(cfg);

  const MetricsReport report = evaluate(state, data.test, oracle_bypass);
  write_metrics_csv(report, (fs::path(out_dir) / "metrics.csv").string());

  for (size_t i = 0; i < data.test.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "recon_%03zu.png", i);
    MatI pred_labels;
    const MatD recon = oracle_bypass ? data.test[i].image
                                     : reconstruct_slice(state, data.test[i], &pred_labels);
    if (oracle_bypass) {
      // oracle rows reuse the clean image; segmentation comes from the report pass
      Tensor3<float> in(recon.rows(), recon.cols(), 1);
      for (Index r = 0; r < recon.rows(); ++r)
        for (Index c = 0; c < recon.cols(); ++c)
          in(r, c, 0) = float(recon(r, c));
      const Tensor3<float> logits = forward(state.seg, in);
      pred_labels.resize(recon.rows(), recon.cols());
      for (Index r = 0; r < recon.rows(); ++r)
        for (Index c = 0; c < recon.cols(); ++c) {
          Index best;
          logits.mat().row(r * recon.cols() + c).maxCoeff(&best);
          pred_labels(r, c) = int(best);
        }
    }
    write_png_gray(to_gray8(recon), (fs::path(out_dir) / name).string());
    std::snprintf(name, sizeof name, "seg_%03zu.png", i);
    write_seg_png(pred_labels, (fs::path(out_dir) / name).string());
  }

  // runtime is deliberately kept out of metrics.csv so reruns stay
  // byte-identical
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream info((fs::path(out_dir) / "run_info.txt").string());
  info << "checkpoint " << checkpoint_path << "\nconfig_hash " << report.config_hash
       << "\ncommit " << SEMU_GIT_SHA << "\nruntime_seconds " << secs << "\n";
}

void cmd_compare(const std::string& manifest_path) {
  const auto kv = parse_kv_file(manifest_path);
  const auto need = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("compare manifest: missing key " + key);
    return it->second;
  };
  std::vector<MethodSpec> methods;
  for (const auto& tok : split_list(need("methods"))) methods.push_back(parse_method(tok));
  std::vector<double> rates;
  for (const auto& tok : split_list(need("rates"))) rates.push_back(std::stod(tok));
  std::vector<std::uint64_t> seeds;
  for (const auto& tok : split_list(need("seeds"))) seeds.push_back(std::stoull(tok));
  const fs::path runs(need("runs"));
  const fs::path out_dir(need("out"));
  if (methods.empty() || rates.empty() || seeds.empty())
    throw ConfigError("compare manifest: methods, rates and seeds must be non-empty");
  fs::create_directories(out_dir);

  // verify every referenced checkpoint up front
  std::vector<std::string> missing;
  for (const auto& m : methods)
    for (double rate : rates)
      for (auto seed : seeds) {
        const fs::path ckpt = runs / run_dir_name(m.mode, m.mask_kind, rate, seed) / "checkpoint.bin";
        if (!fs::exists(ckpt)) missing.push_back(ckpt.string());
      }
  if (!missing.empty()) {
    std::string msg = "compare: missing checkpoints:";
    for (const auto& p : missing) msg += "\n  " + p;
    throw DataError(msg);
  }

  struct Cell {
    double psnr = 0, ssim = 0, dice = 0;
  };
  std::vector<std::vector<Cell>> table(methods.size(), std::vector<Cell>(rates.size()));
  for (size_t mi = 0; mi < methods.size(); ++mi) {
    for (size_t ri = 0; ri < rates.size(); ++ri) {
      Cell& cell = table[mi][ri];
      for (auto seed : seeds) {
        const fs::path dir = runs / run_dir_name(methods[mi].mode, methods[mi].mask_kind,
                                                 rates[ri], seed);
        const PipelineState st = load_checkpoint((dir / "checkpoint.bin").string());
        const DatasetSplit data = load_data(st.config);
        const MetricsReport rep = evaluate(st, data.test);
        cell.psnr += rep.summary.psnr_db;
        cell.ssim += rep.summary.ssim_pct;
        cell.dice += rep.summary.dice_mean_pct;
      }
      cell.psnr /= double(seeds.size());
      cell.ssim /= double(seeds.size());
      cell.dice /= double(seeds.size());
    }
  }

  std::ofstream csv((out_dir / "compare.csv").string());
  csv << "method,rate,psnr_db,ssim_pct,dice_pct,best_psnr,best_ssim,best_dice\n";
  for (size_t ri = 0; ri < rates.size(); ++ri) {
    // best-per-cell; ties resolved toward the lowest method index
    size_t bp = 0, bs = 0, bd = 0;
    for (size_t mi = 1; mi < methods.size(); ++mi) {
      if (table[mi][ri].psnr > table[bp][ri].psnr) bp = mi;
      if (table[mi][ri].ssim > table[bs][ri].ssim) bs = mi;
      if (table[mi][ri].dice > table[bd][ri].dice) bd = mi;
    }
    for (size_t mi = 0; mi < methods.size(); ++mi) {
      const Cell& c = table[mi][ri];
      csv << methods[mi].token << "," << rate_tag(rates[ri]) << "," << fmt(c.psnr) << ","
          << fmt(c.ssim) << "," << fmt(c.dice) << "," << (mi == bp ? 1 : 0) << ","
          << (mi == bs ? 1 : 0) << "," << (mi == bd ? 1 : 0) << "\n";
    }
  }
  csv << "# commit=" << SEMU_GIT_SHA << "\n";

  // mask gallery per rate: one row of masks (first seed), methods left to right
  for (size_t ri = 0; ri < rates.size(); ++ri) {
    std::vector<GrayImage> masks;
    for (const auto& m : methods) {
      const fs::path dir = runs / run_dir_name(m.mode, m.mask_kind, rates[ri], seeds.front());
      GrayImage img = read_gray((dir / "mask.pgm").string());
      Index ones = 0;
      for (auto px : img.pixels) ones += px > 127;
      const Index expect = mask_ones_for_rate(rates[ri], img.rows * img.cols);
      if (ones != expect)
        throw DataError("compare: mask " + (dir / "mask.pgm").string() + " has " +
                        std::to_string(ones) + " samples, expected " + std::to_string(expect));
      masks.push_back(std::move(img));
    }
    const Index h = masks.front().rows, w = masks.front().cols;
    constexpr Index kGap = 2;
    GrayImage grid;
    grid.rows = h;
    grid.cols = Index(masks.size()) * w + (Index(masks.size()) - 1) * kGap;
    grid.max_value = 255;
    grid.pixels.assign(static_cast<size_t>(grid.rows * grid.cols), 64);
    for (size_t mi = 0; mi < masks.size(); ++mi) {
      const Index x0 = Index(mi) * (w + kGap);
      for (Index r = 0; r < h; ++r)
        for (Index c = 0; c < w; ++c)
          grid.pixels[static_cast<size_t>(r * grid.cols + x0 + c)] = masks[mi].at(r, c);
    }
    write_pgm(grid, (out_dir / ("masks_r" + rate_tag(rates[ri]) + ".pgm")).string());
  }
}

}  // namespace semu

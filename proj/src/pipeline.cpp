#include "semu/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "semu/fourier.hpp"
#include "semu/metrics.hpp"

namespace semu {

// ---------------------------------------------------------------------------
// config plumbing

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Semunet: return "semunet";
    case Mode::BaselineFixed: return "baseline-fixed";
    case Mode::Loupe: return "loupe";
    case Mode::LoupeSeg: return "loupe-seg";
  }
  return "?";
}

std::string to_string(Stage s) {
  switch (s) {
    case Stage::Joint: return "joint";
    case Stage::Finetune: return "finetune";
    case Stage::TestReady: return "test-ready";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  if (s == "semunet") return Mode::Semunet;
  if (s == "baseline-fixed") return Mode::BaselineFixed;
  if (s == "loupe") return Mode::Loupe;
  if (s == "loupe-seg") return Mode::LoupeSeg;
  throw ConfigError("unknown mode: " + s);
}

void TrainConfig::validate() const {
  if (!(rate > 0.0 && rate <= 1.0))
    throw ConfigError("rate must lie in (0,1], got " + std::to_string(rate));
  if (lambda < 0.0) throw ConfigError("lambda must be nonnegative");
  if ((mode == Mode::Loupe || mode == Mode::LoupeSeg) && lambda != 0.0)
    throw ConfigError("lambda is fixed to 0 in " + to_string(mode) + " mode");
  if (joint_epochs < 0 || finetune_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (class_count < 2) throw ConfigError("class_count must be >= 2");
  if (depth < 1) throw ConfigError("depth must be >= 1");
  if (image_size <= 0 || image_size % (1 << depth) != 0)
    throw ConfigError("image_size must be divisible by 2^depth");
  if (phantom_train < 1 || phantom_test < 1)
    throw ConfigError("phantom_train/phantom_test must be >= 1");
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string TrainConfig::serialize() const {
  std::ostringstream s;
  s << "mode=" << to_string(mode) << "\n"
    << "mask=" << (mask_kind == FixedMaskKind::Radial ? "radial" : "random") << "\n"
    << "rate=" << fmt_double(rate) << "\n"
    << "lambda=" << fmt_double(lambda) << "\n"
    << "lr=" << fmt_double(learning_rate) << "\n"
    << "batch_size=" << batch_size << "\n"
    << "epochs_joint=" << joint_epochs << "\n"
    << "epochs_finetune=" << finetune_epochs << "\n"
    << "seed_init=" << seed_init << "\n"
    << "seed_noise=" << seed_noise << "\n"
    << "seed_data=" << seed_data << "\n"
    << "image_size=" << image_size << "\n"
    << "classes=" << class_count << "\n"
    << "base_channels=" << base_channels << "\n"
    << "depth=" << depth << "\n"
    << "binary_finetune=" << (binary_finetune ? 1 : 0) << "\n"
    << "slope_prob=" << fmt_double(slope_prob) << "\n"
    << "slope_threshold=" << fmt_double(slope_threshold) << "\n"
    << "data=" << data << "\n"
    << "phantom_train=" << phantom_train << "\n"
    << "phantom_test=" << phantom_test << "\n";
  return s.str();
}

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // trim
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    line = line.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    try {
      if (key == "mode") cfg.mode = mode_from_string(val);
      else if (key == "mask") {
        if (val == "radial") cfg.mask_kind = FixedMaskKind::Radial;
        else if (val == "random") cfg.mask_kind = FixedMaskKind::Random;
        else throw ConfigError("unknown mask kind: " + val);
      }
      else if (key == "rate") cfg.rate = std::stod(val);
      else if (key == "lambda") cfg.lambda = std::stod(val);
      else if (key == "lr") cfg.learning_rate = std::stod(val);
      else if (key == "batch_size") cfg.batch_size = std::stoi(val);
      else if (key == "epochs_joint") cfg.joint_epochs = std::stoi(val);
      else if (key == "epochs_finetune") cfg.finetune_epochs = std::stoi(val);
      else if (key == "seed") cfg.set_seed(std::stoull(val));
      else if (key == "seed_init") cfg.seed_init = std::stoull(val);
      else if (key == "seed_noise") cfg.seed_noise = std::stoull(val);
      else if (key == "seed_data") cfg.seed_data = std::stoull(val);
      else if (key == "image_size") cfg.image_size = std::stoi(val);
      else if (key == "classes") cfg.class_count = std::stoi(val);
      else if (key == "base_channels") cfg.base_channels = std::stoi(val);
      else if (key == "depth") cfg.depth = std::stoi(val);
      else if (key == "binary_finetune") cfg.binary_finetune = std::stoi(val) != 0;
      else if (key == "slope_prob") cfg.slope_prob = std::stod(val);
      else if (key == "slope_threshold") cfg.slope_threshold = std::stod(val);
      else if (key == "data") cfg.data = val;
      else if (key == "phantom_train") cfg.phantom_train = std::stoi(val);
      else if (key == "phantom_test") cfg.phantom_test = std::stoi(val);
      else throw ConfigError("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
      throw ConfigError("config key " + key + ": cannot parse value '" + val + "'");
    }
  }
  return cfg;
}

std::string config_hash(const TrainConfig& config) {
  const std::string text = config.serialize();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// state

const BinaryMask& PipelineState::test_mask() const {
  if (!bin_mask) throw ContractError("pipeline: no binary mask; Booleanize before testing");
  return *bin_mask;
}

PipelineState init_state(const TrainConfig& config) {
  config.validate();
  PipelineState st;
  st.config = config;
  st.recon = build<float>(config.recon_config());
  st.seg = build<float>(config.seg_config());
  const float lr = float(config.learning_rate);
  st.recon_opt = Adam<float>(st.recon.count(), lr);
  st.seg_opt = Adam<float>(st.seg.count(), lr);
  const Index hw = Index(config.image_size);
  if (config.mode == Mode::BaselineFixed) {
    st.bin_mask = fixed_mask(config.mask_kind, hw, hw, config.rate, config.seed_init);
  } else {
    st.prob_mask = init_uniform<double>(hw, hw, config.rate, config.seed_init,
                                        config.slope_prob, config.slope_threshold);
    st.mask_opt = Adam<double>(hw * hw, config.learning_rate);
  }
  return st;
}

// ---------------------------------------------------------------------------
// training internals

namespace {

template <typename S>
Vec<S> flat_rm(const Mat<S>& m) {
  Vec<S> v(m.size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

template <typename S, typename D>
Mat<D> unflat_rm(const Eigen::MatrixBase<S>& v, Index h, Index w, D /*tag*/) {
  Mat<D> m(h, w);
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) m(r, c) = D(v(r * w + c));
  return m;
}

struct MaskChain {
  MatD p, ps, m;
};

struct BatchOpts {
  bool train_mask = false, train_recon = false, train_seg = false;
  bool use_seg = true;
  bool seg_only = false;  // objective is pure cross-entropy (loupe-seg stage)
  double lambda = 0.0;
  bool compute_grads = true;
};

struct BatchGrads {
  VecF recon, seg;
  MatD mask;
};

std::string mask_stats(const PipelineState& st) {
  std::ostringstream s;
  if (st.prob_mask) {
    const MatD ps = scaling_layer(probability_layer(*st.prob_mask), st.prob_mask->rate);
    s << "scaled mask mean=" << ps.mean() << " min=" << ps.minCoeff() << " max=" << ps.maxCoeff();
  } else if (st.bin_mask) {
    s << "binary mask ones=" << st.bin_mask->ones_count();
  }
  return s.str();
}

LossBreakdown<double> run_batch(PipelineState& st, const std::vector<const LabeledSlice*>& batch,
                                const MatD& mask, const BatchOpts& opts, BatchGrads* grads,
                                ForwardResult* out) {
  const Index hw = Index(st.config.image_size);
  const double inv_b = 1.0 / double(batch.size());
  const float lambda = float(opts.lambda);
  LossBreakdown<double> loss;
  loss.lambda = opts.lambda;
  if (grads) {
    grads->recon = VecF::Zero(st.recon.count());
    grads->seg = VecF::Zero(st.seg.count());
    grads->mask = MatD::Zero(hw, hw);
  }

  Tensor3<float> input(hw, hw, 2);
  Workspace<float> ws_r, ws_s;  // scratch reused across the batch
  for (const LabeledSlice* slice : batch) {
    if (slice->image.rows() != hw || slice->image.cols() != hw)
      throw DimensionError("run_batch: slice shape does not match configured image size");
    const auto x = ComplexGrid<double>::fromReal(slice->image);
    const ComplexGrid<double> k = fft2c(x);
    ComplexGrid<double> km{(mask.array() * k.real.array()).matrix(),
                           (mask.array() * k.imag.array()).matrix(), GridLayout::KspaceCentered};
    const ComplexGrid<double> zf = ifft2c(km);

    input.mat().col(0) = flat_rm<double>(zf.real).cast<float>();
    input.mat().col(1) = flat_rm<double>(zf.imag).cast<float>();

    const Tensor3<float> recon_out = forward(st.recon, input, ws_r);
    const VecF target = flat_rm<double>(slice->image).cast<float>();
    const MatF recon_col = recon_out.mat();
    loss.recon += inv_b * double(l1_loss<float>(recon_col, target));

    Tensor3<float> logits;
    if (opts.use_seg) {
      logits = forward(st.seg, recon_out, ws_s);
      loss.seg += inv_b * double(cross_entropy_loss(logits, slice->labels));
    }
    if (out) {
      out->recons.push_back(unflat_rm(recon_out.mat().col(0), hw, hw, double{}));
      if (opts.use_seg) out->seg_logits.push_back(logits);
    }
    if (!grads || !opts.compute_grads) continue;

    // gradient w.r.t. the reconstruction output
    MatF g_recon = MatF::Zero(hw * hw, 1);
    if (!opts.seg_only) g_recon = l1_loss_grad<float>(recon_col, target) * float(inv_b);
    if (opts.use_seg && (opts.seg_only || lambda != 0.0f || opts.train_seg)) {
      Tensor3<float> gce = cross_entropy_grad(logits, slice->labels);
      const float scale = float(inv_b) * (opts.seg_only ? 1.0f : lambda);
      gce.mat() *= scale;
      const Tensor3<float> gseg_in = backward(st.seg, ws_s, gce, grads->seg);
      if (!opts.seg_only) g_recon += gseg_in.mat();
    }
    if (opts.seg_only || (!opts.train_recon && !opts.train_mask)) continue;

    Tensor3<float> grt(hw, hw, 1);
    grt.mat() = g_recon;
    const Tensor3<float> g_input = backward(st.recon, ws_r, grt, grads->recon);
    if (opts.train_mask) {
      ComplexGrid<double> gzf{unflat_rm(g_input.mat().col(0), hw, hw, double{}),
                              unflat_rm(g_input.mat().col(1), hw, hw, double{}),
                              GridLayout::ImageDomain};
      const ComplexGrid<double> gkm = fft2c(gzf);  // adjoint of the unitary ifft2c
      grads->mask.array() +=
          gkm.real.array() * k.real.array() + gkm.imag.array() * k.imag.array();
    }
  }
  loss.total = loss.recon + opts.lambda * loss.seg;
  if (out) out->loss = loss;
  if (!std::isfinite(loss.total))
    throw NumericalError("training aborted: non-finite loss (" + mask_stats(st) + ")");
  return loss;
}

void apply_updates(PipelineState& st, const BatchOpts& opts, BatchGrads& grads,
                   const MaskChain* chain) {
  if (opts.train_recon) st.recon_opt.step(st.recon.flat, grads.recon);
  if (opts.train_seg) st.seg_opt.step(st.seg.flat, grads.seg);
  if (opts.train_mask) {
    ProbabilisticMask<double>& pm = *st.prob_mask;
    MatD gm = monte_carlo_backward(chain->m, pm.slope_threshold, grads.mask);
    gm = scaling_layer_backward(chain->p, pm.rate, gm);
    const MatD gw = probability_layer_backward(pm, chain->p, gm);
    VecD w = Eigen::Map<const VecD>(pm.weights.data(), pm.weights.size());
    const VecD g = Eigen::Map<const VecD>(gw.data(), gw.size());
    st.mask_opt.step(w, g);
    pm.weights = Eigen::Map<const MatD>(w.data(), pm.weights.rows(), pm.weights.cols());
  }
}

BatchOpts opts_for_joint(const TrainConfig& cfg) {
  BatchOpts o;
  switch (cfg.mode) {
    case Mode::Semunet:
      o = {true, true, true, true, false, cfg.lambda};
      break;
    case Mode::Loupe:
    case Mode::LoupeSeg:
      o = {true, true, false, false, false, 0.0};
      break;
    case Mode::BaselineFixed:
      o = {false, true, true, true, false, cfg.lambda};
      break;
  }
  return o;
}

BatchOpts opts_for_finetune(const TrainConfig& cfg) {
  BatchOpts o = opts_for_joint(cfg);
  o.train_mask = false;
  return o;
}

// One epoch over shuffled training slices. The Monte-Carlo mask (when in
// use) is redrawn once per optimization step and shared across the batch.
void run_epoch(PipelineState& st, const DatasetSplit& data, const BatchOpts& opts,
               bool stochastic_mask) {
  const auto& cfg = st.config;
  std::vector<Index> order(data.train.size());
  std::iota(order.begin(), order.end(), Index(0));
  std::mt19937_64 rng(cfg.seed_data + 0x51ab1ULL * std::uint64_t(st.epoch + 1));
  std::shuffle(order.begin(), order.end(), rng);

  EpochLog log;
  log.epoch = st.epoch;
  Index n_steps = 0;
  for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
    std::vector<const LabeledSlice*> batch;
    for (size_t i = start; i < std::min(order.size(), start + size_t(cfg.batch_size)); ++i)
      batch.push_back(&data.train[static_cast<size_t>(order[i])]);

    MaskChain chain;
    MatD mask;
    if (stochastic_mask) {
      const ProbabilisticMask<double>& pm = *st.prob_mask;
      chain.p = probability_layer(pm);
      chain.ps = scaling_layer(chain.p, pm.rate);
      const std::uint64_t noise_seed =
          cfg.seed_noise + 1000003ULL * std::uint64_t(st.epoch) + std::uint64_t(n_steps);
      chain.m = monte_carlo_layer(chain.ps, noise_seed, pm.slope_threshold);
      mask = chain.m;
      log.mask_mean = chain.ps.mean();
    } else {
      mask = st.test_mask().asReal<double>();
      log.mask_mean = mask.mean();
    }

    BatchGrads grads;
    const auto loss = run_batch(st, batch, mask, opts, &grads, nullptr);
    apply_updates(st, opts, grads, stochastic_mask ? &chain : nullptr);
    log.recon += loss.recon;
    log.seg += loss.seg;
    log.total += loss.total;
    ++n_steps;
  }
  if (n_steps > 0) {
    log.recon /= double(n_steps);
    log.seg /= double(n_steps);
    log.total /= double(n_steps);
  }
  st.log.push_back(log);
  ++st.epoch;
}

}  // namespace

ForwardResult forward_train(PipelineState& state, const std::vector<const LabeledSlice*>& batch,
                            std::uint64_t noise_seed) {
  if (state.stage != Stage::Joint)
    throw ContractError("forward_train: stage must be joint, is " + to_string(state.stage));
  if (batch.empty()) throw DimensionError("forward_train: empty batch");
  BatchOpts opts = opts_for_joint(state.config);
  opts.compute_grads = false;
  opts.use_seg = true;  // report the full hybrid loss even in loupe mode
  opts.lambda = state.config.lambda;
  MatD mask;
  if (state.prob_mask) {
    const auto& pm = *state.prob_mask;
    mask = monte_carlo_layer(scaling_layer(probability_layer(pm), pm.rate), noise_seed,
                             pm.slope_threshold);
  } else {
    mask = state.test_mask().asReal<double>();
  }
  ForwardResult out;
  run_batch(state, batch, mask, opts, nullptr, &out);
  return out;
}

void train_joint(PipelineState& state, const DatasetSplit& data) {
  if (state.stage != Stage::Joint)
    throw ContractError("train_joint: stage must be joint, is " + to_string(state.stage));
  if (data.train.empty()) throw DataError("train_joint: empty training set");
  const BatchOpts opts = opts_for_joint(state.config);
  const bool stochastic = state.prob_mask.has_value();
  for (int e = 0; e < state.config.joint_epochs; ++e) run_epoch(state, data, opts, stochastic);
}

PipelineState train_joint(const TrainConfig& config, const DatasetSplit& data) {
  PipelineState st = init_state(config);
  train_joint(st, data);
  return st;
}

void freeze_and_finetune(PipelineState& state, const DatasetSplit& data) {
  if (state.stage != Stage::Joint)
    throw ContractError("freeze_and_finetune: joint stage must come first");
  if (state.prob_mask && !state.bin_mask) state.bin_mask = booleanize(*state.prob_mask);
  state.stage = Stage::Finetune;
  // the frozen mask changes the input distribution; start the stage with
  // fresh optimizer moments
  const float lr = float(state.config.learning_rate);
  state.recon_opt = Adam<float>(state.recon.count(), lr);
  state.seg_opt = Adam<float>(state.seg.count(), lr);
  const BatchOpts opts = opts_for_finetune(state.config);
  const bool stochastic = !state.config.binary_finetune && state.prob_mask.has_value();
  for (int e = 0; e < state.config.finetune_epochs; ++e) run_epoch(state, data, opts, stochastic);
  state.stage = Stage::TestReady;
}

PipelineState run_baseline(Mode mode, const TrainConfig& config, const DatasetSplit& data) {
  TrainConfig cfg = config;
  cfg.mode = mode;
  switch (mode) {
    case Mode::BaselineFixed: {
      PipelineState st = train_joint(cfg, data);
      freeze_and_finetune(st, data);
      return st;
    }
    case Mode::Loupe: {
      cfg.lambda = 0.0;
      PipelineState st = train_joint(cfg, data);
      freeze_and_finetune(st, data);
      return st;
    }
    case Mode::LoupeSeg: {
      // converged LOUPE state, then SegNet alone on its reconstructions
      TrainConfig loupe_cfg = cfg;
      loupe_cfg.mode = Mode::Loupe;
      loupe_cfg.lambda = 0.0;
      PipelineState st = run_baseline(Mode::Loupe, loupe_cfg, data);
      st.config.mode = Mode::LoupeSeg;
      BatchOpts opts;
      opts.train_seg = true;
      opts.use_seg = true;
      opts.seg_only = true;
      st.stage = Stage::Joint;  // reopen for the seg-only epochs
      // seg gets the same epoch budget the joint modes spend on it
      const int seg_epochs = cfg.joint_epochs + cfg.finetune_epochs;
      for (int e = 0; e < seg_epochs; ++e) run_epoch(st, data, opts, false);
      st.stage = Stage::TestReady;
      return st;
    }
    case Mode::Semunet:
      throw ConfigError("run_baseline: semunet is not a baseline mode");
  }
  throw ConfigError("run_baseline: invalid mode");
}

PipelineState run_protocol(const TrainConfig& config, const DatasetSplit& data) {
  if (config.mode == Mode::Semunet) {
    PipelineState st = train_joint(config, data);
    freeze_and_finetune(st, data);
    return st;
  }
  return run_baseline(config.mode, config, data);
}

// ---------------------------------------------------------------------------
// evaluation

MatD reconstruct_slice(const PipelineState& state, const LabeledSlice& slice, MatI* seg_labels) {
  const Index hw = Index(state.config.image_size);
  const MatD mask = state.test_mask().asReal<double>();
  const auto x = ComplexGrid<double>::fromReal(slice.image);
  const ComplexGrid<double> zf = zero_filled_recon(undersample(x, mask));
  Tensor3<float> input(hw, hw, 2);
  input.mat().col(0) = flat_rm<double>(zf.real).cast<float>();
  input.mat().col(1) = flat_rm<double>(zf.imag).cast<float>();
  const Tensor3<float> recon_out = forward(state.recon, input);
  const MatD recon = unflat_rm(recon_out.mat().col(0), hw, hw, double{});
  if (seg_labels) {
    const Tensor3<float> logits = forward(state.seg, recon_out);
    seg_labels->resize(hw, hw);
    for (Index r = 0; r < hw; ++r)
      for (Index c = 0; c < hw; ++c) {
        Index best;
        logits.mat().row(r * hw + c).maxCoeff(&best);
        (*seg_labels)(r, c) = int(best);
      }
  }
  return recon;
}

MetricsReport evaluate(const PipelineState& state, const std::vector<LabeledSlice>& test,
                       bool oracle_bypass) {
  if (state.stage != Stage::TestReady)
    throw ContractError("evaluate: state is not test-ready (stage " + to_string(state.stage) + ")");
  (void)state.test_mask();  // binary mask required
  const int C = state.config.class_count;
  MetricsReport report;
  report.method = to_string(state.config.mode);
  report.rate = state.config.rate;
  report.seed = state.config.seed_init;
  report.class_count = C;
  report.config_hash = config_hash(state.config);
  report.oracle_bypass = oracle_bypass;

  const Index hw = Index(state.config.image_size);
  for (const auto& slice : test) {
    SliceMetrics m;
    m.slice_index = slice.slice_index;
    MatI pred_labels;
    MatD recon;
    if (oracle_bypass) {
      recon = slice.image;
      Tensor3<float> in(hw, hw, 1);
      in.mat().col(0) = flat_rm<double>(slice.image).cast<float>();
      const Tensor3<float> logits = forward(state.seg, in);
      pred_labels.resize(hw, hw);
      for (Index r = 0; r < hw; ++r)
        for (Index c = 0; c < hw; ++c) {
          Index best;
          logits.mat().row(r * hw + c).maxCoeff(&best);
          pred_labels(r, c) = int(best);
        }
    } else {
      recon = reconstruct_slice(state, slice, &pred_labels);
    }
    m.psnr_db = psnr(recon, slice.image, 1.0);
    m.ssim_pct = 100.0 * ssim(recon, slice.image, 1.0);
    const DiceResult d = dice(pred_labels, slice.labels, C);
    m.dice_mean_pct = 100.0 * d.mean;
    for (double v : d.per_class) m.dice_per_class_pct.push_back(100.0 * v);
    report.rows.push_back(std::move(m));
  }

  SliceMetrics& sum = report.summary;
  sum.dice_per_class_pct.assign(static_cast<size_t>(C), 0.0);
  for (const auto& r : report.rows) {
    sum.psnr_db += r.psnr_db;
    sum.ssim_pct += r.ssim_pct;
    sum.dice_mean_pct += r.dice_mean_pct;
    for (int c = 0; c < C; ++c) sum.dice_per_class_pct[size_t(c)] += r.dice_per_class_pct[size_t(c)];
  }
  if (!report.rows.empty()) {
    const double n = double(report.rows.size());
    sum.psnr_db /= n;
    sum.ssim_pct /= n;
    sum.dice_mean_pct /= n;
    for (auto& v : sum.dice_per_class_pct) v /= n;
  }
  return report;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[9] = "SEMUCKP1";

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return v;
}

void put_string(std::ostream& out, const std::string& s) {
  put(out, std::uint64_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), std::streamsize(n));
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return s;
}

template <typename S>
void put_vec(std::ostream& out, const Vec<S>& v) {
  put(out, std::uint64_t(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(size_t(v.size()) * sizeof(S)));
}

template <typename S>
Vec<S> get_vec(std::istream& in) {
  const auto n = get<std::uint64_t>(in);
  Vec<S> v;
  v.resize(Index(n));
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(S)));
  if (!in) throw DataError("checkpoint: unexpected end of file");
  return v;
}

template <typename S>
void put_adam(std::ostream& out, const Adam<S>& a) {
  put(out, std::int64_t(a.steps()));
  put_vec(out, a.moment1());
  put_vec(out, a.moment2());
}

template <typename S>
void get_adam(std::istream& in, Adam<S>& a) {
  const auto t = get<std::int64_t>(in);
  auto m = get_vec<S>(in);
  auto v = get_vec<S>(in);
  a.restore(std::move(m), std::move(v), t);
}

}  // namespace

void save_checkpoint(const PipelineState& state, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  put_string(out, state.config.serialize());
  put(out, std::int32_t(state.stage));
  put(out, std::int32_t(state.epoch));
  put(out, std::uint8_t(state.prob_mask.has_value()));
  put(out, std::uint8_t(state.bin_mask.has_value()));
  if (state.prob_mask) {
    const auto& pm = *state.prob_mask;
    put(out, std::int64_t(pm.rows()));
    put(out, std::int64_t(pm.cols()));
    put(out, pm.slope_prob);
    put(out, pm.slope_threshold);
    put(out, pm.rate);
    put_vec<double>(out, Eigen::Map<const VecD>(pm.weights.data(), pm.weights.size()));
  }
  if (state.bin_mask) {
    const auto& bm = *state.bin_mask;
    put(out, std::int64_t(bm.rows()));
    put(out, std::int64_t(bm.cols()));
    put(out, bm.rate());
    for (Index r = 0; r < bm.rows(); ++r)
      for (Index c = 0; c < bm.cols(); ++c) put(out, std::uint8_t(bm.pattern()(r, c)));
  }
  put_vec(out, state.recon.flat);
  put_vec(out, state.seg.flat);
  put_adam(out, state.recon_opt);
  put_adam(out, state.seg_opt);
  put_adam(out, state.mask_opt);
  put(out, std::uint64_t(state.log.size()));
  for (const auto& l : state.log) {
    put(out, std::int32_t(l.epoch));
    put(out, l.recon);
    put(out, l.seg);
    put(out, l.total);
    put(out, l.mask_mean);
  }
  if (!out) throw DataError("checkpoint write failed: " + path);
}

PipelineState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  PipelineState st;
  st.config = parse_train_config(get_string(in));
  st.stage = Stage(get<std::int32_t>(in));
  st.epoch = get<std::int32_t>(in);
  const bool has_prob = get<std::uint8_t>(in) != 0;
  const bool has_bin = get<std::uint8_t>(in) != 0;
  if (has_prob) {
    ProbabilisticMask<double> pm;
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    pm.slope_prob = get<double>(in);
    pm.slope_threshold = get<double>(in);
    pm.rate = get<double>(in);
    const VecD w = get_vec<double>(in);
    pm.weights = Eigen::Map<const MatD>(w.data(), rows, cols);
    st.prob_mask = std::move(pm);
  }
  if (has_bin) {
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    const double rate = get<double>(in);
    MatI pattern(rows, cols);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) pattern(r, c) = get<std::uint8_t>(in);
    st.bin_mask = BinaryMask(std::move(pattern), rate);
  }
  st.recon = build<float>(st.config.recon_config());
  st.seg = build<float>(st.config.seg_config());
  st.recon.flat = get_vec<float>(in);
  st.seg.flat = get_vec<float>(in);
  const float lr = float(st.config.learning_rate);
  st.recon_opt = Adam<float>(st.recon.count(), lr);
  st.seg_opt = Adam<float>(st.seg.count(), lr);
  st.mask_opt = Adam<double>(st.prob_mask ? st.prob_mask->weights.size() : 0,
                             st.config.learning_rate);
  get_adam(in, st.recon_opt);
  get_adam(in, st.seg_opt);
  get_adam(in, st.mask_opt);
  const auto n_log = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < n_log; ++i) {
    EpochLog l;
    l.epoch = get<std::int32_t>(in);
    l.recon = get<double>(in);
    l.seg = get<double>(in);
    l.total = get<double>(in);
    l.mask_mean = get<double>(in);
    st.log.push_back(l);
  }
  return st;
}

}  // namespace semu

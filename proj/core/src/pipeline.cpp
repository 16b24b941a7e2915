// SPDX-License-Identifier: Apache-2.0
#include "mtms/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mtms/binary_io.hpp"
#include "mtms/dataset.hpp"
#include "mtms/diffusion.hpp"
#include "mtms/eo.hpp"
#include "mtms/error.hpp"
#include "mtms/rng.hpp"
#include "mtms/stcl.hpp"
#include "mtms/yield.hpp"

namespace mtms {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::pair<Stage, std::string_view>, 4> kStages{{
    {Stage::kPretrain, "pretrain"},
    {Stage::kSelect, "select"},
    {Stage::kTrain, "train"},
    {Stage::kEvaluate, "evaluate"},
}};

// Random streams of the run seed.
enum Stream : std::uint64_t {
  kDenoiserInit = 11,
  kDenoiserTrain,
  kEncoderInit,
  kPretrainStream,
  kSeparation,
  kEoStream,
  kTrainStream,
};

Activation parse_head_activation(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  throw InvalidArgument(fmt::format("head_activation must be identity or relu, got '{}'", name));
}

ScheduleShape parse_schedule(const std::string& name) {
  if (name == "linear") return ScheduleShape::kLinear;
  if (name == "cosine") return ScheduleShape::kCosine;
  throw InvalidArgument(fmt::format("schedule must be linear or cosine, got '{}'", name));
}

void check_optimizer(const std::string& name) {
  if (name == "eo" || name == "none") return;
  if (name == "golden_ratio" || name == "sail_fish") {
    throw InvalidArgument(fmt::format("optimizer '{}' is reserved and not implemented", name));
  }
  throw InvalidArgument(fmt::format("unknown optimizer '{}' (eo|none)", name));
}

void check_augmenter(const std::string& name) {
  if (name == "diffusion" || name == "none") return;
  if (name == "gan") throw InvalidArgument("augmenter 'gan' is reserved and not implemented");
  throw InvalidArgument(fmt::format("unknown augmenter '{}' (diffusion|none)", name));
}

/// Everything a stage needs: dataset, split, encoder input and the resolved module options.
struct Run {
  const PipelineRequest& req;
  const RunConfig& cfg;
  Dataset ds;
  std::vector<Tensor> sequences;
  std::vector<std::int64_t> plot_ids;
  std::vector<double> targets;
  std::uint64_t seed;
  EncoderConfig encoder_config;
  NoiseSchedule schedule;

  fs::path at(std::string_view name) const { return req.out / name; }

  void log(std::string_view msg) const {
    if (req.log) req.log(msg);
  }

  void require(std::initializer_list<std::string_view> names, Stage stage) const {
    for (auto n : names) {
      if (!fs::exists(at(n))) {
        throw StageError(fmt::format("stage prerequisite missing: {} needs {} in {}", to_string(stage), n,
                                     req.out.string()));
      }
    }
  }
};

SsaConfig ssa_config(const RunConfig& c) {
  SsaConfig s;
  s.out_channels = c.count("ssa_out");
  s.reduction = c.count("reduction");
  s.groups = c.count("groups");
  s.experts = c.count("experts");
  s.window = c.count("window");
  s.kernel = c.count("kernel");
  s.attention = parse_attention_mode(c.text("attention"));
  s.conv = parse_conv_mode(c.text("conv"));
  return s;
}

EncoderConfig encoder_config(const RunConfig& c, const Dataset& ds) {
  EncoderConfig e = make_encoder_config(ds.bands.channels(), ds.H, ds.W, c.count("hidden"), ssa_config(c));
  e.lstm.kernel = c.count("kernel");
  e.embed_dim = c.count("embed_dim");
  return e;
}

PretrainConfig pretrain_config(const RunConfig& c, std::uint64_t seed) {
  PretrainConfig p;
  p.tau = c.real("tau");
  p.learning_rate = c.real("pretrain_lr");
  p.epochs = c.count("pretrain_epochs");
  p.plots_per_batch = c.count("plots_per_batch");
  p.timestamps_per_plot = c.count("timestamps_per_plot");
  p.window = c.count("view_window");
  p.aug_depth = c.text("augmenter") == "none" ? 0 : c.count("aug_depth");
  p.augment.sigma_scale = c.real("aug_sigma");
  p.clip_norm = c.real("pretrain_clip");
  p.seed = derive_seed(seed, kPretrainStream);
  return p;
}

std::string csv_series(std::string_view header, std::span<const double> values) {
  std::string out = fmt::format("{}\n", header);
  for (std::size_t i = 0; i < values.size(); ++i) out += fmt::format("{},{:.17g}\n", i, values[i]);
  return out;
}

EncoderParams load_encoder(const Run& run, std::string_view file) {
  EncoderParams enc = init_encoder(run.encoder_config, 0);
  load_params(load_checkpoint(run.at(file)), "encoder", enc);
  return enc;
}

std::vector<std::size_t> held_out(const Dataset& ds) {
  std::vector<std::size_t> out(ds.split.val);
  out.insert(out.end(), ds.split.test.begin(), ds.split.test.end());
  return out;
}

void stage_pretrain(const Run& run) {
  const RunConfig& c = run.cfg;
  std::vector<Tensor> frames;
  for (auto i : run.ds.split.train) {
    for (auto& f : unstack_frames(run.sequences[i])) frames.push_back(std::move(f));
  }
  Denoiser den = init_denoiser(run.ds.bands.channels(), c.count("denoiser_hidden"), c.count("diffusion_steps"),
                               derive_seed(run.seed, kDenoiserInit));
  DenoiserTraining dt;
  dt.epochs = c.count("denoiser_epochs");
  dt.learning_rate = c.real("denoiser_lr");
  dt.lambda = c.real("sss_lambda");
  dt.seed = derive_seed(run.seed, kDenoiserTrain);
  const auto den_loss = c.text("augmenter") == "none" ? std::vector<double>{} : train_denoiser(den, frames, run.schedule, dt);
  run.log(fmt::format("denoiser: {} epochs", den_loss.size()));

  EncoderParams enc = init_encoder(run.encoder_config, derive_seed(run.seed, kEncoderInit));
  const PretrainConfig pc = pretrain_config(c, run.seed);
  const auto result = pretrain(enc, run.encoder_config, run.sequences, run.plot_ids, run.ds.split.train, den,
                               run.schedule, pc);
  run.log(fmt::format("pretrain: loss {:.4f} -> {:.4f}", result.epoch_loss.front(), result.epoch_loss.back()));

  const auto sep = contrastive_separation(enc, run.encoder_config, run.sequences, run.plot_ids, held_out(run.ds), den,
                                          run.schedule, pc, derive_seed(run.seed, kSeparation));

  std::vector<NamedTensor> den_ck, enc_ck;
  append_params(den_ck, "denoiser", den.params);
  append_params(enc_ck, "encoder", enc);
  save_checkpoint(run.at("denoiser.ckpt"), den_ck);
  save_checkpoint(run.at("encoder.ckpt"), enc_ck);
  write_file(run.at("denoiser_loss.csv"), csv_series("epoch,sss_loss", den_loss));
  write_file(run.at("pretrain_loss.csv"), csv_series("epoch,contrastive_loss", result.epoch_loss));
  write_file(run.at("separation.kv"),
             fmt::format("positive={:.17g}\nnegative={:.17g}\ngap={:.17g}\npairs={}\n", sep.positive, sep.negative,
                         sep.positive - sep.negative, sep.pairs));
}

std::vector<std::vector<double>> pooled(const Run& run, const EncoderParams& enc, std::span<const std::size_t> idx) {
  std::vector<std::vector<double>> out;
  for (auto i : idx) out.push_back(encode_features(run.sequences[i], enc, run.encoder_config).values());
  return out;
}

Mask read_mask(const fs::path& path) {
  const std::string text = read_file(path);
  const std::string bits = text.substr(0, text.find('\n'));
  Mask m;
  for (char ch : bits) {
    if (ch != '0' && ch != '1') {
      throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("{}: mask must be 0/1 characters", path.string()));
    }
    m.push_back(ch == '1');
  }
  if (count_selected(m) == 0) throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("{}: empty mask", path.string()));
  return m;
}

void stage_select(const Run& run) {
  const RunConfig& c = run.cfg;
  const EncoderParams enc = load_encoder(run, "encoder.ckpt");
  std::vector<double> ty, vy;
  for (auto i : run.ds.split.train) ty.push_back(run.targets[i]);
  for (auto i : run.ds.split.val) vy.push_back(run.targets[i]);
  // The probe sees standardized targets so its MSE is comparable to the sparsity term.
  const double mu = std::accumulate(ty.begin(), ty.end(), 0.0) / static_cast<double>(ty.size());
  double var = 0.0;
  for (double y : ty) var += (y - mu) * (y - mu);
  const double sd = std::max(1e-12, std::sqrt(var / static_cast<double>(ty.size())));
  for (auto& y : ty) y = (y - mu) / sd;
  for (auto& y : vy) y = (y - mu) / sd;
  const RidgeProbe probe(pooled(run, enc, run.ds.split.train), ty, pooled(run, enc, run.ds.split.val), vy,
                         c.real("probe_ridge"), c.real("probe_sparsity"));

  EoResult result;
  if (c.text("optimizer") == "none") {
    result.mask.assign(probe.dim(), true);
    result.fitness = probe(result.mask);
    result.history = {result.fitness};
  } else {
    EoConfig ec;
    ec.particles = c.count("eo_particles");
    ec.iterations = c.count("eo_iterations");
    ec.alpha = c.real("eo_alpha");
    ec.lambda = c.real("eo_lambda");
    ec.delta = parse_eo_delta(c.text("eo_delta"));
    ec.seed = derive_seed(run.seed, kEoStream);
    result = run_eo(probe.dim(), [&](const Mask& m) { return probe(m); }, ec);
  }
  std::string bits;
  for (bool b : result.mask) bits += b ? '1' : '0';
  run.log(fmt::format("select: mask {} fitness {:.6f}", bits, result.fitness));
  write_file(run.at("mask.txt"), fmt::format("{}\n{:.17g}\n", bits, result.fitness));
  write_file(run.at("eo_history.csv"), csv_series("iteration,best_fitness", result.history));
}

TrainConfig train_config(const RunConfig& c, std::uint64_t seed) {
  TrainConfig t;
  t.epochs = c.count("train_epochs");
  t.learning_rate = c.real("train_lr");
  t.encoder_learning_rate = c.real("encoder_lr");
  t.batch_size = c.count("batch_size");
  t.patience = c.count("patience");
  t.standardize_targets = c.flag("standardize_targets");
  t.normalize_features = c.flag("normalize_features");
  t.finetune_encoder = c.flag("finetune_encoder");
  t.bias_only = c.flag("bias_only");
  t.activation = parse_head_activation(c.text("head_activation"));
  t.clip_norm = c.real("train_clip");
  t.seed = derive_seed(seed, kTrainStream);
  return t;
}

void stage_train(const Run& run) {
  const EncoderParams enc = load_encoder(run, "encoder.ckpt");
  const Mask mask = read_mask(run.at("mask.txt"));
  if (mask.size() != run.encoder_config.feature_channels()) {
    throw FormatError(FormatError::Kind::kMalformedRecord,
                      fmt::format("mask has {} entries for {} features", mask.size(), run.encoder_config.feature_channels()));
  }
  const TrainResult r = train_final(enc, run.encoder_config, run.sequences, run.targets, run.ds.split.train,
                                    run.ds.split.val, mask_channels(mask), train_config(run.cfg, run.seed));
  const YieldModel& m = r.model;
  run.log(fmt::format("train: best epoch {} of {}, val mse {:.4f}", r.best_epoch, r.curve.size() - 1,
                      r.curve[r.best_epoch].val_mse));
  std::vector<NamedTensor> head;
  append_params(head, "head", m.head);
  const std::size_t c = m.channels.size();
  std::vector<double> channels(m.channels.begin(), m.channels.end());
  head.push_back({"model.channels", Tensor({c}, channels)});
  head.push_back({"model.feature_shift", Tensor({c}, m.feature_shift)});
  head.push_back({"model.feature_scale", Tensor({c}, m.feature_scale)});
  head.push_back({"model.target", Tensor({2}, {m.target_mean, m.target_scale})});
  save_checkpoint(run.at("head.ckpt"), head);
  std::vector<NamedTensor> enc_ck;
  append_params(enc_ck, "encoder", m.encoder);
  save_checkpoint(run.at("encoder_final.ckpt"), enc_ck);
  std::string curve = "epoch,train_mse,val_mse\n";
  for (const auto& e : r.curve) curve += fmt::format("{},{:.17g},{:.17g}\n", e.epoch, e.train_mse, e.val_mse);
  write_file(run.at("train_curve.csv"), curve);
}

YieldModel load_model(const Run& run) {
  YieldModel m;
  m.encoder_config = run.encoder_config;
  m.encoder = load_encoder(run, "encoder_final.ckpt");
  m.activation = parse_head_activation(run.cfg.text("head_activation"));
  const auto tensors = load_checkpoint(run.at("head.ckpt"));
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const auto& t : tensors) {
      if (t.name == name) return t.tensor;
    }
    throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("head checkpoint lacks '{}'", name));
  };
  const Tensor& ch = find("model.channels");
  for (double v : ch.data()) m.channels.push_back(static_cast<std::size_t>(v));
  m.feature_shift = find("model.feature_shift").values();
  m.feature_scale = find("model.feature_scale").values();
  const Tensor& target = find("model.target");
  m.target_mean = target[0];
  m.target_scale = target[1];
  m.head = init_head(m.channels.size(), 0);
  load_params(tensors, "head", m.head);
  return m;
}

EvalReport stage_evaluate(const Run& run) {
  const YieldModel model = load_model(run);
  const auto& test = run.ds.split.test;
  std::vector<double> y, pred, baseline;
  std::vector<std::string> groups;
  std::vector<std::size_t> ids;
  double train_mean = 0.0;
  for (auto i : run.ds.split.train) train_mean += run.targets[i];
  train_mean /= static_cast<double>(run.ds.split.train.size());
  std::string rows = "plot_id,season,y,y_pred\n";
  for (auto i : test) {
    const auto& s = run.ds.samples[i];
    const double p = model.predict(run.sequences[i]);
    if (!std::isfinite(p)) throw NumericalError(fmt::format("non-finite prediction for plot {}", s.plot_id));
    y.push_back(s.y);
    pred.push_back(p);
    baseline.push_back(train_mean);
    groups.push_back(s.season_tag);
    ids.push_back(static_cast<std::size_t>(s.plot_id));
    rows += fmt::format("{},{},{:.17g},{:.17g}\n", s.plot_id, s.season_tag, s.y, p);
  }
  const bool percent = run.cfg.flag("percent");
  EvalReport report = evaluate_predictions(y, pred, groups, ids);
  report.label = run.cfg.text("label");
  EvalReport base = evaluate_predictions(y, baseline, groups, ids);
  base.label = "baseline(train-mean)";
  write_report(report, run.req.out, percent);
  write_file(run.at("baseline.kv"), report_kv(base, percent));
  write_file(run.at("predictions.csv"), rows);
  run.log(fmt::format("evaluate: mape {:.4f} (baseline {:.4f})", report.overall.mape, base.overall.mape));
  return report;
}

std::string format_metric(double v) { return fmt::format("{:.4f}", v); }

}  // namespace

std::string_view to_string(Stage stage) {
  for (const auto& [s, n] : kStages) {
    if (s == stage) return n;
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (const auto& [s, n] : kStages) {
    if (n == name) return s;
  }
  throw InvalidArgument(fmt::format("unknown stage '{}' (pretrain|select|train|evaluate)", name));
}

void validate_run_config(const RunConfig& c) {
  validate(ssa_config(c));
  check_optimizer(c.text("optimizer"));
  check_augmenter(c.text("augmenter"));
  parse_eo_delta(c.text("eo_delta"));
  parse_head_activation(c.text("head_activation"));
  parse_schedule(c.text("schedule"));
  if (c.count("kernel") % 2 == 0) throw InvalidArgument("kernel must be odd");
  if (c.count("aug_depth") > c.count("diffusion_steps")) throw InvalidArgument("aug_depth exceeds diffusion_steps");
  if (c.count("view_window") < c.count("window") + 1) throw InvalidArgument("view_window must exceed window");
}

std::optional<EvalReport> run_pipeline(const PipelineRequest& req) {
  validate_run_config(req.config);
  if (req.out.empty()) throw InvalidArgument("pipeline needs an output directory");
  std::error_code ec;
  fs::create_directories(req.out, ec);
  if (ec) throw FormatError(FormatError::Kind::kIo, fmt::format("cannot create {}: {}", req.out.string(), ec.message()));

  RunConfig resolved = req.config;
  resolved.set("data", req.data.string());
  const fs::path snapshot = req.out / "config.txt";
  const std::string text = resolved.snapshot();
  if (req.stage && *req.stage != Stage::kPretrain && fs::exists(snapshot) && read_file(snapshot) != text) {
    throw InvalidArgument(fmt::format("{} was produced with a different configuration", req.out.string()));
  }
  write_file(snapshot, text);

  const RunConfig& c = resolved;
  const std::uint64_t seed = c.u64("seed");
  Dataset ds = split_dataset(load_dataset(req.data), seed);
  if (ds.T < c.count("view_window")) {
    throw InvalidArgument(fmt::format("dataset has {} steps, view_window needs {}", ds.T, c.count("view_window")));
  }
  Run run{req,
          c,
          ds,
          prepare_sequences(ds),
          {},
          {},
          seed,
          encoder_config(c, ds),
          NoiseSchedule::make(parse_schedule(c.text("schedule")), c.count("diffusion_steps"), c.real("beta_start"),
                              c.real("beta_end"))};
  for (const auto& s : run.ds.samples) {
    run.plot_ids.push_back(s.plot_id);
    run.targets.push_back(s.y);
  }

  std::optional<EvalReport> report;
  auto wanted = [&](Stage s) { return !req.stage || *req.stage == s; };
  if (wanted(Stage::kPretrain)) stage_pretrain(run);
  if (wanted(Stage::kSelect)) {
    run.require({"encoder.ckpt", "denoiser.ckpt"}, Stage::kSelect);
    stage_select(run);
  }
  if (wanted(Stage::kTrain)) {
    run.require({"encoder.ckpt", "denoiser.ckpt", "mask.txt"}, Stage::kTrain);
    stage_train(run);
  }
  if (wanted(Stage::kEvaluate)) {
    run.require({"mask.txt", "head.ckpt", "encoder_final.ckpt"}, Stage::kEvaluate);
    report = stage_evaluate(run);
  }
  return report;
}

Comparison merge_reports(std::span<const fs::path> run_dirs) {
  Comparison table;
  std::optional<ComparisonRow> baseline;
  for (const auto& dir : run_dirs) {
    try {
      const EvalReport r = read_report_kv(dir / "report.kv");
      table.rows.push_back({r.label.empty() ? dir.filename().string() : r.label, r.overall});
      if (!baseline) {
        const EvalReport b = read_report_kv(dir / "baseline.kv");
        baseline = ComparisonRow{b.label.empty() ? "baseline(train-mean)" : b.label, b.overall};
      }
    } catch (const Error& e) {
      table.skipped.push_back(fmt::format("{}: {}", dir.string(), e.what()));
    }
  }
  if (baseline) table.rows.push_back(*baseline);
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.metrics.mape < b.metrics.mape; });
  return table;
}

std::string format_comparison(const Comparison& table, bool percent) {
  const double k = percent ? 100.0 : 1.0;
  std::string out = "model\tmape\trmsle\tsmape\tdelta_mape\tdelta_rmsle\tdelta_smape\tn\n";
  if (table.rows.empty()) return out;
  const MetricSet& best = table.rows.front().metrics;
  for (const auto& r : table.rows) {
    const MetricSet& m = r.metrics;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.model, format_metric(m.mape * k), format_metric(m.rmsle),
                       format_metric(m.smape * k), format_metric((m.mape - best.mape) * k),
                       format_metric(m.rmsle - best.rmsle), format_metric((m.smape - best.smape) * k), m.n);
  }
  return out;
}

}  // namespace mtms

// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "mtms/binary_io.hpp"
#include "mtms/config.hpp"
#include "mtms/dataset.hpp"
#include "mtms/error.hpp"
#include "mtms/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kNumerical = 4;

struct SynthArgs {
  std::string source;
  std::size_t plots = 0;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::size_t T = 6, H = 8, W = 8;
};

struct PipelineArgs {
  std::string data;
  std::string out;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string stage;
  bool percent = false;
  std::string attention, conv, optimizer, label;
  std::vector<std::string> overrides;
  bool quiet = false;
};

struct ReportArgs {
  std::vector<std::string> dirs;
  std::string out;
  bool percent = false;
};

int cmd_synth(const SynthArgs& a) {
  const auto bands = mtms::BandSpec::for_source(mtms::parse_source(a.source));
  const mtms::Dataset ds = mtms::split_dataset(mtms::generate_dataset(bands, a.plots, a.T, a.H, a.W, a.seed), a.seed);
  fs::create_directories(a.out);
  const fs::path path = fs::path(a.out) / "dataset.mtms";
  mtms::save_dataset(ds, path);
  fmt::print("wrote {} ({} plots, C={}, split {}/{}/{})\n", path.string(), ds.samples.size(), bands.channels(),
             ds.split.train.size(), ds.split.val.size(), ds.split.test.size());
  return kOk;
}

int cmd_pipeline(const PipelineArgs& a) {
  mtms::PipelineRequest req;
  req.data = a.data;
  req.out = a.out;
  if (!a.config.empty()) req.config = mtms::RunConfig::from_file(a.config);
  if (a.seed) req.config.set("seed", std::to_string(*a.seed));
  if (a.percent) req.config.set("percent", "true");
  if (!a.attention.empty()) req.config.set("attention", a.attention);
  if (!a.conv.empty()) req.config.set("conv", a.conv);
  if (!a.optimizer.empty()) req.config.set("optimizer", a.optimizer);
  if (!a.label.empty()) req.config.set("label", a.label);
  for (const auto& o : a.overrides) req.config.apply(o);
  if (!a.stage.empty()) req.stage = mtms::parse_stage(a.stage);
  if (!a.quiet) req.log = [](std::string_view msg) { fmt::print(stderr, "{}\n", msg); };
  const auto report = mtms::run_pipeline(req);
  if (report) {
    fmt::print("mape={:.6f} rmsle={:.6f} smape={:.6f} n={}\n", report->overall.mape, report->overall.rmsle,
               report->overall.smape, report->overall.n);
  }
  return kOk;
}

int cmd_report(const ReportArgs& a) {
  std::vector<fs::path> dirs(a.dirs.begin(), a.dirs.end());
  const mtms::Comparison table = mtms::merge_reports(dirs);
  for (const auto& s : table.skipped) fmt::print(stderr, "warning: skipped {}\n", s);
  const std::size_t merged = dirs.size() - table.skipped.size();
  fmt::print(stderr, "merged {} run(s), skipped {} malformed\n", merged, table.skipped.size());
  if (merged == 0) {
    fmt::print(stderr, "error: no readable report among {} run directories\n", dirs.size());
    return kData;
  }
  const std::string text = mtms::format_comparison(table, a.percent);
  if (a.out.empty()) {
    fmt::print("{}", text);
  } else {
    mtms::write_file(a.out, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MTMS-YieldNet desk-scale crop-yield pipeline"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-spectral dataset");
  synth->add_option("--source", sa.source, "Sensor layout: S1, S2 or L8")->required();
  synth->add_option("--plots", sa.plots, "Number of plots (>= 10)")->required();
  synth->add_option("--seed", sa.seed, "Generator seed");
  synth->add_option("--out", sa.out, "Directory receiving dataset.mtms");
  synth->add_option("--T", sa.T, "Time steps");
  synth->add_option("--H", sa.H, "Height");
  synth->add_option("--W", sa.W, "Width");

  PipelineArgs pa;
  auto* pipe = app.add_subcommand("pipeline", "Run pretrain -> select -> train -> evaluate");
  pipe->add_option("--data", pa.data, "Dataset file")->required();
  pipe->add_option("--out", pa.out, "Run directory")->required();
  pipe->add_option("--config", pa.config, "key=value configuration file");
  pipe->add_option("--seed", pa.seed, "Run seed");
  pipe->add_option("--stage", pa.stage, "Run only this stage: pretrain, select, train or evaluate");
  pipe->add_flag("--percent", pa.percent, "Report MAPE and SMAPE in percent");
  pipe->add_option("--attention", pa.attention, "se_shuffle, shuffle_se, se_only, shuffle_only, none");
  pipe->add_option("--conv", pa.conv, "conv_condconv, condconv_conv, conv_only, condconv_only, dilated");
  pipe->add_option("--optimizer", pa.optimizer, "eo or none");
  pipe->add_option("--label", pa.label, "Row name used by the report command");
  pipe->add_option("--set", pa.overrides, "Config override key=value (repeatable)");
  pipe->add_flag("--quiet", pa.quiet, "No progress lines");

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Merge run reports into one comparison table");
  report->add_option("dirs", ra.dirs, "Run directories")->required();
  report->add_option("--out", ra.out, "Write the table to this file instead of stdout");
  report->add_flag("--percent", ra.percent, "MAPE and SMAPE in percent");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*pipe) return cmd_pipeline(pa);
    if (*report) return cmd_report(ra);
  } catch (const mtms::InvalidArgument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  } catch (const mtms::NumericalError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kNumerical;
  } catch (const mtms::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kData;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kData;
  }
  return kUsage;
}

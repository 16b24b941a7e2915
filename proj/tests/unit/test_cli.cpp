// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "mtms/binary_io.hpp"
#include "mtms/dataset.hpp"
#include "run_command.hpp"

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const auto r = testing_support::run_command(std::string(MTMS_CLI) + " " + args);
  return {r.code, r.output};
}

fs::path fresh(const std::string& name) {
  const fs::path dir = fs::path(MTMS_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::string kFast =
    " --quiet --set pretrain_epochs=1 --set denoiser_epochs=1 --set eo_iterations=4 --set eo_particles=6"
    " --set train_epochs=3";

// Small dataset shared by the pipeline tests.
const fs::path& dataset() {
  static const fs::path path = [] {
    const fs::path dir = fresh("data");
    const auto r = run("synth --source S1 --plots 20 --seed 3 --T 4 --out " + dir.string());
    EXPECT_EQ(r.code, 0) << r.out;
    return dir / "dataset.mtms";
  }();
  return path;
}

std::string pipeline(const fs::path& out, const std::string& extra = "") {
  return "pipeline --data " + dataset().string() + " --out " + out.string() + " --seed 5" + kFast + extra;
}

TEST(CliSynth, WritesLoadableDatasetWithSourceChannels) {
  const fs::path dir = fresh("synth");
  const auto r = run("synth --source S2 --plots 60 --seed 7 --out " + dir.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const auto ds = mtms::load_dataset(dir / "dataset.mtms");
  EXPECT_EQ(ds.bands.channels(), 12u);
  EXPECT_EQ(ds.samples.size(), 60u);
}

TEST(CliSynth, SameFlagsGiveIdenticalFiles) {
  const fs::path a = fresh("synth_a"), b = fresh("synth_b");
  ASSERT_EQ(run("synth --source L8 --plots 12 --seed 2 --out " + a.string()).code, 0);
  ASSERT_EQ(run("synth --source L8 --plots 12 --seed 2 --out " + b.string()).code, 0);
  EXPECT_EQ(mtms::read_file(a / "dataset.mtms"), mtms::read_file(b / "dataset.mtms"));
}

TEST(CliSynth, UsageErrors) {
  EXPECT_EQ(run("synth --plots 12").code, 2);
  EXPECT_EQ(run("synth --source S9 --plots 12 --out " + fresh("bad_source").string()).code, 2);
  EXPECT_EQ(run("synth --source S1 --plots 3 --out " + fresh("few").string()).code, 2);
  EXPECT_EQ(run("").code, 2);
}

TEST(CliPipeline, FullRunEmitsArtifacts) {
  const fs::path out = fresh("full");
  const auto r = run(pipeline(out));
  ASSERT_EQ(r.code, 0) << r.out;
  for (const char* f : {"config.txt", "denoiser.ckpt", "encoder.ckpt", "denoiser_loss.csv", "pretrain_loss.csv",
                        "separation.kv", "mask.txt", "eo_history.csv", "head.ckpt", "encoder_final.ckpt",
                        "train_curve.csv", "report.tsv", "report.kv", "baseline.kv", "predictions.csv"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_NE(mtms::read_file(out / "config.txt").find("eo_iterations=4\n"), std::string::npos);
}

TEST(CliPipeline, StagedRunMatchesSingleRun) {
  const fs::path once = fresh("once"), staged = fresh("staged");
  ASSERT_EQ(run(pipeline(once)).code, 0);
  for (const char* stage : {"pretrain", "select", "train", "evaluate"}) {
    const auto r = run(pipeline(staged, std::string(" --stage ") + stage));
    ASSERT_EQ(r.code, 0) << stage << ": " << r.out;
  }
  EXPECT_EQ(mtms::read_file(once / "report.kv"), mtms::read_file(staged / "report.kv"));
  EXPECT_EQ(mtms::read_file(once / "report.tsv"), mtms::read_file(staged / "report.tsv"));
}

TEST(CliPipeline, MissingPrerequisiteIsReported) {
  const fs::path out = fresh("prereq");
  const auto r = run(pipeline(out, " --stage train"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("stage prerequisite missing"), std::string::npos) << r.out;
}

TEST(CliPipeline, RejectsUnknownKeysAndReservedModes) {
  EXPECT_EQ(run(pipeline(fresh("unknown"), " --set no_such_key=1")).code, 2);
  EXPECT_EQ(run(pipeline(fresh("cbam"), " --attention cbam")).code, 2);
  EXPECT_EQ(run(pipeline(fresh("gr"), " --optimizer golden_ratio")).code, 2);
  EXPECT_EQ(run("pipeline --data /nonexistent/x.mtms --out " + fresh("nodata").string()).code, 3);
}

TEST(CliReport, TwoRunsPlusBaselineIsThreeRows) {
  const fs::path a = fresh("rep_a"), b = fresh("rep_b");
  ASSERT_EQ(run(pipeline(a, " --label first")).code, 0);
  ASSERT_EQ(run(pipeline(b, " --label second --optimizer none")).code, 0);
  const fs::path table = fresh("rep_out") / "table.tsv";
  const auto r = run("report " + a.string() + " " + b.string() + " --out " + table.string());
  ASSERT_EQ(r.code, 0) << r.out;
  const std::string t = mtms::read_file(table);
  std::size_t lines = 0;
  for (char c : t) lines += c == '\n';
  EXPECT_EQ(lines, 4u) << t;
  EXPECT_EQ(t.rfind("model\tmape\trmsle\tsmape\t", 0), 0u);
  EXPECT_NE(t.find("first\t"), std::string::npos);
  EXPECT_NE(t.find("second\t"), std::string::npos);
  EXPECT_NE(t.find("baseline(train-mean)\t"), std::string::npos);
}

TEST(CliReport, MalformedReportsAreSkippedAndCounted) {
  const fs::path good = fresh("rep_good"), bad = fresh("rep_bad");
  ASSERT_EQ(run(pipeline(good)).code, 0);
  mtms::write_file(bad / "report.kv", "mape=oops\n");
  const auto r = run("report " + good.string() + " " + bad.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("skipped 1 malformed"), std::string::npos) << r.out;
  EXPECT_EQ(run("report " + bad.string()).code, 3);
  EXPECT_EQ(run("report").code, 2);
}

}  // namespace

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtms/config.hpp"
#include "mtms/metrics.hpp"

namespace mtms {

enum class Stage { kPretrain, kSelect, kTrain, kEvaluate };

std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

using LogSink = std::function<void(std::string_view)>;

struct PipelineRequest {
  std::filesystem::path data;
  std::filesystem::path out;
  RunConfig config;
  std::optional<Stage> stage;  // empty = all stages in order
  LogSink log;
};

/// Runs the requested stage (or all) inside `out`. A single stage needs the artifacts of every
/// earlier stage and raises StageError("stage prerequisite missing: ...") otherwise. The resolved
/// configuration is written to out/config.txt; resuming with a different configuration is rejected.
/// Returns the test-split report when the evaluate stage ran.
std::optional<EvalReport> run_pipeline(const PipelineRequest& request);

/// Refuses reserved or unknown enum values before any work starts.
void validate_run_config(const RunConfig& config);

struct ComparisonRow {
  std::string model;
  MetricSet metrics;
};

struct Comparison {
  std::vector<ComparisonRow> rows;  // ascending MAPE
  std::vector<std::string> skipped;  // one message per malformed run directory
};

/// One row per readable run directory plus the mean-predictor baseline of the first readable run.
Comparison merge_reports(std::span<const std::filesystem::path> run_dirs);

/// Tab-separated table: model, the three metrics, and their distance to the best row.
std::string format_comparison(const Comparison& table, bool percent = false);

}  // namespace mtms

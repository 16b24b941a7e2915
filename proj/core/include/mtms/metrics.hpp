// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mtms {

/// Fractional conventions (no x100). Errors name the offending index.
double mape(std::span<const double> y, std::span<const double> y_pred);
double rmsle(std::span<const double> y, std::span<const double> y_pred);
double smape(std::span<const double> y, std::span<const double> y_pred);

struct MetricSet {
  double mape = 0.0;
  double rmsle = 0.0;
  double smape = 0.0;
  std::size_t n = 0;

  friend bool operator==(const MetricSet&, const MetricSet&) = default;
};

MetricSet compute_metrics(std::span<const double> y, std::span<const double> y_pred);

struct EvalReport {
  MetricSet overall;
  std::map<std::string, MetricSet> groups;  // keyed by season tag
  std::string label;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Overall and per-group metrics. `sample_ids` (optional, same length) replace positions in domain
/// error messages.
EvalReport evaluate_predictions(std::span<const double> y, std::span<const double> y_pred,
                                std::span<const std::string> groups, std::span<const std::size_t> sample_ids = {});

/// report.tsv: "metric\tvalue\tgroup\tn" rows, group "all" first. report.kv: key=value lines.
/// `percent` multiplies MAPE and SMAPE by 100 in both files.
void write_report(const EvalReport& report, const std::filesystem::path& dir, bool percent = false);
std::string report_kv(const EvalReport& report, bool percent = false);

/// Parses a report.kv / baseline.kv file written by report_kv. Malformed content -> FormatError.
EvalReport read_report_kv(const std::filesystem::path& path);

}  // namespace mtms

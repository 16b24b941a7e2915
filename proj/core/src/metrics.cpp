// SPDX-License-Identifier: Apache-2.0
#include "mtms/metrics.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "mtms/binary_io.hpp"
#include "mtms/error.hpp"

namespace mtms {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> p, const char* what) {
  if (y.size() != p.size()) throw ShapeError(fmt::format("{}: {} targets vs {} predictions", what, y.size(), p.size()));
  if (y.empty()) throw InvalidArgument(fmt::format("{} needs at least one value", what));
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("report key '{}': bad number '{}'", key, s));
  }
  return v;
}

std::size_t parse_count(const std::string& s, const std::string& key) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("report key '{}': bad count '{}'", key, s));
  }
  return v;
}

}  // namespace

double mape(std::span<const double> y, std::span<const double> y_pred) {
  check_lengths(y, y_pred, "mape");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] == 0.0) throw DomainError(fmt::format("mape: target {} is zero", i));
    s += std::abs((y[i] - y_pred[i]) / y[i]);
  }
  return s / static_cast<double>(y.size());
}

double rmsle(std::span<const double> y, std::span<const double> y_pred) {
  check_lengths(y, y_pred, "rmsle");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > -1.0) || !(y_pred[i] > -1.0)) {
      throw DomainError(fmt::format("rmsle: value {} is <= -1 (target {}, prediction {})", i, y[i], y_pred[i]));
    }
    const double d = std::log1p(y[i]) - std::log1p(y_pred[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(y.size()));
}

double smape(std::span<const double> y, std::span<const double> y_pred) {
  check_lengths(y, y_pred, "smape");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double den = (std::abs(y[i]) + std::abs(y_pred[i])) / 2.0;
    if (den == 0.0) throw DomainError(fmt::format("smape: target and prediction {} are both zero", i));
    s += std::abs(y[i] - y_pred[i]) / den;
  }
  return s / static_cast<double>(y.size());
}

MetricSet compute_metrics(std::span<const double> y, std::span<const double> y_pred) {
  return {mape(y, y_pred), rmsle(y, y_pred), smape(y, y_pred), y.size()};
}

EvalReport evaluate_predictions(std::span<const double> y, std::span<const double> y_pred,
                                std::span<const std::string> groups, std::span<const std::size_t> sample_ids) {
  if (groups.size() != y.size()) throw ShapeError("evaluate: group tags and targets differ in count");
  if (!sample_ids.empty() && sample_ids.size() != y.size()) throw ShapeError("evaluate: sample ids and targets differ");
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t id = sample_ids.empty() ? i : sample_ids[i];
    if (y[i] == 0.0) throw DomainError(fmt::format("sample {}: zero target breaks MAPE", id));
    if (!(y[i] > -1.0) || !(y_pred[i] > -1.0)) {
      throw DomainError(fmt::format("sample {}: value <= -1 breaks RMSLE (target {}, prediction {})", id, y[i], y_pred[i]));
    }
  }
  EvalReport r;
  r.overall = compute_metrics(y, y_pred);
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < groups.size(); ++i) members[groups[i]].push_back(i);
  for (const auto& [tag, idx] : members) {
    std::vector<double> gy, gp;
    for (auto i : idx) {
      gy.push_back(y[i]);
      gp.push_back(y_pred[i]);
    }
    r.groups[tag] = compute_metrics(gy, gp);
  }
  return r;
}

std::string report_kv(const EvalReport& report, bool percent) {
  const double k = percent ? 100.0 : 1.0;
  std::string out;
  if (!report.label.empty()) out += fmt::format("label={}\n", report.label);
  out += fmt::format("units={}\n", percent ? "percent" : "fraction");
  auto emit = [&](const std::string& prefix, const MetricSet& m) {
    out += fmt::format("{}mape={}\n{}rmsle={}\n{}smape={}\n{}n={}\n", prefix, num(m.mape * k), prefix, num(m.rmsle),
                       prefix, num(m.smape * k), prefix, m.n);
  };
  emit("", report.overall);
  for (const auto& [tag, m] : report.groups) emit("group." + tag + ".", m);
  return out;
}

void write_report(const EvalReport& report, const std::filesystem::path& dir, bool percent) {
  const double k = percent ? 100.0 : 1.0;
  std::string tsv = "metric\tvalue\tgroup\tn\n";
  auto rows = [&](const std::string& group, const MetricSet& m) {
    tsv += fmt::format("mape\t{}\t{}\t{}\n", num(m.mape * k), group, m.n);
    tsv += fmt::format("rmsle\t{}\t{}\t{}\n", num(m.rmsle), group, m.n);
    tsv += fmt::format("smape\t{}\t{}\t{}\n", num(m.smape * k), group, m.n);
  };
  rows("all", report.overall);
  for (const auto& [tag, m] : report.groups) rows(tag, m);
  write_file(dir / "report.tsv", tsv);
  write_file(dir / "report.kv", report_kv(report, percent));
}

EvalReport read_report_kv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw FormatError(FormatError::Kind::kMalformedRecord,
                        fmt::format("{}:{}: expected key=value", path.string(), lineno));
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  EvalReport r;
  auto take = [&](const std::string& prefix, MetricSet& m) {
    for (const char* key : {"mape", "rmsle", "smape", "n"}) {
      if (!kv.contains(prefix + key)) {
        throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("{}: missing key '{}{}'", path.string(), prefix, key));
      }
    }
    m.mape = parse_double(kv.at(prefix + "mape"), prefix + "mape");
    m.rmsle = parse_double(kv.at(prefix + "rmsle"), prefix + "rmsle");
    m.smape = parse_double(kv.at(prefix + "smape"), prefix + "smape");
    m.n = parse_count(kv.at(prefix + "n"), prefix + "n");
  };
  take("", r.overall);
  for (const auto& [key, value] : kv) {
    if (key.starts_with("group.") && key.ends_with(".mape")) {
      const std::string tag = key.substr(6, key.size() - 6 - 5);
      take("group." + tag + ".", r.groups[tag]);
    } else if (key == "label") {
      r.label = value;
    }
  }
  if (kv.contains("units") && kv.at("units") == "percent") {
    r.overall.mape /= 100.0;
    r.overall.smape /= 100.0;
    for (auto& [tag, m] : r.groups) {
      m.mape /= 100.0;
      m.smape /= 100.0;
    }
  }
  return r;
}

}  // namespace mtms

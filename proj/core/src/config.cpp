// SPDX-License-Identifier: Apache-2.0
#include "mtms/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "mtms/binary_io.hpp"
#include "mtms/error.hpp"

namespace mtms {

namespace {

enum class Kind { kReal, kCount, kU64, kFlag, kText };

struct KeySpec {
  std::string_view key;
  Kind kind;
  std::string_view fallback;
};

constexpr std::array kKeys = {
    KeySpec{"seed", Kind::kU64, "0"},
    KeySpec{"label", Kind::kText, ""},
    KeySpec{"data", Kind::kText, ""},
    KeySpec{"percent", Kind::kFlag, "false"},
    // encoder
    KeySpec{"hidden", Kind::kCount, "8"},
    KeySpec{"kernel", Kind::kCount, "3"},
    KeySpec{"embed_dim", Kind::kCount, "16"},
    KeySpec{"ssa_out", Kind::kCount, "8"},
    KeySpec{"reduction", Kind::kCount, "2"},
    KeySpec{"groups", Kind::kCount, "2"},
    KeySpec{"experts", Kind::kCount, "2"},
    KeySpec{"window", Kind::kCount, "2"},
    KeySpec{"attention", Kind::kText, "se_shuffle"},
    KeySpec{"conv", Kind::kText, "conv_condconv"},
    // augmentation
    KeySpec{"augmenter", Kind::kText, "diffusion"},
    KeySpec{"schedule", Kind::kText, "linear"},
    KeySpec{"diffusion_steps", Kind::kCount, "10"},
    KeySpec{"beta_start", Kind::kReal, "0.95"},
    KeySpec{"beta_end", Kind::kReal, "0.3"},
    KeySpec{"denoiser_hidden", Kind::kCount, "8"},
    KeySpec{"denoiser_epochs", Kind::kCount, "2"},
    KeySpec{"denoiser_lr", Kind::kReal, "0.001"},
    KeySpec{"sss_lambda", Kind::kReal, "0.1"},
    KeySpec{"aug_depth", Kind::kCount, "1"},
    KeySpec{"aug_sigma", Kind::kReal, "0.1"},
    // contrastive pre-training
    KeySpec{"tau", Kind::kReal, "0.5"},
    KeySpec{"pretrain_lr", Kind::kReal, "0.01"},
    KeySpec{"pretrain_epochs", Kind::kCount, "20"},
    KeySpec{"plots_per_batch", Kind::kCount, "4"},
    KeySpec{"timestamps_per_plot", Kind::kCount, "2"},
    KeySpec{"view_window", Kind::kCount, "4"},
    KeySpec{"pretrain_clip", Kind::kReal, "1"},
    // feature selection
    KeySpec{"optimizer", Kind::kText, "eo"},
    KeySpec{"eo_particles", Kind::kCount, "20"},
    KeySpec{"eo_iterations", Kind::kCount, "100"},
    KeySpec{"eo_alpha", Kind::kReal, "0.5"},
    KeySpec{"eo_lambda", Kind::kReal, "0.5"},
    KeySpec{"eo_delta", Kind::kText, "signed"},
    KeySpec{"probe_ridge", Kind::kReal, "0.01"},
    KeySpec{"probe_sparsity", Kind::kReal, "0.01"},
    // final training
    KeySpec{"train_epochs", Kind::kCount, "100"},
    KeySpec{"train_lr", Kind::kReal, "0.01"},
    KeySpec{"encoder_lr", Kind::kReal, "0.001"},
    KeySpec{"batch_size", Kind::kCount, "8"},
    KeySpec{"patience", Kind::kCount, "5"},
    KeySpec{"standardize_targets", Kind::kFlag, "true"},
    KeySpec{"normalize_features", Kind::kFlag, "true"},
    KeySpec{"finetune_encoder", Kind::kFlag, "false"},
    KeySpec{"bias_only", Kind::kFlag, "false"},
    KeySpec{"head_activation", Kind::kText, "identity"},
    KeySpec{"train_clip", Kind::kReal, "1"},
};

const KeySpec& spec_of(std::string_view key) {
  for (const auto& k : kKeys) {
    if (k.key == key) return k;
  }
  throw InvalidArgument(fmt::format("unknown config key '{}'", key));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

void check_value(const KeySpec& spec, std::string_view value) {
  bool ok = true;
  switch (spec.kind) {
    case Kind::kReal: {
      double v = 0.0;
      ok = parse_number(value, v) && std::isfinite(v);
      break;
    }
    case Kind::kCount: {
      std::size_t v = 0;
      ok = parse_number(value, v);
      break;
    }
    case Kind::kU64: {
      std::uint64_t v = 0;
      ok = parse_number(value, v);
      break;
    }
    case Kind::kFlag:
      ok = value == "true" || value == "false";
      break;
    case Kind::kText:
      ok = value.find('\n') == std::string_view::npos;
      break;
  }
  if (!ok) throw InvalidArgument(fmt::format("config key '{}': invalid value '{}'", spec.key, value));
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_.emplace(std::string(k.key), std::string(k.fallback));
}

RunConfig RunConfig::from_text(std::string_view text, std::string_view origin) {
  RunConfig cfg;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      cfg.apply(line);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(fmt::format("{}:{}: {}", origin, lineno, e.what()));
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  return from_text(read_file(path), path.string());
}

void RunConfig::set(std::string_view key, std::string_view value) {
  const KeySpec& spec = spec_of(key);
  check_value(spec, value);
  values_.find(key)->second = std::string(value);
}

void RunConfig::apply(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw InvalidArgument(fmt::format("expected key=value, got '{}'", assignment));
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool RunConfig::contains(std::string_view key) const { return values_.find(key) != values_.end(); }

const std::string& RunConfig::raw(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument(fmt::format("unknown config key '{}'", key));
  return it->second;
}

double RunConfig::real(std::string_view key) const {
  double v = 0.0;
  parse_number(std::string_view(raw(key)), v);
  return v;
}

std::size_t RunConfig::count(std::string_view key) const {
  std::size_t v = 0;
  parse_number(std::string_view(raw(key)), v);
  return v;
}

std::uint64_t RunConfig::u64(std::string_view key) const {
  std::uint64_t v = 0;
  parse_number(std::string_view(raw(key)), v);
  return v;
}

bool RunConfig::flag(std::string_view key) const { return raw(key) == "true"; }

std::string RunConfig::snapshot() const {
  std::string out;
  for (const auto& [k, v] : values_) out += fmt::format("{}={}\n", k, v);
  return out;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& k : kKeys) out.emplace_back(k.key);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace mtms

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mtms {

/// Flat key=value run configuration. Every key has a default; unknown keys and unparsable values
/// are rejected when set.
class RunConfig {
 public:
  RunConfig();

  /// Lines of key=value; '#' starts a comment; surrounding blanks are trimmed.
  static RunConfig from_text(std::string_view text, std::string_view origin = "<config>");
  static RunConfig from_file(const std::filesystem::path& path);

  void set(std::string_view key, std::string_view value);
  /// "key=value" override.
  void apply(std::string_view assignment);

  bool contains(std::string_view key) const;
  const std::string& raw(std::string_view key) const;
  std::string text(std::string_view key) const { return raw(key); }
  double real(std::string_view key) const;
  std::size_t count(std::string_view key) const;
  std::uint64_t u64(std::string_view key) const;
  bool flag(std::string_view key) const;

  /// Every key in sorted order, one "key=value" per line.
  std::string snapshot() const;
  static std::vector<std::string> keys();

  friend bool operator==(const RunConfig&, const RunConfig&) = default;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace mtms

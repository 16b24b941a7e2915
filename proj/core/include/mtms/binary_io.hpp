// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtms/tensor.hpp"

namespace mtms {

/// 64-bit FNV-1a.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  std::uint64_t digest() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

void append_u64_le(std::string& out, std::uint64_t v);
void append_f64_le(std::string& out, double v);
std::uint64_t read_u64_le(std::string_view bytes);
double read_f64_le(std::string_view bytes);

/// Whole-file helpers; failures raise FormatError(kIo).
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

/// Sequential reader over an in-memory file image used by the dataset and checkpoint parsers.
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  /// Next '\n'-terminated line without the terminator. Missing newline -> truncated payload.
  std::string_view line(std::string_view what);
  /// Next n bytes.
  std::string_view take(std::size_t n, std::string_view what);
  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  std::string_view consumed() const noexcept { return bytes_.substr(0, pos_); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Checkpoint layout:
///   "MTMSCK v1 <count>\n", then per tensor "<name> <rank> <d0> ... <dr-1>\n" followed by its values
///   as little-endian doubles, then the FNV-1a checksum of all preceding bytes (little-endian u64).
void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

/// Collects a parameter struct's tensors under `prefix.`.
template <class P>
void append_params(std::vector<NamedTensor>& out, std::string_view prefix, const P& params) {
  P::visit([&](std::string_view name, const Tensor& t) { out.push_back({std::string(prefix) + "." + std::string(name), t}); },
           params);
}

/// Fills a parameter struct from checkpoint entries under `prefix.`; shapes must match the
/// tensors already in `params`.
void assign_named(std::span<const NamedTensor> tensors, const std::string& key, Tensor& target);

template <class P>
void load_params(std::span<const NamedTensor> tensors, std::string_view prefix, P& params) {
  P::visit([&](std::string_view name, Tensor& t) { assign_named(tensors, std::string(prefix) + "." + std::string(name), t); },
           params);
}

}  // namespace mtms

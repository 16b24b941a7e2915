// SPDX-License-Identifier: Apache-2.0
#include "mtms/binary_io.hpp"

#include <bit>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "mtms/error.hpp"

namespace mtms {

void Fnv1a::update(std::string_view bytes) {
  for (unsigned char c : bytes) {
    hash_ ^= c;
    hash_ *= 0x100000001b3ULL;
  }
}

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void append_f64_le(std::string& out, double v) { append_u64_le(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t read_u64_le(std::string_view bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i])) << (8 * i);
  return v;
}

double read_f64_le(std::string_view bytes) { return std::bit_cast<double>(read_u64_le(bytes)); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, fmt::format("cannot write {}", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, fmt::format("short write to {}", path.string()));
}

std::string_view ByteReader::line(std::string_view what) {
  const auto nl = bytes_.find('\n', pos_);
  if (nl == std::string_view::npos) {
    throw FormatError(FormatError::Kind::kTruncatedPayload, fmt::format("truncated payload: missing end of {}", what));
  }
  auto out = bytes_.substr(pos_, nl - pos_);
  pos_ = nl + 1;
  return out;
}

std::string_view ByteReader::take(std::size_t n, std::string_view what) {
  if (remaining() < n) {
    throw FormatError(FormatError::Kind::kTruncatedPayload,
                      fmt::format("truncated payload: {} needs {} bytes, {} left", what, n, remaining()));
  }
  auto out = bytes_.substr(pos_, n);
  pos_ += n;
  return out;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::size_t parse_count(std::string_view s, FormatError::Kind kind, std::string_view what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw FormatError(kind, fmt::format("{}: '{}' is not a non-negative integer", what, s));
  }
  return v;
}

constexpr std::string_view kCheckpointMagic = "MTMSCK";

}  // namespace

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  std::string out = fmt::format("{} v1 {}\n", kCheckpointMagic, tensors.size());
  for (const auto& nt : tensors) {
    if (nt.name.empty() || nt.name.find_first_of(" \n") != std::string::npos) {
      throw InvalidArgument(fmt::format("checkpoint tensor name '{}' must be non-empty without spaces", nt.name));
    }
    out += fmt::format("{} {}", nt.name, nt.tensor.rank());
    for (auto d : nt.tensor.shape()) out += fmt::format(" {}", d);
    out += '\n';
    for (double v : nt.tensor.data()) append_f64_le(out, v);
  }
  Fnv1a h;
  h.update(out);
  append_u64_le(out, h.digest());
  write_file(path, out);
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes);
  const auto header = split_ws(r.line("checkpoint header"));
  if (header.size() != 3 || header[0] != kCheckpointMagic || header[1] != "v1") {
    throw FormatError(FormatError::Kind::kMalformedHeader, fmt::format("malformed header in {}", path.string()));
  }
  const std::size_t count = parse_count(header[2], FormatError::Kind::kMalformedHeader, "tensor count");
  std::vector<NamedTensor> out;
  for (std::size_t k = 0; k < count; ++k) {
    const auto fields = split_ws(r.line("tensor record"));
    if (fields.size() < 2) throw FormatError(FormatError::Kind::kMalformedRecord, "malformed tensor record");
    const std::size_t rank = parse_count(fields[1], FormatError::Kind::kMalformedRecord, "tensor rank");
    if (rank == 0 || fields.size() != rank + 2) throw FormatError(FormatError::Kind::kMalformedRecord, "malformed tensor record");
    Shape shape;
    for (std::size_t i = 0; i < rank; ++i) {
      shape.push_back(parse_count(fields[i + 2], FormatError::Kind::kMalformedRecord, "tensor extent"));
      if (shape.back() == 0) throw FormatError(FormatError::Kind::kMalformedRecord, "zero tensor extent");
    }
    const std::size_t n = element_count(shape);
    const auto payload = r.take(8 * n, "tensor values");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f64_le(payload.substr(8 * i, 8));
    out.push_back({std::string(fields[0]), Tensor(std::move(shape), std::move(data))});
  }
  Fnv1a h;
  h.update(r.consumed());
  const auto stored = r.take(8, "checksum");
  if (r.remaining() != 0) throw FormatError(FormatError::Kind::kMalformedRecord, "trailing bytes after checksum");
  if (read_u64_le(stored) != h.digest()) {
    throw FormatError(FormatError::Kind::kChecksumMismatch, fmt::format("checksum mismatch in {}", path.string()));
  }
  return out;
}

void assign_named(std::span<const NamedTensor> tensors, const std::string& key, Tensor& target) {
  for (const auto& nt : tensors) {
    if (nt.name != key) continue;
    if (nt.tensor.shape() != target.shape()) {
      throw FormatError(FormatError::Kind::kMalformedRecord,
                        fmt::format("checkpoint tensor {} has shape {}, expected {}", key,
                                    to_string(nt.tensor.shape()), to_string(target.shape())));
    }
    target = nt.tensor;
    return;
  }
  throw FormatError(FormatError::Kind::kMalformedRecord, fmt::format("checkpoint lacks tensor {}", key));
}

}  // namespace mtms

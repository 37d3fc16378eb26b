// Copyright 2026 The RISExt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>

#include "risext/errors.hpp"

namespace risext::io {

static_assert(std::endian::native == std::endian::little,
              "payloads are written as raw little-endian doubles");

inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::uint64_t read_u64(std::istream& is, const char* what) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw FormatError(std::string(what) + ": truncated header");
  return v;
}

inline void write_doubles(std::ostream& os, std::span<const double> v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::istream& is, std::span<double> v, const char* what) {
  if (!is.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double))))
    throw FormatError(std::string(what) + ": truncated payload");
}

/// Header shared by dataset and checkpoint files: 8-byte magic, u64 manifest
/// length, UTF-8 manifest text.
inline void write_header(std::ostream& os, std::string_view magic, const std::string& manifest) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  write_u64(os, manifest.size());
  os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
}

/// Returns the manifest text; leaves the stream at the first payload byte.
inline std::string read_header(std::istream& is, std::string_view magic, const char* what) {
  char buf[8] = {};
  if (!is.read(buf, 8)) throw FormatError(std::string(what) + ": file too short for magic");
  if (std::string_view(buf, 8) != magic)
    throw FormatError(std::string(what) + ": bad magic (expected " + std::string(magic) + ")");
  const std::uint64_t len = read_u64(is, what);
  if (len > (1ULL << 31)) throw FormatError(std::string(what) + ": implausible manifest length");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len)))
    throw FormatError(std::string(what) + ": truncated manifest");
  return text;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "' for reading");
  return is;
}

inline std::uint64_t remaining_bytes(std::istream& is) {
  const auto here = is.tellg();
  is.seekg(0, std::ios::end);
  const auto end = is.tellg();
  is.seekg(here);
  return static_cast<std::uint64_t>(end - here);
}

}  // namespace risext::io

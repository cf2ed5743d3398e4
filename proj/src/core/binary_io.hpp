// Copyright 2026 The UDSE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace udse {

/// 64-bit FNV-1a.
std::uint64_t Fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);
std::string HexDigest(std::uint64_t hash);

std::vector<std::uint8_t> ReadFileBytes(const std::string& path);
/// Writes to a sibling temporary then renames, so readers never see a
/// partially written file.
void WriteFileAtomic(const std::string& path, std::span<const std::uint8_t> bytes);
std::uint64_t HashFile(const std::string& path);

class ByteWriter {
 public:
  void Bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void U16(std::uint16_t v) { Raw(v); }
  void U32(std::uint32_t v) { Raw(v); }
  void U64(std::uint64_t v) { Raw(v); }
  void I32(std::int32_t v) { Raw(v); }
  void F32(float v) { Raw(v); }
  void F64(double v) { Raw(v); }

  std::vector<std::uint8_t>& data() { return buf_; }
  const std::vector<std::uint8_t>& data() const { return buf_; }
  std::size_t size() const { return buf_.size(); }

 private:
  // Host is assumed little-endian (checked in binary_io.cpp).
  template <typename T>
  void Raw(T v) {
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, &v, sizeof(T));
    buf_.insert(buf_.end(), tmp, tmp + sizeof(T));
  }

  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::string Bytes(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::uint16_t U16() { return Raw<std::uint16_t>(); }
  std::uint32_t U32() { return Raw<std::uint32_t>(); }
  std::uint64_t U64() { return Raw<std::uint64_t>(); }
  std::int32_t I32() { return Raw<std::int32_t>(); }
  float F32() { return Raw<float>(); }
  double F64() { return Raw<double>(); }

  void Skip(std::size_t n) {
    Need(n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(pos_, "unexpected end of data");
    }
  }
  template <typename T>
  T Raw() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace udse

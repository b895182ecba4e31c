/*
 * Copyright 2026 The sfmos Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "sfmos/common.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>

namespace sfmos::binio {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class Writer {
 public:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void f32(double v) {
    float f = static_cast<float>(v);
    raw(&f, 4);
  }
  template <typename M>
  void f32_array(const M& m) {
    // Row-major order.
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f32(m(r, c));
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::string what) : buf_(bytes), what_(std::move(what)) {}
  void raw(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw InputError(what_ + ": truncated file");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    std::uint32_t v;
    raw(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    raw(&v, 8);
    return v;
  }
  double f32() {
    float f;
    raw(&f, 4);
    return f;
  }
  template <typename M>
  void f32_array(M& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f32();
  }
  std::size_t pos() const { return pos_; }
  std::size_t size() const { return buf_.size(); }

 private:
  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

inline std::string raw_sha256(const std::string& bytes) {
  std::string hex = sha256_hex(bytes);
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2)
    out.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

// Splits payload and 32-byte digest, verifying the digest.
inline std::string checked_payload(const std::string& bytes, const std::string& what) {
  if (bytes.size() < 32) throw InputError(what + ": truncated file");
  std::string payload = bytes.substr(0, bytes.size() - 32);
  if (raw_sha256(payload) != bytes.substr(bytes.size() - 32))
    throw InputError(what + ": digest mismatch");
  return payload;
}

}  // namespace sfmos::binio

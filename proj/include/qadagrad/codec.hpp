// Copyright 2026 The qadagrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

/*!
 * \file codec.hpp
 * \brief Sparse ternary gradient messages and their wire format.
 *
 * Wire layout (all little-endian):
 *
 *   offset 0   u32   dim                 framing, not counted in payload_bits
 *   offset 4   f32   scale               32 payload bits
 *   offset 8   bits  indicator[0..dim)   dim payload bits
 *              bits  codes[0..k)         2k payload bits, k = popcount(indicator)
 *
 * The indicator and the codes form one contiguous LSB-first bit stream, so
 * coordinate d lives in bit (d mod 8) of byte 8 + d/8 and code j occupies
 * stream bits dim + 2j and dim + 2j + 1. Only the final byte is padded, with
 * zeros. Codes: 00 zero, 01 +1, 10 -1; 11 is rejected.
 */
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "qadagrad/error.hpp"
#include "qadagrad/quantize.hpp"

namespace qadagrad {

class IndicatorBitmap {
 public:
  IndicatorBitmap() = default;
  explicit IndicatorBitmap(std::size_t dim) : dim_(dim), bytes_((dim + 7) / 8, 0) {}

  static IndicatorBitmap all(std::size_t dim) {
    IndicatorBitmap b(dim);
    for (std::size_t i = 0; i < dim; ++i) b.set(i);
    return b;
  }

  std::size_t dim() const { return dim_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

  bool test(std::size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1u; }
  void set(std::size_t i) { bytes_[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7)); }

  std::size_t popcount() const {
    std::size_t n = 0;
    for (auto b : bytes_) n += std::popcount(b);
    return n;
  }

  /// Ascending list of selected coordinates.
  std::vector<std::size_t> selected() const {
    std::vector<std::size_t> out;
    out.reserve(popcount());
    for (std::size_t i = 0; i < dim_; ++i) {
      if (test(i)) out.push_back(i);
    }
    return out;
  }

  friend bool operator==(const IndicatorBitmap&, const IndicatorBitmap&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::uint8_t> bytes_;
};

inline IndicatorBitmap indicator_or(const IndicatorBitmap& a, const IndicatorBitmap& b) {
  detail::check_same_dim(a.dim(), b.dim(), "indicator_or");
  IndicatorBitmap out(a.dim());
  for (std::size_t i = 0; i < a.dim(); ++i) {
    if (a.test(i) || b.test(i)) out.set(i);
  }
  return out;
}

struct GradientMessage {
  std::uint32_t dim = 0;
  float scale = 0.0f;
  IndicatorBitmap indicator;
  std::size_t code_count = 0;
  std::vector<std::uint8_t> codes;  // packed 2-bit entries, LSB-first

  std::uint8_t code_at(std::size_t j) const { return (codes[j >> 2] >> ((j & 3) * 2)) & 3u; }

  friend bool operator==(const GradientMessage&, const GradientMessage&) = default;
};

inline constexpr std::size_t kFramingBytes = 4;
inline constexpr std::uint8_t kCodeZero = 0b00;
inline constexpr std::uint8_t kCodePlus = 0b01;
inline constexpr std::uint8_t kCodeMinus = 0b10;

/// 32 + d + 2k
inline std::uint64_t payload_bits(std::size_t dim, std::size_t k) { return 32 + dim + 2 * k; }
inline std::uint64_t payload_bits(const GradientMessage& msg) {
  return payload_bits(msg.dim, msg.indicator.popcount());
}
/// Cost of the dense full-precision baseline message.
inline std::uint64_t dense_float_bits(std::size_t dim) { return 32ull * dim; }
/// Cost of a dense ternary message without an indicator.
inline std::uint64_t dense_ternary_bits(std::size_t dim) { return 32 + 2ull * dim; }

inline GradientMessage encode(const TernaryGradient& q, const IndicatorBitmap& indicator) {
  detail::check_same_dim(q.dim(), indicator.dim(), "encode");
  if (q.dim() > UINT32_MAX) throw Error("dimension exceeds wire limit");
  GradientMessage msg;
  msg.dim = static_cast<std::uint32_t>(q.dim());
  msg.scale = static_cast<float>(q.scale);
  msg.indicator = indicator;
  msg.code_count = indicator.popcount();
  msg.codes.assign((msg.code_count + 3) / 4, 0);
  std::size_t j = 0;
  for (std::size_t i = 0; i < q.dim(); ++i) {
    if (!indicator.test(i)) continue;
    std::uint8_t c = q.codes[i] > 0 ? kCodePlus : q.codes[i] < 0 ? kCodeMinus : kCodeZero;
    msg.codes[j >> 2] |= static_cast<std::uint8_t>(c << ((j & 3) * 2));
    ++j;
  }
  return msg;
}

/// Dense TernaryGradient with zero codes off the indicator. The scale is the
/// 32-bit wire value widened back to double.
inline TernaryGradient decode(const GradientMessage& msg) {
  std::size_t k = msg.indicator.popcount();
  if (msg.indicator.dim() != msg.dim || msg.code_count != k || msg.codes.size() < (k + 3) / 4) {
    throw Error("truncated message");
  }
  if (!std::isfinite(msg.scale) || msg.scale < 0.0f) throw Error("corrupt scale");
  TernaryGradient q(msg.dim);
  q.scale = static_cast<double>(msg.scale);
  std::size_t j = 0;
  for (std::size_t i = 0; i < msg.dim; ++i) {
    if (!msg.indicator.test(i)) continue;
    switch (msg.code_at(j++)) {
      case kCodeZero: break;
      case kCodePlus: q.codes[i] = 1; break;
      case kCodeMinus: q.codes[i] = -1; break;
      default: throw Error("corrupt code");
    }
  }
  if (q.scale == 0.0) std::fill(q.codes.begin(), q.codes.end(), 0);
  return q;
}

namespace detail {

class BitWriter {
 public:
  void put(bool bit) {
    if ((bits_ & 7) == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(1u << (bits_ & 7));
    ++bits_;
  }
  void put_bytes(std::span<const std::uint8_t> raw) {
    for (auto b : raw) {
      for (int i = 0; i < 8; ++i) put((b >> i) & 1u);
    }
  }
  std::uint64_t bit_count() const { return bits_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint64_t bits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  bool get() {
    if (pos_ >= bytes_.size() * 8) throw Error("truncated message");
    bool b = (bytes_[pos_ >> 3] >> (pos_ & 7)) & 1u;
    ++pos_;
    return b;
  }
  std::uint64_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::uint64_t pos_ = 0;
};

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32_le(std::span<const std::uint8_t> in) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[i]) << (8 * i);
  return v;
}

}  // namespace detail

struct SerializedMessage {
  std::vector<std::uint8_t> bytes;
  std::uint64_t payload_bit_count = 0;  // bits written after the framing
};

inline SerializedMessage serialize_counted(const GradientMessage& msg) {
  detail::BitWriter payload;
  std::uint8_t scale_bytes[4];
  std::uint32_t scale_bits = std::bit_cast<std::uint32_t>(msg.scale);
  for (int i = 0; i < 4; ++i) scale_bytes[i] = static_cast<std::uint8_t>(scale_bits >> (8 * i));
  payload.put_bytes(scale_bytes);
  for (std::size_t i = 0; i < msg.dim; ++i) payload.put(msg.indicator.test(i));
  for (std::size_t j = 0; j < msg.code_count; ++j) {
    std::uint8_t c = msg.code_at(j);
    payload.put(c & 1u);
    payload.put(c & 2u);
  }
  SerializedMessage out;
  out.payload_bit_count = payload.bit_count();
  out.bytes.reserve(kFramingBytes + (out.payload_bit_count + 7) / 8);
  detail::put_u32_le(out.bytes, msg.dim);
  auto body = payload.take();
  out.bytes.insert(out.bytes.end(), body.begin(), body.end());
  return out;
}

inline std::vector<std::uint8_t> serialize(const GradientMessage& msg) {
  return serialize_counted(msg).bytes;
}

/// Size in bytes of the message starting at `bytes`, read from its framing and
/// indicator. Used to walk concatenated trace logs.
inline std::size_t wire_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFramingBytes + 4) throw Error("truncated message");
  std::uint32_t dim = detail::get_u32_le(bytes);
  std::size_t bitmap_bytes_needed = (static_cast<std::size_t>(dim) + 7) / 8;
  if (bytes.size() < kFramingBytes + 4 + bitmap_bytes_needed) throw Error("truncated message");
  auto body = bytes.subspan(kFramingBytes + 4);
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim; ++i) k += (body[i >> 3] >> (i & 7)) & 1u;
  return kFramingBytes + (payload_bits(dim, k) + 7) / 8;
}

inline GradientMessage deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFramingBytes + 4) throw Error("truncated message");
  GradientMessage msg;
  msg.dim = detail::get_u32_le(bytes);
  detail::BitReader reader(bytes.subspan(kFramingBytes));
  std::uint32_t scale_bits = 0;
  for (int i = 0; i < 32; ++i) scale_bits |= static_cast<std::uint32_t>(reader.get()) << i;
  msg.scale = std::bit_cast<float>(scale_bits);
  msg.indicator = IndicatorBitmap(msg.dim);
  for (std::size_t i = 0; i < msg.dim; ++i) {
    if (reader.get()) msg.indicator.set(i);
  }
  msg.code_count = msg.indicator.popcount();
  msg.codes.assign((msg.code_count + 3) / 4, 0);
  for (std::size_t j = 0; j < msg.code_count; ++j) {
    std::uint8_t c = static_cast<std::uint8_t>(reader.get()) |
                     static_cast<std::uint8_t>(reader.get() << 1);
    if (c == 3) throw Error("corrupt code");
    msg.codes[j >> 2] |= static_cast<std::uint8_t>(c << ((j & 3) * 2));
  }
  std::size_t expected = kFramingBytes + (reader.position() + 7) / 8;
  if (bytes.size() != expected) throw Error("trailing bytes after message");
  return msg;
}

}  // namespace qadagrad

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mysticeti {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

class DecodeError : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

/// Little-endian append-only encoder.
class ByteWriter {
public:
   void u8(std::uint8_t v) { out_.push_back(v); }
   void u32(std::uint32_t v) { put_le(v, 4); }
   void u64(std::uint64_t v) { put_le(v, 8); }

   void raw(ByteView data) { out_.insert(out_.end(), data.begin(), data.end()); }

   void prefixed(ByteView data) {
      u32(static_cast<std::uint32_t>(data.size()));
      raw(data);
   }

   const Bytes& bytes() const& { return out_; }
   Bytes take() && { return std::move(out_); }

private:
   void put_le(std::uint64_t v, int width) {
      for (int i = 0; i < width; ++i)
         out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
   }

   Bytes out_;
};

class ByteReader {
public:
   explicit ByteReader(ByteView data) : data_(data) {}

   std::uint8_t u8() { return static_cast<std::uint8_t>(get_le(1)); }
   std::uint32_t u32() { return static_cast<std::uint32_t>(get_le(4)); }
   std::uint64_t u64() { return get_le(8); }

   ByteView raw(std::size_t n) {
      need(n);
      auto out = data_.subspan(pos_, n);
      pos_ += n;
      return out;
   }

   ByteView prefixed() { return raw(u32()); }

   std::size_t remaining() const { return data_.size() - pos_; }
   bool done() const { return pos_ == data_.size(); }

private:
   void need(std::size_t n) const {
      if (data_.size() - pos_ < n)
         throw DecodeError("truncated input: need " + std::to_string(n) + " bytes, have " +
                           std::to_string(data_.size() - pos_));
   }

   std::uint64_t get_le(int width) {
      need(static_cast<std::size_t>(width));
      std::uint64_t v = 0;
      for (int i = 0; i < width; ++i)
         v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
      pos_ += static_cast<std::size_t>(width);
      return v;
   }

   ByteView data_;
   std::size_t pos_ = 0;
};

inline ByteView as_bytes(std::string_view s) {
   return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline std::string to_hex(ByteView data) {
   static constexpr char digits[] = "0123456789abcdef";
   std::string out;
   out.reserve(data.size() * 2);
   for (auto b : data) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xf]);
   }
   return out;
}

} // namespace mysticeti

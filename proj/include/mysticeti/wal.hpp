#pragma once

#include "mysticeti/types.hpp"

#include <zlib.h>

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mysticeti {

// Frame: len u32 | crc32(body) u32 | body. Body: kind u8 | now u64 | payload.
// Every validator input is logged, so replay re-derives the full state.

enum class WalKind : std::uint8_t { Received = 1, Submitted = 2, Step = 3, Proposed = 4 };

struct WalRecord {
   WalKind kind = WalKind::Step;
   Millis now = 0;
   AuthorityIndex from = 0;  // Received
   BlockPtr block;           // Received
   Transaction tx;           // Submitted
   Digest digest;            // Proposed

   static WalRecord received(Millis now, AuthorityIndex from, BlockPtr b) {
      WalRecord r;
      r.kind = WalKind::Received;
      r.now = now;
      r.from = from;
      r.block = std::move(b);
      return r;
   }
   static WalRecord submitted(Millis now, Transaction tx) {
      WalRecord r;
      r.kind = WalKind::Submitted;
      r.now = now;
      r.tx = std::move(tx);
      return r;
   }
   static WalRecord step(Millis now) {
      WalRecord r;
      r.now = now;
      return r;
   }
   static WalRecord proposed(Millis now, const Digest& d) {
      WalRecord r;
      r.kind = WalKind::Proposed;
      r.now = now;
      r.digest = d;
      return r;
   }
};

class WalCorrupt : public std::runtime_error {
public:
   using std::runtime_error::runtime_error;
};

inline std::uint32_t crc32_of(ByteView data) {
   auto crc = ::crc32(0L, Z_NULL, 0);
   return static_cast<std::uint32_t>(::crc32(crc, data.data(), static_cast<uInt>(data.size())));
}

inline Bytes encode_wal_body(const WalRecord& rec) {
   ByteWriter w;
   w.u8(static_cast<std::uint8_t>(rec.kind));
   w.u64(rec.now);
   switch (rec.kind) {
      case WalKind::Received:
         w.u32(rec.from);
         w.prefixed(rec.block->serialize());
         break;
      case WalKind::Submitted: w.prefixed(rec.tx.encode()); break;
      case WalKind::Step: break;
      case WalKind::Proposed: w.raw(rec.digest.bytes); break;
   }
   return std::move(w).take();
}

inline WalRecord decode_wal_body(ByteView body) {
   ByteReader r(body);
   WalRecord rec;
   auto kind = r.u8();
   if (kind < 1 || kind > 4) throw WalCorrupt("unknown wal record kind " + std::to_string(kind));
   rec.kind = static_cast<WalKind>(kind);
   rec.now = r.u64();
   switch (rec.kind) {
      case WalKind::Received:
         rec.from = r.u32();
         rec.block = Block::deserialize(r.prefixed());
         break;
      case WalKind::Submitted: rec.tx = Transaction::decode(r.prefixed()); break;
      case WalKind::Step: break;
      case WalKind::Proposed: {
         auto d = r.raw(32);
         std::copy(d.begin(), d.end(), rec.digest.bytes.begin());
         break;
      }
   }
   if (!r.done()) throw WalCorrupt("trailing bytes in wal record");
   return rec;
}

inline Bytes frame_wal_record(const WalRecord& rec) {
   auto body = encode_wal_body(rec);
   ByteWriter w;
   w.u32(static_cast<std::uint32_t>(body.size()));
   w.u32(crc32_of(body));
   w.raw(body);
   return std::move(w).take();
}

/// Decodes a log. A truncated or checksum-damaged final frame is dropped; damage anywhere
/// earlier throws WalCorrupt.
inline std::vector<WalRecord> read_wal(ByteView log) {
   std::vector<WalRecord> out;
   std::size_t pos = 0;
   while (pos < log.size()) {
      if (log.size() - pos < 8) break;
      ByteReader header(log.subspan(pos, 8));
      auto len = header.u32();
      auto crc = header.u32();
      if (log.size() - pos - 8 < len) break;
      auto body = log.subspan(pos + 8, len);
      bool last = pos + 8 + len == log.size();
      if (crc32_of(body) != crc) {
         if (last) break;
         throw WalCorrupt("wal checksum mismatch at offset " + std::to_string(pos));
      }
      try {
         out.push_back(decode_wal_body(body));
      } catch (const DecodeError& e) {
         throw WalCorrupt(std::string("undecodable wal record: ") + e.what());
      }
      pos += 8 + len;
   }
   return out;
}

/// Append-only log kept in memory and optionally mirrored to a file.
class WriteAheadLog {
public:
   WriteAheadLog() = default;
   explicit WriteAheadLog(const std::string& path) {
      file_.emplace(path, std::ios::binary | std::ios::app);
      if (!*file_) throw std::runtime_error("cannot open wal file " + path);
   }

   void append(const WalRecord& rec) {
      auto frame = frame_wal_record(rec);
      buffer_.insert(buffer_.end(), frame.begin(), frame.end());
      if (file_) {
         file_->write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
         file_->flush();
      }
      ++records_;
   }

   const Bytes& bytes() const { return buffer_; }
   std::size_t records() const { return records_; }

private:
   Bytes buffer_;
   std::optional<std::ofstream> file_;
   std::size_t records_ = 0;
};

inline Bytes read_file(const std::string& path) {
   std::ifstream in(path, std::ios::binary);
   if (!in) throw std::runtime_error("cannot open " + path);
   return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

} // namespace mysticeti

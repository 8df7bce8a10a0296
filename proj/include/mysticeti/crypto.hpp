#pragma once

#include "mysticeti/bytes.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/sha.h>

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <memory>
#include <string>

namespace mysticeti {

using AuthorityIndex = std::uint32_t;

struct Digest {
   std::array<std::uint8_t, 32> bytes{};

   auto operator<=>(const Digest&) const = default;

   std::string hex() const { return to_hex(bytes); }
   std::string short_hex() const { return hex().substr(0, 8); }

   static Digest from_hex(std::string_view hex) {
      if (hex.size() != 64)
         throw DecodeError("digest hex must be 64 characters");
      Digest d;
      auto nibble = [](char c) -> std::uint8_t {
         if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
         if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
         if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
         throw DecodeError("bad hex digit");
      };
      for (std::size_t i = 0; i < 32; ++i)
         d.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
      return d;
   }
};

struct DigestHash {
   std::size_t operator()(const Digest& d) const noexcept {
      std::size_t h;
      std::memcpy(&h, d.bytes.data(), sizeof h);
      return h;
   }
};

inline Digest sha256(ByteView data) {
   Digest d;
   SHA256(data.data(), data.size(), d.bytes.data());
   return d;
}

/// Block signing is injected so the simulator can run with a cheap deterministic scheme.
class Signer {
public:
   virtual ~Signer() = default;
   virtual Bytes sign(AuthorityIndex author, const Digest& message) const = 0;
   virtual bool verify(AuthorityIndex author, const Digest& message, ByteView signature) const = 0;
};

class NoopSigner final : public Signer {
public:
   Bytes sign(AuthorityIndex, const Digest&) const override { return {}; }
   bool verify(AuthorityIndex, const Digest&, ByteView) const override { return true; }
};

/// HMAC-SHA256 under a per-authority key derived from a committee secret. Not a real
/// signature scheme: anyone holding the secret can forge, which is fine inside one process.
class KeyedHashSigner final : public Signer {
public:
   explicit KeyedHashSigner(std::uint64_t committee_secret) : secret_(committee_secret) {}

   Bytes sign(AuthorityIndex author, const Digest& message) const override {
      auto key = key_for(author);
      Bytes out(32);
      unsigned int len = 0;
      HMAC(EVP_sha256(), key.bytes.data(), static_cast<int>(key.bytes.size()), message.bytes.data(),
           message.bytes.size(), out.data(), &len);
      out.resize(len);
      return out;
   }

   bool verify(AuthorityIndex author, const Digest& message, ByteView signature) const override {
      auto expected = sign(author, message);
      return expected.size() == signature.size() &&
             CRYPTO_memcmp(expected.data(), signature.data(), expected.size()) == 0;
   }

private:
   Digest key_for(AuthorityIndex author) const {
      ByteWriter w;
      w.raw(as_bytes("mysticeti-sim-key"));
      w.u64(secret_);
      w.u32(author);
      return sha256(w.bytes());
   }

   std::uint64_t secret_;
};

} // namespace mysticeti

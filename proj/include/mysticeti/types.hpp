#pragma once

#include "mysticeti/bytes.hpp"
#include "mysticeti/crypto.hpp"

#include <algorithm>
#include <compare>
#include <cstdint>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mysticeti {

using Round = std::uint64_t;
using Epoch = std::uint64_t;
using Millis = std::uint64_t;

inline constexpr std::uint8_t kBlockEncodingVersion = 0x01;

/// n = 3f + 1 authorities with equal voting power.
class Committee {
public:
   explicit Committee(std::size_t size) : size_(size) {
      if (size == 0 || (size - 1) % 3 != 0)
         throw std::invalid_argument("committee size must be 3f+1, got " + std::to_string(size));
   }

   std::size_t size() const { return size_; }
   std::size_t max_faulty() const { return (size_ - 1) / 3; }
   std::size_t quorum_threshold() const { return 2 * max_faulty() + 1; }
   std::size_t validity_threshold() const { return max_faulty() + 1; }
   bool contains(AuthorityIndex a) const { return a < size_; }

   bool operator==(const Committee&) const = default;

private:
   std::size_t size_;
};

/// (author, round, digest). Ordered by round, then author, then digest: the
/// deterministic tie-break used when linearizing committed sub-DAGs.
struct BlockRef {
   AuthorityIndex author = 0;
   Round round = 0;
   Digest digest{};

   bool operator==(const BlockRef&) const = default;
   std::strong_ordering operator<=>(const BlockRef& o) const {
      if (auto c = round <=> o.round; c != 0) return c;
      if (auto c = author <=> o.author; c != 0) return c;
      return digest <=> o.digest;
   }

   std::string to_string() const {
      return "A" + std::to_string(author) + "@" + std::to_string(round) + "#" + digest.short_hex();
   }
};

inline std::ostream& operator<<(std::ostream& os, const BlockRef& r) { return os << r.to_string(); }

struct BlockRefHash {
   std::size_t operator()(const BlockRef& r) const noexcept {
      return DigestHash{}(r.digest) ^ (std::size_t{r.author} << 40) ^ r.round;
   }
};

struct ObjectRef {
   std::uint64_t id = 0;
   std::uint64_t version = 0;
   auto operator<=>(const ObjectRef&) const = default;
};

/// A client transaction. Its wire form is the opaque byte string carried inside blocks;
/// the id is the hash of that byte string.
class Transaction {
public:
   Transaction() : Transaction({}, false, {}) {}
   Transaction(std::vector<ObjectRef> owned_inputs, bool has_shared_inputs, Bytes payload)
       : owned_inputs_(std::move(owned_inputs)), has_shared_inputs_(has_shared_inputs),
         payload_(std::move(payload)), id_(sha256(encode())) {}

   const std::vector<ObjectRef>& owned_inputs() const { return owned_inputs_; }
   bool has_shared_inputs() const { return has_shared_inputs_; }
   const Bytes& payload() const { return payload_; }
   const Digest& id() const { return id_; }

   /// Owned-only transactions may finalize without consensus.
   bool is_fast_path() const { return !owned_inputs_.empty() && !has_shared_inputs_; }
   bool is_mixed() const { return !owned_inputs_.empty() && has_shared_inputs_; }
   bool needs_votes() const { return !owned_inputs_.empty(); }

   bool conflicts_with(const Transaction& other) const {
      if (id_ == other.id_) return false;
      for (const auto& a : owned_inputs_)
         for (const auto& b : other.owned_inputs_)
            if (a == b) return true;
      return false;
   }

   Bytes encode() const {
      ByteWriter w;
      w.u32(static_cast<std::uint32_t>(owned_inputs_.size()));
      for (const auto& o : owned_inputs_) {
         w.u64(o.id);
         w.u64(o.version);
      }
      w.u8(has_shared_inputs_ ? 1 : 0);
      w.prefixed(payload_);
      return std::move(w).take();
   }

   static Transaction decode(ByteView bytes) {
      ByteReader r(bytes);
      auto count = r.u32();
      if (count > r.remaining() / 16) throw DecodeError("transaction input count exceeds buffer");
      std::vector<ObjectRef> inputs;
      inputs.reserve(count);
      for (std::uint32_t i = 0; i < count; ++i) {
         ObjectRef o;
         o.id = r.u64();
         o.version = r.u64();
         inputs.push_back(o);
      }
      auto shared = r.u8();
      if (shared > 1) throw DecodeError("bad shared-input flag");
      auto payload = r.prefixed();
      if (!r.done()) throw DecodeError("trailing bytes after transaction");
      return Transaction(std::move(inputs), shared == 1, Bytes(payload.begin(), payload.end()));
   }

   bool operator==(const Transaction& o) const { return id_ == o.id_; }

private:
   std::vector<ObjectRef> owned_inputs_;
   bool has_shared_inputs_;
   Bytes payload_;
   Digest id_;
};

/// A fast-path vote for the transaction at `index` inside `block`.
struct TxVote {
   BlockRef block;
   std::uint32_t index = 0;
   bool accept = true;
   bool operator==(const TxVote&) const = default;
};

/// Everything a block author decides. The digest covers exactly these fields.
struct BlockContents {
   Epoch epoch = 0;
   AuthorityIndex author = 0;
   Round round = 0;
   std::vector<BlockRef> parents;
   std::vector<Transaction> transactions;
   std::vector<TxVote> votes;
   bool epoch_change_bit = false;
   Millis timestamp = 0;
};

inline void encode_ref(ByteWriter& w, const BlockRef& r) {
   w.u32(r.author);
   w.u64(r.round);
   w.raw(r.digest.bytes);
}

inline BlockRef decode_ref(ByteReader& r) {
   BlockRef ref;
   ref.author = r.u32();
   ref.round = r.u64();
   auto d = r.raw(32);
   std::copy(d.begin(), d.end(), ref.digest.bytes.begin());
   return ref;
}

/// Canonical encoding: version byte, then fields little-endian in declaration order.
inline Bytes encode_contents(const BlockContents& c) {
   ByteWriter w;
   w.u8(kBlockEncodingVersion);
   w.u64(c.epoch);
   w.u32(c.author);
   w.u64(c.round);
   w.u32(static_cast<std::uint32_t>(c.parents.size()));
   for (const auto& p : c.parents) encode_ref(w, p);
   w.u8(c.epoch_change_bit ? 1 : 0);
   w.u64(c.timestamp);
   w.u32(static_cast<std::uint32_t>(c.transactions.size()));
   for (const auto& t : c.transactions) w.prefixed(t.encode());
   w.u32(static_cast<std::uint32_t>(c.votes.size()));
   for (const auto& v : c.votes) {
      encode_ref(w, v.block);
      w.u32(v.index);
      w.u8(v.accept ? 1 : 0);
   }
   return std::move(w).take();
}

inline BlockContents decode_contents(ByteReader& r) {
   BlockContents c;
   if (r.u8() != kBlockEncodingVersion) throw DecodeError("unknown block encoding version");
   c.epoch = r.u64();
   c.author = r.u32();
   c.round = r.u64();
   auto parents = r.u32();
   if (parents > r.remaining() / 44) throw DecodeError("parent count exceeds buffer");
   for (std::uint32_t i = 0; i < parents; ++i) c.parents.push_back(decode_ref(r));
   auto bit = r.u8();
   if (bit > 1) throw DecodeError("bad epoch-change bit");
   c.epoch_change_bit = bit == 1;
   c.timestamp = r.u64();
   auto txs = r.u32();
   if (txs > r.remaining() / 4) throw DecodeError("transaction count exceeds buffer");
   for (std::uint32_t i = 0; i < txs; ++i) c.transactions.push_back(Transaction::decode(r.prefixed()));
   auto votes = r.u32();
   if (votes > r.remaining() / 49) throw DecodeError("vote count exceeds buffer");
   for (std::uint32_t i = 0; i < votes; ++i) {
      TxVote v;
      v.block = decode_ref(r);
      v.index = r.u32();
      auto accept = r.u8();
      if (accept > 1) throw DecodeError("bad vote flag");
      v.accept = accept == 1;
      c.votes.push_back(v);
   }
   return c;
}

/// Immutable signed block. Construct through Block::make.
class Block {
public:
   static std::shared_ptr<const Block> make(BlockContents contents, const Signer& signer) {
      auto digest = sha256(encode_contents(contents));
      auto signature = signer.sign(contents.author, digest);
      return std::shared_ptr<const Block>(new Block(std::move(contents), digest, std::move(signature)));
   }

   static std::shared_ptr<const Block> make_unsigned(BlockContents contents) {
      auto digest = sha256(encode_contents(contents));
      return std::shared_ptr<const Block>(new Block(std::move(contents), digest, {}));
   }

   /// Block bytes plus signature, as stored in the write-ahead log.
   Bytes serialize() const {
      ByteWriter w;
      w.prefixed(encode_contents(contents_));
      w.prefixed(signature_);
      return std::move(w).take();
   }

   static std::shared_ptr<const Block> deserialize(ByteView bytes) {
      ByteReader outer(bytes);
      auto body = outer.prefixed();
      auto sig = outer.prefixed();
      if (!outer.done()) throw DecodeError("trailing bytes after block");
      ByteReader r(body);
      auto contents = decode_contents(r);
      if (!r.done()) throw DecodeError("trailing bytes inside block body");
      auto digest = sha256(body);
      return std::shared_ptr<const Block>(new Block(std::move(contents), digest, Bytes(sig.begin(), sig.end())));
   }

   const BlockRef& reference() const { return ref_; }
   AuthorityIndex author() const { return contents_.author; }
   Round round() const { return contents_.round; }
   Epoch epoch() const { return contents_.epoch; }
   const Digest& digest() const { return ref_.digest; }
   const std::vector<BlockRef>& parents() const { return contents_.parents; }
   const std::vector<Transaction>& transactions() const { return contents_.transactions; }
   const std::vector<TxVote>& votes() const { return contents_.votes; }
   bool epoch_change_bit() const { return contents_.epoch_change_bit; }
   Millis timestamp() const { return contents_.timestamp; }
   const Bytes& signature() const { return signature_; }
   const BlockContents& contents() const { return contents_; }
   bool is_genesis() const { return contents_.round == 0; }

private:
   Block(BlockContents contents, Digest digest, Bytes signature)
       : contents_(std::move(contents)), signature_(std::move(signature)) {
      ref_ = BlockRef{contents_.author, contents_.round, digest};
   }

   BlockContents contents_;
   BlockRef ref_;
   Bytes signature_;
};

using BlockPtr = std::shared_ptr<const Block>;

/// One implicit round-0 block per authority; its digest depends only on the author.
inline BlockPtr genesis_block(AuthorityIndex author) {
   BlockContents c;
   c.author = author;
   return Block::make_unsigned(std::move(c));
}

} // namespace mysticeti

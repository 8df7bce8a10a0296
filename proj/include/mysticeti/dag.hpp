#pragma once

#include "mysticeti/types.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace mysticeti {

/// Store of accepted blocks. Closed under parents and append-only.
class DagState {
public:
   DagState() = default;

   static DagState with_genesis(const Committee& committee) {
      DagState dag;
      for (AuthorityIndex a = 0; a < committee.size(); ++a) dag.insert(genesis_block(a));
      return dag;
   }

   /// Returns false when the block is already stored. Throws if a parent is missing.
   bool insert(BlockPtr block) {
      const auto& ref = block->reference();
      if (blocks_.contains(ref)) return false;
      for (const auto& p : block->parents())
         if (!blocks_.contains(p))
            throw std::logic_error("dag insert with missing parent " + p.to_string());
      for (const auto& p : block->parents()) tips_.erase(p);
      if (!has_children_.contains(ref)) tips_.insert(ref);
      for (const auto& p : block->parents()) has_children_.insert(p);

      auto& round = by_round_[ref.round];
      round.insert(std::upper_bound(round.begin(), round.end(), block,
                                    [](const BlockPtr& a, const BlockPtr& b) {
                                       return a->reference() < b->reference();
                                    }),
                   block);
      by_slot_[{ref.author, ref.round}].push_back(ref);
      highest_round_ = std::max(highest_round_, ref.round);
      order_.push_back(block);
      blocks_.emplace(ref, std::move(block));
      return true;
   }

   bool contains(const BlockRef& ref) const { return blocks_.contains(ref); }

   BlockPtr get(const BlockRef& ref) const {
      auto it = blocks_.find(ref);
      return it == blocks_.end() ? nullptr : it->second;
   }

   const Block& at(const BlockRef& ref) const {
      auto it = blocks_.find(ref);
      if (it == blocks_.end()) throw std::out_of_range("unknown block " + ref.to_string());
      return *it->second;
   }

   /// Blocks of a round, sorted by (author, digest).
   std::span<const BlockPtr> blocks_at(Round round) const {
      auto it = by_round_.find(round);
      if (it == by_round_.end()) return {};
      return it->second;
   }

   /// All blocks stored for (author, round); more than one means equivocation.
   std::vector<BlockPtr> slot_blocks(AuthorityIndex author, Round round) const {
      std::vector<BlockPtr> out;
      auto it = by_slot_.find({author, round});
      if (it == by_slot_.end()) return out;
      for (const auto& r : it->second) out.push_back(get(r));
      std::sort(out.begin(), out.end(),
                [](const BlockPtr& a, const BlockPtr& b) { return a->reference() < b->reference(); });
      return out;
   }

   std::size_t distinct_authors_at(Round round) const {
      std::set<AuthorityIndex> authors;
      for (const auto& b : blocks_at(round)) authors.insert(b->author());
      return authors.size();
   }

   /// Stored blocks without a stored child.
   std::vector<BlockRef> tips() const {
      std::vector<BlockRef> out(tips_.begin(), tips_.end());
      std::sort(out.begin(), out.end());
      return out;
   }

   Round highest_round() const { return highest_round_; }
   std::size_t size() const { return blocks_.size(); }

   /// Blocks in insertion order.
   const std::vector<BlockPtr>& blocks() const { return order_; }

   /// Slots for which more than one digest is stored.
   std::vector<std::pair<AuthorityIndex, Round>> equivocations() const {
      std::vector<std::pair<AuthorityIndex, Round>> out;
      for (const auto& [slot, refs] : by_slot_)
         if (refs.size() > 1) out.push_back(slot);
      return out;
   }

private:
   std::unordered_map<BlockRef, BlockPtr, BlockRefHash> blocks_;
   std::map<Round, std::vector<BlockPtr>> by_round_;
   std::map<std::pair<AuthorityIndex, Round>, std::vector<BlockRef>> by_slot_;
   std::unordered_set<BlockRef, BlockRefHash> tips_;
   std::unordered_set<BlockRef, BlockRefHash> has_children_;
   std::vector<BlockPtr> order_;
   Round highest_round_ = 0;
};

// ---------------------------------------------------------------------------
// Verification

enum class RejectReason {
   UnknownAuthority,
   BadSignature,
   MalformedGenesis,
   MissingOwnParentFirst,
   ParentRoundNotLower,
   DuplicateParents,
   InsufficientPreviousRoundParents,
   WrongEpoch,
   TimestampBelowParent,
   TimestampTooFarFuture,
   InvalidVote,
};

inline std::string_view to_string(RejectReason r) {
   switch (r) {
      case RejectReason::UnknownAuthority: return "UnknownAuthority";
      case RejectReason::BadSignature: return "BadSignature";
      case RejectReason::MalformedGenesis: return "MalformedGenesis";
      case RejectReason::MissingOwnParentFirst: return "MissingOwnParentFirst";
      case RejectReason::ParentRoundNotLower: return "ParentRoundNotLower";
      case RejectReason::DuplicateParents: return "DuplicateParents";
      case RejectReason::InsufficientPreviousRoundParents: return "InsufficientPreviousRoundParents";
      case RejectReason::WrongEpoch: return "WrongEpoch";
      case RejectReason::TimestampBelowParent: return "TimestampBelowParent";
      case RejectReason::TimestampTooFarFuture: return "TimestampTooFarFuture";
      case RejectReason::InvalidVote: return "InvalidVote";
   }
   return "Unknown";
}

struct TimestampLimits {
   Millis drift_tolerance = 500;
   Millis max_suspend = 5000;
};

struct Verdict {
   enum class Kind { Accept, Reject, Suspend };
   Kind kind = Kind::Accept;
   RejectReason reason{};
   Millis until = 0;

   static Verdict accept() { return {}; }
   static Verdict reject(RejectReason r) { return {Kind::Reject, r, 0}; }
   static Verdict suspend(Millis until) { return {Kind::Suspend, {}, until}; }

   bool accepted() const { return kind == Kind::Accept; }
   bool rejected() const { return kind == Kind::Reject; }
   bool suspended() const { return kind == Kind::Suspend; }
};

/// Checks that need only the block itself.
inline std::optional<RejectReason> check_structure(const Block& block, const Committee& committee) {
   if (!committee.contains(block.author())) return RejectReason::UnknownAuthority;
   const auto& parents = block.parents();
   if (block.round() == 0) {
      if (!parents.empty() || !block.transactions().empty() || !block.votes().empty())
         return RejectReason::MalformedGenesis;
      return std::nullopt;
   }
   if (parents.empty() || parents.front().author != block.author() ||
       parents.front().round >= block.round())
      return RejectReason::MissingOwnParentFirst;
   for (const auto& p : parents)
      if (p.round >= block.round()) return RejectReason::ParentRoundNotLower;
   std::set<BlockRef> seen;
   for (const auto& p : parents)
      if (!seen.insert(p).second) return RejectReason::DuplicateParents;
   std::set<AuthorityIndex> previous_round;
   for (const auto& p : parents)
      if (p.round + 1 == block.round()) previous_round.insert(p.author);
   if (previous_round.size() < committee.quorum_threshold())
      return RejectReason::InsufficientPreviousRoundParents;
   return std::nullopt;
}

/// Full validity check. Every parent must already be stored in `dag`; buffering blocks
/// with unknown parents is the caller's job.
inline Verdict verify_block(const Block& block, const Committee& committee, const DagState& dag, Millis now,
                            const TimestampLimits& limits = {}) {
   if (auto r = check_structure(block, committee)) return Verdict::reject(*r);
   if (block.round() == 0) return Verdict::accept();

   Epoch max_parent_epoch = 0;
   Millis max_parent_ts = 0;
   for (const auto& p : block.parents()) {
      const auto& parent = dag.at(p);
      max_parent_epoch = std::max(max_parent_epoch, parent.epoch());
      max_parent_ts = std::max(max_parent_ts, parent.timestamp());
   }
   const auto& own_previous = dag.at(block.parents().front());
   if (block.epoch() < own_previous.epoch() || block.epoch() > max_parent_epoch + 1)
      return Verdict::reject(RejectReason::WrongEpoch);
   if (block.timestamp() < max_parent_ts) return Verdict::reject(RejectReason::TimestampBelowParent);

   for (const auto& v : block.votes()) {
      auto target = dag.get(v.block);
      if (!target || v.block.round >= block.round() || v.index >= target->transactions().size())
         return Verdict::reject(RejectReason::InvalidVote);
   }

   if (block.timestamp() > now + limits.drift_tolerance) {
      if (block.timestamp() <= now + limits.max_suspend)
         return Verdict::suspend(block.timestamp() - limits.drift_tolerance);
      return Verdict::reject(RejectReason::TimestampTooFarFuture);
   }
   return Verdict::accept();
}

// ---------------------------------------------------------------------------
// Patterns

namespace detail {

inline std::optional<BlockRef> supported_block_dfs(const Block& b, AuthorityIndex author, Round round,
                                                   const DagState& dag,
                                                   std::unordered_set<BlockRef, BlockRefHash>& exhausted) {
   if (round >= b.round()) return std::nullopt;
   for (const auto& p : b.parents()) {
      if (p.author == author && p.round == round) return p;
      if (p.round <= round || exhausted.contains(p)) continue;
      if (auto found = supported_block_dfs(dag.at(p), author, round, dag, exhausted)) return found;
      exhausted.insert(p);
   }
   return std::nullopt;
}

} // namespace detail

/// First block of (author, round) met by a depth-first walk of `start`'s parents in list order.
/// Subtrees already walked without a hit are not revisited; the walk is deterministic, so
/// revisiting them could not change the answer.
inline std::optional<BlockRef> supported_block(const Block& start, AuthorityIndex author, Round round,
                                               const DagState& dag) {
   std::unordered_set<BlockRef, BlockRefHash> exhausted;
   return detail::supported_block_dfs(start, author, round, dag, exhausted);
}

inline bool is_vote(const Block& voter, const Block& candidate, const DagState& dag) {
   if (voter.round() <= candidate.round()) return false;
   auto supported = supported_block(voter, candidate.author(), candidate.round(), dag);
   return supported && *supported == candidate.reference();
}

/// True iff at least 2f+1 distinct authors among `cert`'s parents vote for `candidate`.
inline bool is_certificate(const Block& cert, const Block& candidate, const DagState& dag,
                           const Committee& committee) {
   std::set<AuthorityIndex> voters;
   for (const auto& p : cert.parents()) {
      if (voters.contains(p.author)) continue;
      if (is_vote(dag.at(p), candidate, dag)) voters.insert(p.author);
   }
   return voters.size() >= committee.quorum_threshold();
}

/// Reflexive-transitive parent reachability.
inline bool linked(const BlockRef& old_ref, const BlockRef& new_ref, const DagState& dag) {
   if (old_ref == new_ref) return true;
   if (old_ref.round >= new_ref.round) return false;
   std::vector<BlockRef> stack{new_ref};
   std::unordered_set<BlockRef, BlockRefHash> seen{new_ref};
   while (!stack.empty()) {
      auto ref = stack.back();
      stack.pop_back();
      for (const auto& p : dag.at(ref).parents()) {
         if (p == old_ref) return true;
         if (p.round <= old_ref.round || !seen.insert(p).second) continue;
         stack.push_back(p);
      }
   }
   return false;
}

/// Every block reachable from `ref` (inclusive) with round >= min_round.
inline std::unordered_set<BlockRef, BlockRefHash> causal_history(const BlockRef& ref, const DagState& dag,
                                                                 Round min_round = 0) {
   std::unordered_set<BlockRef, BlockRefHash> seen{ref};
   std::vector<BlockRef> stack{ref};
   while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      for (const auto& p : dag.at(cur).parents())
         if (p.round >= min_round && seen.insert(p).second) stack.push_back(p);
   }
   return seen;
}

} // namespace mysticeti

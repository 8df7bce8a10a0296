#pragma once

#include "mysticeti/dag.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mysticeti {

struct DeciderConfig {
   std::uint32_t wave_length = 3;
   std::uint32_t num_of_proposers = 2;

   void validate(const Committee& committee) const {
      if (wave_length < 3) throw std::invalid_argument("wave_length must be at least 3");
      if (num_of_proposers < 1 || num_of_proposers > committee.size())
         throw std::invalid_argument("num_of_proposers must be in [1, n]");
   }
};

/// Deterministic (round, slot offset) -> authority map.
class LeaderSchedule {
public:
   enum class Kind { RoundRobin, Fixed };

   explicit LeaderSchedule(std::size_t committee_size, Kind kind = Kind::RoundRobin)
       : size_(committee_size), kind_(kind) {}

   AuthorityIndex proposer(Round round, std::uint32_t offset) const {
      if (kind_ == Kind::Fixed) return static_cast<AuthorityIndex>(offset % size_);
      return static_cast<AuthorityIndex>((round + offset) % size_);
   }

   Kind kind() const { return kind_; }
   std::size_t committee_size() const { return size_; }

private:
   std::size_t size_;
   Kind kind_;
};

struct Slot {
   Round round = 0;
   std::uint32_t offset = 0;
   AuthorityIndex authority = 0;

   bool operator==(const Slot& o) const { return round == o.round && offset == o.offset; }
   auto operator<=>(const Slot& o) const {
      if (auto c = round <=> o.round; c != 0) return c;
      return offset <=> o.offset;
   }

   std::string to_string() const {
      return "A" + std::to_string(authority) + "@" + std::to_string(round) + "/" + std::to_string(offset);
   }
};

enum class Decision { Undecided, Commit, Skip };

inline std::string_view to_string(Decision d) {
   switch (d) {
      case Decision::Undecided: return "undecided";
      case Decision::Commit: return "commit";
      case Decision::Skip: return "skip";
   }
   return "?";
}

struct SlotStatus {
   Slot slot;
   Decision decision = Decision::Undecided;
   std::optional<BlockRef> block;  // set iff decision == Commit
   bool direct = false;

   bool decided() const { return decision != Decision::Undecided; }
   bool operator==(const SlotStatus&) const = default;

   static SlotStatus undecided(Slot s) { return {s, Decision::Undecided, std::nullopt, false}; }
   static SlotStatus commit(Slot s, BlockRef b, bool direct) { return {s, Decision::Commit, b, direct}; }
   static SlotStatus skip(Slot s, bool direct) { return {s, Decision::Skip, std::nullopt, direct}; }
};

/// Skip pattern: at least 2f+1 distinct authors at round+1 have a block with no parent by
/// `author`, so no proposal for the slot can ever be certified.
inline bool skipped_proposer(AuthorityIndex author, Round round, const DagState& dag, const Committee& committee) {
   std::set<AuthorityIndex> skippers;
   for (const auto& b : dag.blocks_at(round + 1)) {
      bool references = std::any_of(b->parents().begin(), b->parents().end(),
                                    [&](const BlockRef& p) { return p.author == author; });
      if (!references) skippers.insert(b->author());
   }
   return skippers.size() >= committee.quorum_threshold();
}

/// Skip pattern for longer waves, where votes sit at `voting_round` > round+1: 2f+1 distinct
/// authors there have a block supporting no proposal of the slot.
inline bool skipped_at_voting_round(AuthorityIndex author, Round round, Round voting_round, const DagState& dag,
                                    const Committee& committee) {
   if (voting_round == round + 1) return skipped_proposer(author, round, dag, committee);
   std::set<AuthorityIndex> skippers;
   for (const auto& b : dag.blocks_at(voting_round))
      if (!supported_block(*b, author, round, dag)) skippers.insert(b->author());
   return skippers.size() >= committee.quorum_threshold();
}

inline std::size_t count_certificates(const Block& proposal, Round decision_round, const DagState& dag,
                                      const Committee& committee) {
   std::set<AuthorityIndex> certifiers;
   for (const auto& b : dag.blocks_at(decision_round)) {
      if (certifiers.contains(b->author())) continue;
      if (is_certificate(*b, proposal, dag, committee)) certifiers.insert(b->author());
   }
   return certifiers.size();
}

/// The slot's proposal certified by 2f+1 distinct decision-round authors, if any. With an
/// equivocating proposer every stored proposal is tried; at most one can qualify.
inline std::optional<BlockRef> supported_proposer(AuthorityIndex author, Round round, Round decision_round,
                                                  const DagState& dag, const Committee& committee) {
   for (const auto& proposal : dag.slot_blocks(author, round))
      if (count_certificates(*proposal, decision_round, dag, committee) >= committee.quorum_threshold())
         return proposal->reference();
   return std::nullopt;
}

/// Some decision-round certificate for `proposer` lies in `anchor`'s causal history.
inline bool certified_link(const Block& anchor, const Block& proposer, Round decision_round, const DagState& dag,
                           const Committee& committee) {
   for (const auto& b : dag.blocks_at(decision_round))
      if (is_certificate(*b, proposer, dag, committee) && linked(b->reference(), anchor.reference(), dag))
         return true;
   return false;
}

/// Wave arithmetic and the direct rule for one proposer slot position.
class DirectDecider {
public:
   DirectDecider(const Committee& committee, const LeaderSchedule& schedule, std::uint32_t wave_length,
                 std::uint32_t round_offset, std::uint32_t proposer_offset)
       : committee_(&committee), schedule_(&schedule), wave_length_(wave_length), round_offset_(round_offset),
         proposer_offset_(proposer_offset) {}

   std::uint64_t wave_number(Round r) const { return (r - round_offset_) / wave_length_; }
   Round proposer_round(std::uint64_t w) const { return w * wave_length_ + round_offset_; }
   Round decision_round(std::uint64_t w) const { return w * wave_length_ + wave_length_ - 1 + round_offset_; }

   Slot slot(std::uint64_t w) const {
      auto r = proposer_round(w);
      return Slot{r, proposer_offset_, schedule_->proposer(r, proposer_offset_)};
   }

   SlotStatus try_direct_decide(std::uint64_t w, const DagState& dag) const {
      auto s = slot(w);
      if (skipped_at_voting_round(s.authority, s.round, decision_round(w) - 1, dag, *committee_))
         return SlotStatus::skip(s, true);
      if (auto b = supported_proposer(s.authority, s.round, decision_round(w), dag, *committee_))
         return SlotStatus::commit(s, *b, true);
      return SlotStatus::undecided(s);
   }

   /// `later` holds the statuses of all later slots in ascending slot order.
   SlotStatus try_indirect_decide(std::uint64_t w, std::span<const SlotStatus> later, const DagState& dag) const {
      auto s = slot(w);
      auto decision = decision_round(w);
      for (const auto& anchor : later) {
         if (anchor.slot.round <= decision) continue;
         if (anchor.decision == Decision::Undecided) return SlotStatus::undecided(s);
         if (anchor.decision == Decision::Commit) {
            const auto& anchor_block = dag.at(*anchor.block);
            for (const auto& proposal : dag.slot_blocks(s.authority, s.round))
               if (certified_link(anchor_block, *proposal, decision, dag, *committee_))
                  return SlotStatus::commit(s, proposal->reference(), false);
            return SlotStatus::skip(s, false);
         }
      }
      return SlotStatus::undecided(s);
   }

private:
   const Committee* committee_;
   const LeaderSchedule* schedule_;
   std::uint32_t wave_length_;
   std::uint32_t round_offset_;
   std::uint32_t proposer_offset_;
};

/// The universal decision rule over every proposer slot.
class Committer {
public:
   Committer(Committee committee, DeciderConfig config, LeaderSchedule schedule)
       : committee_(committee), config_(config), schedule_(schedule) {
      config_.validate(committee_);
   }

   const Committee& committee() const { return committee_; }
   const DeciderConfig& config() const { return config_; }
   const LeaderSchedule& schedule() const { return schedule_; }

   DirectDecider decider_for(Round r, std::uint32_t offset) const {
      return DirectDecider(committee_, schedule_, config_.wave_length, static_cast<std::uint32_t>(r % config_.wave_length),
                           offset);
   }

   /// Statuses of every slot after `after` (all slots from round 1 when empty) up to the
   /// highest stored round, ascending. Not truncated.
   std::vector<SlotStatus> decide_slots(std::optional<Slot> after, const DagState& dag) const {
      std::vector<SlotStatus> reversed;
      Round lowest = after ? after->round : 1;
      for (Round r = dag.highest_round(); r >= lowest && r >= 1; --r) {
         for (std::uint32_t l = config_.num_of_proposers; l-- > 0;) {
            if (after && Slot{r, l, 0} <= *after) continue;
            auto decider = decider_for(r, l);
            auto w = decider.wave_number(r);
            if (decider.proposer_round(w) != r) continue;
            auto status = decider.try_direct_decide(w, dag);
            if (!status.decided()) {
               std::vector<SlotStatus> later(reversed.rbegin(), reversed.rend());
               status = decider.try_indirect_decide(w, later, dag);
            }
            reversed.push_back(status);
         }
      }
      return {reversed.rbegin(), reversed.rend()};
   }

   /// Decided prefix: everything before the first undecided slot.
   std::vector<SlotStatus> try_decide(std::optional<Slot> after, const DagState& dag) const {
      auto all = decide_slots(after, dag);
      auto first_undecided = std::find_if(all.begin(), all.end(), [](const SlotStatus& s) { return !s.decided(); });
      all.erase(first_undecided, all.end());
      return all;
   }

   /// Round-granular entry point: slots with round > last_committed_round.
   std::vector<SlotStatus> try_decide(Round last_committed_round, const DagState& dag) const {
      if (last_committed_round == 0) return try_decide(std::nullopt, dag);
      return try_decide(Slot{last_committed_round, config_.num_of_proposers - 1, 0}, dag);
   }

private:
   Committee committee_;
   DeciderConfig config_;
   LeaderSchedule schedule_;
};

// ---------------------------------------------------------------------------
// Commit sequence

struct CommitRecord {
   std::uint64_t index = 0;
   BlockRef leader;
   std::vector<BlockRef> blocks;
   Millis timestamp = 0;
   bool operator==(const CommitRecord&) const = default;
};

using RefSet = std::unordered_set<BlockRef, BlockRefHash>;

/// Causal history of `leader` not yet in `delivered`, sorted by (round, author, digest).
/// `delivered` must be closed under parents, which holds when it is built only from
/// previous outputs of this function.
inline std::vector<BlockRef> linearize(const BlockRef& leader, const RefSet& delivered, const DagState& dag) {
   if (delivered.contains(leader)) return {};
   std::vector<BlockRef> out{leader};
   RefSet seen{leader};
   std::vector<BlockRef> stack{leader};
   while (!stack.empty()) {
      auto cur = stack.back();
      stack.pop_back();
      for (const auto& p : dag.at(cur).parents()) {
         if (delivered.contains(p) || !seen.insert(p).second) continue;
         out.push_back(p);
         stack.push_back(p);
      }
   }
   std::sort(out.begin(), out.end());
   // The leader is the unique maximum of its own history already; keep it last explicitly.
   auto it = std::find(out.begin(), out.end(), leader);
   std::rotate(it, it + 1, out.end());
   return out;
}

inline Millis commit_timestamp(std::span<const BlockPtr> leader_blocks, Millis previous) {
   Millis ts = previous;
   for (const auto& b : leader_blocks) ts = std::max(ts, b->timestamp());
   return ts;
}

/// Turns decided slots into commit records, remembering what has been delivered.
class CommitSequencer {
public:
   /// Returns the record for a commit slot; ToSkip slots yield nothing.
   std::optional<CommitRecord> sequence(const SlotStatus& status, const DagState& dag) {
      if (status.decision != Decision::Commit) return std::nullopt;
      CommitRecord rec;
      rec.index = next_index_++;
      rec.leader = *status.block;
      rec.blocks = linearize(rec.leader, delivered_, dag);
      std::vector<BlockPtr> leader_blocks{dag.get(rec.leader)};
      rec.timestamp = commit_timestamp(leader_blocks, last_timestamp_);
      last_timestamp_ = rec.timestamp;
      delivered_.insert(rec.blocks.begin(), rec.blocks.end());
      return rec;
   }

   const RefSet& delivered() const { return delivered_; }
   Millis last_timestamp() const { return last_timestamp_; }

private:
   RefSet delivered_;
   std::uint64_t next_index_ = 0;
   Millis last_timestamp_ = 0;
};

} // namespace mysticeti

#pragma once

#include "mysticeti/committer.hpp"
#include "mysticeti/dag.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

namespace mysticeti {

/// The tuple (B, i): transaction i of block B.
struct TxPosition {
   BlockRef block;
   std::uint32_t index = 0;
   auto operator<=>(const TxPosition&) const = default;
   bool operator==(const TxPosition&) const = default;
};

enum class TxStatus { Pending, Executed, Finalized, Rejected, Reverted };

inline std::string_view to_string(TxStatus s) {
   switch (s) {
      case TxStatus::Pending: return "pending";
      case TxStatus::Executed: return "executed";
      case TxStatus::Finalized: return "finalized";
      case TxStatus::Rejected: return "rejected";
      case TxStatus::Reverted: return "reverted";
   }
   return "?";
}

enum class FinalityRoute { None, Certificates, Commit, Mixed, EpochClose };

inline std::string_view to_string(FinalityRoute r) {
   switch (r) {
      case FinalityRoute::None: return "none";
      case FinalityRoute::Certificates: return "certificates";
      case FinalityRoute::Commit: return "commit";
      case FinalityRoute::Mixed: return "mixed";
      case FinalityRoute::EpochClose: return "epoch-close";
   }
   return "?";
}

struct VoteDecision {
   bool accept = true;
   std::optional<Digest> conflicting;
};

/// Per-validator owned-object locks: (object, version) -> first transaction voted for.
class LockTable {
public:
   VoteDecision decide(const Transaction& tx) {
      for (const auto& input : tx.owned_inputs()) {
         auto it = locks_.find(input);
         if (it != locks_.end() && it->second != tx.id()) return {false, it->second};
      }
      for (const auto& input : tx.owned_inputs()) locks_[input] = tx.id();
      return {true, std::nullopt};
   }

   std::optional<Digest> holder(const ObjectRef& o) const {
      auto it = locks_.find(o);
      if (it == locks_.end()) return std::nullopt;
      return it->second;
   }

   template <typename Keep>
   void retain(Keep&& keep) {
      std::erase_if(locks_, [&](const auto& entry) { return !keep(entry.second); });
   }

   std::size_t size() const { return locks_.size(); }

private:
   std::map<ObjectRef, Digest> locks_;
};

inline VoteDecision vote_decision(const Transaction& tx, LockTable& locks) { return locks.decide(tx); }

// ---------------------------------------------------------------------------
// Stateless pattern checks over a DAG snapshot.

/// Accept vote for `pos` carried by `b`. Inclusion counts as the proposer's vote, and a vote
/// persists along its author's own chain (first parent) within the epoch it was cast in.
inline bool carries_vote(const Block& b, const TxPosition& pos, const Block& proposer, const DagState& dag) {
   if (b.epoch() != proposer.epoch()) return false;
   const Block* cur = &b;
   while (true) {
      if (cur->reference() == proposer.reference()) return true;
      bool explicit_vote = std::any_of(cur->votes().begin(), cur->votes().end(), [&](const TxVote& v) {
         return v.accept && v.block == pos.block && v.index == pos.index;
      });
      if (explicit_vote) return true;
      if (cur->parents().empty() || cur->round() <= proposer.round()) return false;
      const auto& own = cur->parents().front();
      if (own.author != b.author() || !dag.contains(own)) return false;
      cur = &dag.at(own);
      if (cur->epoch() != proposer.epoch()) return false;
   }
}

inline std::set<AuthorityIndex> vote_authors(const TxPosition& pos, const DagState& dag) {
   std::set<AuthorityIndex> authors;
   const auto& proposer = dag.at(pos.block);
   authors.insert(proposer.author());
   for (Round r = pos.block.round + 1; r <= dag.highest_round(); ++r)
      for (const auto& b : dag.blocks_at(r))
         if (carries_vote(*b, pos, proposer, dag)) authors.insert(b->author());
   return authors;
}

inline bool executable(const TxPosition& pos, const DagState& dag, const Committee& committee) {
   return vote_authors(pos, dag).size() >= committee.quorum_threshold();
}

/// `cert` has 2f+1 distinct-author direct parents voting for `pos`, and its epoch-change bit is unset.
inline bool is_fastpath_certificate(const Block& cert, const TxPosition& pos, const DagState& dag,
                                    const Committee& committee) {
   if (cert.epoch_change_bit()) return false;
   const auto& proposer = dag.at(pos.block);
   std::set<AuthorityIndex> voters;
   for (const auto& p : cert.parents())
      if (carries_vote(dag.at(p), pos, proposer, dag)) voters.insert(p.author);
   return voters.size() >= committee.quorum_threshold();
}

inline std::vector<BlockRef> fastpath_certificates(const TxPosition& pos, const DagState& dag,
                                                   const Committee& committee) {
   std::vector<BlockRef> out;
   for (Round r = pos.block.round + 1; r <= dag.highest_round(); ++r)
      for (const auto& b : dag.blocks_at(r))
         if (is_fastpath_certificate(*b, pos, dag, committee)) out.push_back(b->reference());
   return out;
}

inline RefSet committed_blocks(std::span<const CommitRecord> commits) {
   RefSet out;
   for (const auto& c : commits) out.insert(c.blocks.begin(), c.blocks.end());
   return out;
}

/// Either 2f+1 distinct authors publish certificates, or one certificate is committed.
inline bool finalized(const TxPosition& pos, const DagState& dag, std::span<const CommitRecord> commits,
                      const Committee& committee) {
   auto certs = fastpath_certificates(pos, dag, committee);
   std::set<AuthorityIndex> certifiers;
   for (const auto& c : certs) certifiers.insert(c.author);
   if (certifiers.size() >= committee.quorum_threshold()) return true;
   auto committed = committed_blocks(commits);
   return std::any_of(certs.begin(), certs.end(), [&](const BlockRef& c) { return committed.contains(c); });
}

/// 2f+1 distinct-author voting blocks all inside one committed leader's causal history.
inline bool finalize_mixed(const TxPosition& pos, const DagState& dag, std::span<const CommitRecord> commits,
                           const Committee& committee) {
   const auto& proposer = dag.at(pos.block);
   std::vector<BlockPtr> voting;
   for (Round r = pos.block.round; r <= dag.highest_round(); ++r)
      for (const auto& b : dag.blocks_at(r))
         if (carries_vote(*b, pos, proposer, dag)) voting.push_back(b);
   std::set<AuthorityIndex> all;
   for (const auto& v : voting) all.insert(v->author());
   if (all.size() < committee.quorum_threshold()) return false;
   for (const auto& commit : commits) {
      std::set<AuthorityIndex> referenced;
      for (const auto& v : voting)
         if (linked(v->reference(), commit.leader, dag)) referenced.insert(v->author());
      if (referenced.size() >= committee.quorum_threshold()) return true;
   }
   return false;
}

// ---------------------------------------------------------------------------
// Incremental per-validator tally

struct TxRecord {
   Transaction tx;
   Epoch epoch = 0;
   TxStatus status = TxStatus::Pending;
   FinalityRoute route = FinalityRoute::None;
   std::vector<TxPosition> positions;
   std::optional<Round> proposed_round;
   std::optional<Millis> executed_at;
   std::optional<Round> executed_round;
   std::optional<Millis> finalized_at;
};

struct PositionTally {
   Epoch epoch = 0;
   Digest tx;
   Round round = 0;
   bool mixed = false;
   std::set<AuthorityIndex> voters;
   std::vector<BlockRef> vote_blocks;
   std::set<AuthorityIndex> certifiers;
   std::vector<BlockRef> certificates;
};

class FastPathState {
public:
   explicit FastPathState(Committee committee) : committee_(committee) {}

   Epoch epoch() const { return epoch_; }
   bool frozen() const { return frozen_; }

   /// Stop executing and finalizing until the epoch closes.
   void freeze() { frozen_ = true; }

   LockTable& locks() { return locks_; }
   const LockTable& locks() const { return locks_; }

   /// Local vote; a rejection marks the transaction Rejected in this validator's view.
   VoteDecision vote(const Transaction& tx, Epoch epoch) {
      auto decision = locks_.decide(tx);
      if (!decision.accept) {
         auto& rec = record_for(tx, epoch);
         if (rec.status == TxStatus::Pending) rec.status = TxStatus::Rejected;
      }
      return decision;
   }

   void on_block(const Block& block, Millis now) {
      const auto& ref = block.reference();
      auto& voted = votes_by_block_[ref];

      for (std::uint32_t i = 0; i < block.transactions().size(); ++i) {
         const auto& tx = block.transactions()[i];
         if (!tx.needs_votes()) continue;
         TxPosition pos{ref, i};
         auto& tally = tallies_[pos];
         tally.epoch = block.epoch();
         tally.tx = tx.id();
         tally.round = block.round();
         tally.mixed = tx.is_mixed();
         auto& rec = record_for(tx, block.epoch());
         rec.positions.push_back(pos);
         if (!rec.proposed_round || block.round() < *rec.proposed_round) rec.proposed_round = block.round();
         voted.push_back(pos);
      }
      if (!block.parents().empty() && block.parents().front().author == block.author()) {
         auto it = votes_by_block_.find(block.parents().front());
         if (it != votes_by_block_.end())
            for (const auto& pos : it->second) {
               const auto& tally = tallies_.at(pos);
               if (tally.epoch != block.epoch()) continue;
               if (records_.at({tally.epoch, tally.tx}).status == TxStatus::Finalized) continue;
               voted.push_back(pos);
            }
      }
      for (const auto& v : block.votes()) {
         if (!v.accept) continue;
         TxPosition pos{v.block, v.index};
         auto it = tallies_.find(pos);
         if (it == tallies_.end() || it->second.epoch != block.epoch()) continue;
         voted.push_back(pos);
      }
      std::sort(voted.begin(), voted.end());
      voted.erase(std::unique(voted.begin(), voted.end()), voted.end());

      for (const auto& pos : voted) {
         auto& tally = tallies_.at(pos);
         if (tally.voters.insert(block.author()).second) tally.vote_blocks.push_back(ref);
         maybe_execute(pos, tally, block.round(), now);
      }

      if (!block.epoch_change_bit()) {
         std::map<TxPosition, std::set<AuthorityIndex>> support;
         for (const auto& p : block.parents()) {
            auto it = votes_by_block_.find(p);
            if (it == votes_by_block_.end()) continue;
            for (const auto& pos : it->second) support[pos].insert(p.author);
         }
         for (const auto& [pos, authors] : support) {
            if (authors.size() < committee_.quorum_threshold()) continue;
            auto& tally = tallies_.at(pos);
            if (tally.mixed) continue;
            tally.certificates.push_back(ref);
            tally.certifiers.insert(block.author());
            cert_index_[ref].push_back(pos);
            if (tally.certifiers.size() >= committee_.quorum_threshold() && active(tally))
               finalize(pos, tally, FinalityRoute::Certificates, now);
         }
      }
   }

   void on_commit(const CommitRecord& commit, const DagState& dag, Millis now) {
      if (frozen_) return;
      for (const auto& ref : commit.blocks) {
         auto it = cert_index_.find(ref);
         if (it == cert_index_.end()) continue;
         for (const auto& pos : it->second) {
            auto& tally = tallies_.at(pos);
            if (active(tally)) finalize(pos, tally, FinalityRoute::Commit, now);
         }
      }
      std::optional<RefSet> history;
      for (auto& [pos, tally] : tallies_) {
         if (!tally.mixed || !active(tally) || tally.voters.size() < committee_.quorum_threshold()) continue;
         auto& rec = records_.at({tally.epoch, tally.tx});
         if (rec.status == TxStatus::Finalized) continue;
         if (!history) history = causal_history(commit.leader, dag, tally.round);
         std::set<AuthorityIndex> referenced;
         for (const auto& v : tally.vote_blocks)
            if (history->contains(v)) referenced.insert(v.author);
         if (referenced.size() >= committee_.quorum_threshold()) finalize(pos, tally, FinalityRoute::Mixed, now);
      }
   }

   /// Ends the current epoch given every block committed so far. Transactions with a committed
   /// certificate are finalized; other executed ones revert; only finalized locks survive.
   void close_epoch(const RefSet& committed, Millis now) {
      for (auto& [pos, tally] : tallies_) {
         if (tally.epoch != epoch_ || tally.mixed) continue;
         bool certified = std::any_of(tally.certificates.begin(), tally.certificates.end(),
                                      [&](const BlockRef& c) { return committed.contains(c); });
         if (certified) finalize(pos, tally, FinalityRoute::EpochClose, now, /*force=*/true);
      }
      std::set<Digest> finalized_ids;
      for (auto& [key, rec] : records_) {
         if (rec.status == TxStatus::Finalized) finalized_ids.insert(rec.tx.id());
         if (key.first != epoch_) continue;
         if (rec.status == TxStatus::Executed) rec.status = TxStatus::Reverted;
      }
      locks_.retain([&](const Digest& holder) { return finalized_ids.contains(holder); });
      ++epoch_;
      frozen_ = false;
      for (auto& [pos, tally] : tallies_) {
         if (tally.epoch != epoch_) continue;
         maybe_execute(pos, tally, tally.round + 1, now);
         if (!tally.mixed && tally.certifiers.size() >= committee_.quorum_threshold())
            finalize(pos, tally, FinalityRoute::Certificates, now);
      }
   }

   const TxRecord* record(Epoch epoch, const Digest& id) const {
      auto it = records_.find({epoch, id});
      return it == records_.end() ? nullptr : &it->second;
   }

   const std::map<std::pair<Epoch, Digest>, TxRecord>& records() const { return records_; }

   const PositionTally* tally(const TxPosition& pos) const {
      auto it = tallies_.find(pos);
      return it == tallies_.end() ? nullptr : &it->second;
   }

   const std::map<TxPosition, PositionTally>& tallies() const { return tallies_; }

private:
   bool active(const PositionTally& t) const { return t.epoch == epoch_ && !frozen_; }

   TxRecord& record_for(const Transaction& tx, Epoch epoch) {
      auto [it, inserted] = records_.try_emplace({epoch, tx.id()});
      if (inserted) {
         it->second.tx = tx;
         it->second.epoch = epoch;
      }
      return it->second;
   }

   void maybe_execute(const TxPosition&, PositionTally& tally, Round round, Millis now) {
      if (tally.mixed || !active(tally) || tally.voters.size() < committee_.quorum_threshold()) return;
      auto& rec = records_.at({tally.epoch, tally.tx});
      if (rec.status != TxStatus::Pending && rec.status != TxStatus::Rejected) return;
      rec.status = TxStatus::Executed;
      rec.executed_at = now;
      rec.executed_round = round;
   }

   void finalize(const TxPosition&, PositionTally& tally, FinalityRoute route, Millis now, bool force = false) {
      if (!force && !active(tally)) return;
      auto& rec = records_.at({tally.epoch, tally.tx});
      if (rec.status == TxStatus::Finalized) return;
      if (rec.status != TxStatus::Executed) {
         rec.executed_at = now;
         if (!rec.executed_round) rec.executed_round = tally.round + 1;
      }
      rec.status = TxStatus::Finalized;
      rec.route = route;
      rec.finalized_at = now;
   }

   Committee committee_;
   Epoch epoch_ = 0;
   bool frozen_ = false;
   LockTable locks_;
   std::map<TxPosition, PositionTally> tallies_;
   std::map<std::pair<Epoch, Digest>, TxRecord> records_;
   std::unordered_map<BlockRef, std::vector<TxPosition>, BlockRefHash> votes_by_block_;
   std::unordered_map<BlockRef, std::vector<TxPosition>, BlockRefHash> cert_index_;
};

} // namespace mysticeti

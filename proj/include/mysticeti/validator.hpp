#pragma once

#include "mysticeti/committer.hpp"
#include "mysticeti/dag.hpp"
#include "mysticeti/fastpath.hpp"
#include "mysticeti/wal.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

namespace mysticeti {

enum class Behavior { Honest, SplitViews, DuplicateTx };

inline std::string_view to_string(Behavior b) {
   switch (b) {
      case Behavior::Honest: return "honest";
      case Behavior::SplitViews: return "split-views";
      case Behavior::DuplicateTx: return "duplicate-tx";
   }
   return "?";
}

struct ValidatorConfig {
   AuthorityIndex authority = 0;
   std::size_t committee_size = 4;
   DeciderConfig decider{};
   LeaderSchedule::Kind schedule = LeaderSchedule::Kind::RoundRobin;
   Millis leader_timeout = 1000;
   TimestampLimits timestamps{};
   std::size_t queue_capacity = 10000;
   std::size_t max_block_transactions = 512;
   Round max_round = 0;              // 0: no limit
   std::uint64_t epoch_length = 0;   // commits per epoch before arming; 0: never
   std::uint64_t signer_secret = 0;
   Behavior behavior = Behavior::Honest;
   bool write_ahead_log = true;
};

struct Outgoing {
   BlockPtr block;
   std::vector<AuthorityIndex> to;
};

struct SyncRequest {
   AuthorityIndex peer = 0;
   BlockRef ref;
};

struct SlotLogEntry {
   SlotStatus status;
   Round decided_at_round = 0;  // highest local round when decided
   Millis decided_at = 0;
};

struct ProposalInfo {
   Round round = 0;
   Millis at = 0;
   Millis gate_started_at = 0;
   bool timed_out = false;
   BlockRef ref;
};

struct EpochClose {
   Epoch epoch = 0;
   std::uint64_t commit_index = 0;
   Millis at = 0;
};

class Validator {
public:
   explicit Validator(ValidatorConfig cfg)
       : cfg_(cfg), committee_(cfg.committee_size), signer_(std::make_shared<KeyedHashSigner>(cfg.signer_secret)),
         committer_(committee_, cfg.decider, LeaderSchedule(cfg.committee_size, cfg.schedule)),
         dag_(DagState::with_genesis(committee_)), fastpath_(committee_) {
      own_last_ = dag_.slot_blocks(cfg.authority, 0).front()->reference();
   }

   /// Rebuilds a validator by replaying its log. Proposals are re-derived and must match
   /// the logged digests.
   static Validator recover(ValidatorConfig cfg, ByteView log) {
      Validator v(cfg);
      v.replaying_ = true;
      for (const auto& rec : read_wal(log)) {
         switch (rec.kind) {
            case WalKind::Received: v.receive(rec.block, rec.from, rec.now); break;
            case WalKind::Submitted: v.submit(rec.tx, rec.now); break;
            case WalKind::Step: v.step(rec.now); break;
            case WalKind::Proposed: v.replay_proposal(rec); break;
         }
      }
      v.replaying_ = false;
      v.outbox_.clear();
      v.sync_requests_.clear();
      return v;
   }

   // --- inputs -------------------------------------------------------------

   /// Returns the blocks accepted into the DAG by this delivery, in causal order.
   std::vector<BlockRef> receive(BlockPtr block, AuthorityIndex from, Millis now) {
      log(WalRecord::received(now, from, block));
      now_ = std::max(now_, now);
      std::vector<BlockRef> accepted;
      const auto& ref = block->reference();
      if (dag_.contains(ref) || pending_.contains(ref) || suspended_refs_.contains(ref)) return accepted;
      if (!block->is_genesis() && !signer_->verify(block->author(), block->digest(), block->signature())) {
         reject(RejectReason::BadSignature);
         return accepted;
      }
      if (auto reason = check_structure(*block, committee_)) {
         reject(*reason);
         return accepted;
      }
      std::vector<BlockRef> missing;
      for (const auto& p : block->parents())
         if (!dag_.contains(p)) missing.push_back(p);
      if (!missing.empty()) {
         pending_[ref] = {block, missing.size()};
         for (const auto& m : missing) {
            waiting_[m].push_back(ref);
            if (!pending_.contains(m) && !suspended_refs_.contains(m) && requested_.insert({m, from}).second)
               sync_requests_.push_back({from, m});
         }
         return accepted;
      }
      admit(block, now, accepted);
      return accepted;
   }

   bool submit(Transaction tx, Millis now) {
      log(WalRecord::submitted(now, tx));
      now_ = std::max(now_, now);
      if (queue_.size() >= cfg_.queue_capacity) return false;
      queue_.push_back(std::move(tx));
      return true;
   }

   /// Timers, commit rule and block production. Returns new commits.
   std::vector<CommitRecord> step(Millis now) {
      log(WalRecord::step(now));
      now_ = std::max(now_, now);
      std::vector<BlockRef> accepted;
      while (!timed_.empty() && timed_.begin()->first <= now) {
         auto block = timed_.begin()->second;
         timed_.erase(timed_.begin());
         suspended_refs_.erase(block->reference());
         admit(block, now, accepted);
      }
      auto commits = try_commit(now);
      if (!replaying_ && proposal_due(now)) {
         auto ref = propose(now);
         log(WalRecord::proposed(now, ref.digest));
         auto more = try_commit(now);
         commits.insert(commits.end(), more.begin(), more.end());
      }
      return commits;
   }

   std::optional<Millis> next_deadline() const {
      std::optional<Millis> deadline;
      if (!timed_.empty()) deadline = timed_.begin()->first;
      if (round_open()) {
         auto gate = gate_started_at_ + cfg_.leader_timeout;
         if (!deadline || gate < *deadline) deadline = gate;
      }
      return deadline;
   }

   std::vector<Outgoing> take_outbox() { return std::exchange(outbox_, {}); }
   std::vector<SyncRequest> take_sync_requests() { return std::exchange(sync_requests_, {}); }

   // --- observers ----------------------------------------------------------

   AuthorityIndex authority() const { return cfg_.authority; }
   const ValidatorConfig& config() const { return cfg_; }
   const Committee& committee() const { return committee_; }
   const Committer& committer() const { return committer_; }
   const DagState& dag() const { return dag_; }
   const std::vector<CommitRecord>& commits() const { return commits_; }
   const std::vector<Millis>& commit_times() const { return commit_times_; }
   const std::vector<SlotLogEntry>& slot_log() const { return slot_log_; }
   const FastPathState& fastpath() const { return fastpath_; }
   const std::vector<ProposalInfo>& proposals() const { return proposals_; }
   const std::vector<EpochClose>& epoch_closes() const { return epoch_closes_; }
   const std::map<RejectReason, std::size_t>& rejected() const { return rejected_; }
   const WriteAheadLog& wal() const { return wal_; }
   Round threshold_round() const { return threshold_round_; }
   Round last_proposed_round() const { return last_proposed_round_; }
   const BlockRef& last_own_block() const { return own_last_; }
   std::size_t pending_count() const { return pending_.size() + timed_.size(); }
   std::size_t queue_size() const { return queue_.size(); }

   /// Decides and sequences whatever the current DAG allows.
   std::vector<CommitRecord> try_commit(Millis now) {
      std::vector<CommitRecord> out;
      for (const auto& status : committer_.try_decide(cursor_, dag_)) {
         cursor_ = status.slot;
         slot_log_.push_back({status, dag_.highest_round(), now});
         auto rec = sequencer_.sequence(status, dag_);
         if (!rec) continue;
         commits_.push_back(*rec);
         commit_times_.push_back(now);
         on_commit(*rec, now);
         out.push_back(std::move(*rec));
      }
      return out;
   }

private:
   void log(const WalRecord& rec) {
      if (cfg_.write_ahead_log) wal_.append(rec);
   }

   void reject(RejectReason r) { ++rejected_[r]; }

   void admit(const BlockPtr& block, Millis now, std::vector<BlockRef>& accepted) {
      std::vector<BlockPtr> ready{block};
      while (!ready.empty()) {
         auto b = ready.back();
         ready.pop_back();
         auto verdict = verify_block(*b, committee_, dag_, now, cfg_.timestamps);
         if (verdict.suspended()) {
            timed_.emplace(verdict.until, b);
            suspended_refs_.insert(b->reference());
            continue;
         }
         if (verdict.rejected()) {
            reject(verdict.reason);
            continue;
         }
         if (!dag_.insert(b)) continue;
         accepted.push_back(b->reference());
         on_accept(*b, now);
         auto it = waiting_.find(b->reference());
         if (it == waiting_.end()) continue;
         for (const auto& child : it->second) {
            auto pit = pending_.find(child);
            if (pit == pending_.end()) continue;
            if (--pit->second.missing == 0) {
               ready.push_back(pit->second.block);
               pending_.erase(pit);
            }
         }
         waiting_.erase(it);
      }
   }

   void on_accept(const Block& b, Millis now) {
      fastpath_.on_block(b, now);
      if (b.author() != cfg_.authority)
         for (std::uint32_t i = 0; i < b.transactions().size(); ++i)
            if (b.transactions()[i].needs_votes()) vote_queue_.push_back({b.reference(), i});
      while (dag_.distinct_authors_at(threshold_round_ + 1) >= committee_.quorum_threshold()) {
         ++threshold_round_;
         gate_started_at_ = now;
      }
   }

   void on_commit(const CommitRecord& rec, Millis now) {
      fastpath_.on_commit(rec, dag_, now);
      ++commits_in_epoch_;
      auto epoch = fastpath_.epoch();
      for (const auto& ref : rec.blocks) {
         const auto& b = dag_.at(ref);
         if (b.epoch_change_bit() && b.epoch() == epoch) closers_[epoch].insert(b.author());
      }
      if (!fastpath_.frozen() && cfg_.epoch_length > 0 && commits_in_epoch_ >= cfg_.epoch_length) fastpath_.freeze();
      if (closers_[epoch].size() >= committee_.quorum_threshold()) {
         fastpath_.freeze();
         fastpath_.close_epoch(sequencer_.delivered(), now);
         epoch_closes_.push_back({epoch, rec.index, now});
         commits_in_epoch_ = 0;
      }
   }

   // --- proposing ----------------------------------------------------------

   Round next_round() const { return threshold_round_ + 1; }

   bool round_open() const {
      auto r = next_round();
      return r > last_proposed_round_ && (cfg_.max_round == 0 || r <= cfg_.max_round);
   }

   bool proposal_due(Millis now) const {
      if (!round_open()) return false;
      if (now >= gate_started_at_ + cfg_.leader_timeout) return true;
      auto r = next_round();
      const auto& schedule = committer_.schedule();
      bool leader_ready = !dag_.slot_blocks(schedule.proposer(r - 1, 0), r - 1).empty();
      if (!leader_ready) return false;
      if (r < 3) return true;
      auto leaders = dag_.slot_blocks(schedule.proposer(r - 2, 0), r - 2);
      if (leaders.empty()) return true;
      for (const auto& leader : leaders) {
         std::set<AuthorityIndex> voters;
         for (const auto& b : dag_.blocks_at(r - 1))
            if (is_vote(*b, *leader, dag_)) voters.insert(b->author());
         if (voters.size() >= committee_.quorum_threshold()) return true;
      }
      return false;
   }

   BlockContents build_contents(Millis now) {
      auto r = next_round();
      BlockContents c;
      c.epoch = fastpath_.epoch();
      c.author = cfg_.authority;
      c.round = r;
      c.epoch_change_bit = fastpath_.frozen();

      c.parents.push_back(own_last_);
      for (const auto& b : dag_.blocks_at(r - 1))
         if (b->author() != cfg_.authority) c.parents.push_back(b->reference());
      for (const auto& tip : dag_.tips())
         if (tip.round + 1 < r && tip.author != cfg_.authority) c.parents.push_back(tip);

      Millis ts = now;
      for (const auto& p : c.parents) ts = std::max(ts, dag_.at(p).timestamp());
      c.timestamp = ts;

      std::deque<Transaction> held;
      while (!queue_.empty() && c.transactions.size() < cfg_.max_block_transactions) {
         auto tx = std::move(queue_.front());
         queue_.pop_front();
         if (tx.needs_votes()) {
            if (fastpath_.frozen()) {
               held.push_back(std::move(tx));
               continue;
            }
            if (!fastpath_.vote(tx, c.epoch).accept) continue;
         }
         c.transactions.push_back(std::move(tx));
      }
      queue_.insert(queue_.begin(), std::make_move_iterator(held.begin()), std::make_move_iterator(held.end()));

      Round oldest = r;
      for (const auto& pos : vote_queue_) oldest = std::min(oldest, pos.block.round);
      RefSet history;
      if (!vote_queue_.empty())
         for (const auto& p : c.parents)
            if (!history.contains(p)) history.merge(causal_history(p, dag_, oldest));

      std::deque<TxPosition> deferred;
      for (auto& pos : vote_queue_) {
         const auto& target = dag_.at(pos.block);
         if (target.epoch() < c.epoch) continue;
         if (target.epoch() > c.epoch || fastpath_.frozen() || !history.contains(pos.block)) {
            deferred.push_back(pos);
            continue;
         }
         if (fastpath_.vote(target.transactions()[pos.index], c.epoch).accept)
            c.votes.push_back({pos.block, pos.index, true});
      }
      vote_queue_ = std::move(deferred);
      return c;
   }

   /// Variant sent to the second half of the committee (split-views) or to everyone (duplicate-tx).
   BlockContents equivocating_variant(const BlockContents& honest) const {
      BlockContents c = honest;
      auto marker = "equivocation:" + std::to_string(c.author) + ":" + std::to_string(c.round);
      c.transactions.emplace_back(std::vector<ObjectRef>{}, false, Bytes(marker.begin(), marker.end()));
      if (cfg_.behavior == Behavior::DuplicateTx) {
         for (const auto& tx : honest.transactions) c.transactions.push_back(tx);
         c.votes.clear();
         for (const auto& p : c.parents) {
            const auto& b = dag_.at(p);
            if (b.author() == cfg_.authority || b.epoch() != c.epoch) continue;
            for (std::uint32_t i = 0; i < b.transactions().size(); ++i)
               if (b.transactions()[i].needs_votes()) c.votes.push_back({p, i, true});
         }
      }
      return c;
   }

   BlockRef propose(Millis now) {
      auto r = next_round();
      bool timed_out = now >= gate_started_at_ + cfg_.leader_timeout;
      auto contents = build_contents(now);
      BlockPtr variant;
      if (cfg_.behavior != Behavior::Honest) variant = Block::make(equivocating_variant(contents), *signer_);
      auto block = Block::make(std::move(contents), *signer_);
      install(block, now);
      if (variant) install(variant, now);

      std::vector<AuthorityIndex> peers;
      for (AuthorityIndex a = 0; a < committee_.size(); ++a)
         if (a != cfg_.authority) peers.push_back(a);
      if (cfg_.behavior == Behavior::SplitViews) {
         auto half = (peers.size() + 1) / 2;
         outbox_.push_back({block, {peers.begin(), peers.begin() + static_cast<std::ptrdiff_t>(half)}});
         outbox_.push_back({variant, {peers.begin() + static_cast<std::ptrdiff_t>(half), peers.end()}});
      } else {
         outbox_.push_back({block, peers});
         if (variant) outbox_.push_back({variant, peers});
      }
      proposals_.push_back({r, now, gate_started_at_, timed_out, block->reference()});
      last_proposed_round_ = r;
      own_last_ = block->reference();
      return block->reference();
   }

   void install(const BlockPtr& block, Millis now) {
      if (!dag_.insert(block)) return;
      on_accept(*block, now);
   }

   void replay_proposal(const WalRecord& rec) {
      auto ref = propose(rec.now);
      if (ref.digest != rec.digest)
         throw WalCorrupt("replayed proposal for round " + std::to_string(ref.round) + " diverges from the log");
      log(WalRecord::proposed(rec.now, ref.digest));
      try_commit(rec.now);
   }

   struct Pending {
      BlockPtr block;
      std::size_t missing = 0;
   };

   struct RequestKey {
      BlockRef ref;
      AuthorityIndex peer;
      auto operator<=>(const RequestKey&) const = default;
   };

   ValidatorConfig cfg_;
   Committee committee_;
   std::shared_ptr<const Signer> signer_;
   Committer committer_;
   DagState dag_;
   CommitSequencer sequencer_;
   FastPathState fastpath_;
   WriteAheadLog wal_;
   bool replaying_ = false;
   Millis now_ = 0;

   std::map<BlockRef, Pending> pending_;
   std::map<BlockRef, std::vector<BlockRef>> waiting_;
   std::multimap<Millis, BlockPtr> timed_;
   std::set<BlockRef> suspended_refs_;
   std::set<RequestKey> requested_;

   Round threshold_round_ = 0;
   Millis gate_started_at_ = 0;
   Round last_proposed_round_ = 0;
   BlockRef own_last_;
   std::deque<Transaction> queue_;
   std::deque<TxPosition> vote_queue_;

   std::optional<Slot> cursor_;
   std::vector<SlotLogEntry> slot_log_;
   std::vector<CommitRecord> commits_;
   std::vector<Millis> commit_times_;
   std::uint64_t commits_in_epoch_ = 0;
   std::map<Epoch, std::set<AuthorityIndex>> closers_;
   std::vector<EpochClose> epoch_closes_;

   std::vector<Outgoing> outbox_;
   std::vector<SyncRequest> sync_requests_;
   std::vector<ProposalInfo> proposals_;
   std::map<RejectReason, std::size_t> rejected_;
};

} // namespace mysticeti

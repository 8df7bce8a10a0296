#pragma once

#include "mysticeti/validator.hpp"

#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace mysticeti {

// ---------------------------------------------------------------------------
// Randomness. Every consumer draws from its own mt19937_64 stream keyed by
// (seed, purpose, authority), so adding a fault does not shift latency draws.
// Sampling is done by hand because std distributions are not portable across
// standard libraries.

inline std::uint64_t splitmix64(std::uint64_t x) {
   x += 0x9e3779b97f4a7c15ULL;
   x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
   x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
   return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Latency = 1, Workload = 2, Faults = 3, Fuzz = 4, Dag = 5 };

class Rng {
public:
   explicit Rng(std::uint64_t seed) : engine_(seed) {}
   Rng(std::uint64_t seed, Stream purpose, std::uint64_t index = 0)
       : engine_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(purpose) * 0x100000001b3ULL ^
                                              splitmix64(index)))) {}

   std::uint64_t next() { return engine_(); }

   /// Uniform in [lo, hi], by rejection.
   std::uint64_t uniform(std::uint64_t lo, std::uint64_t hi) {
      if (hi <= lo) return lo;
      auto span = hi - lo;
      if (span == ~std::uint64_t{0}) return next();
      auto range = span + 1;
      auto limit = ~std::uint64_t{0} - (~std::uint64_t{0} % range);
      std::uint64_t x;
      do x = next();
      while (x >= limit);
      return lo + x % range;
   }

   double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
   bool chance(double p) { return unit() < p; }

private:
   std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Configuration

struct LatencyBounds {
   Millis min = 50;
   Millis max = 50;
};

struct PairLatency {
   AuthorityIndex from = 0;
   AuthorityIndex to = 0;
   LatencyBounds bounds;
};

struct FaultSpec {
   enum class Kind { Crash, Mute, Equivocate };
   AuthorityIndex authority = 0;
   Kind kind = Kind::Crash;
   Millis at = 0;
   Behavior strategy = Behavior::SplitViews;
};

inline std::string_view to_string(FaultSpec::Kind k) {
   switch (k) {
      case FaultSpec::Kind::Crash: return "crash";
      case FaultSpec::Kind::Mute: return "mute";
      case FaultSpec::Kind::Equivocate: return "equivocate";
   }
   return "?";
}

struct Workload {
   double tx_per_second = 0;
   Millis start = 0;
   Millis stop = 0;
   double conflict_rate = 0;  // fraction of arrivals that are an equivocating client's conflicting pair
   double mixed_rate = 0;     // owned plus shared inputs
   double shared_rate = 0;    // shared inputs only
   bool resubmit_after_close = true;
};

/// Crash a validator just before its `batch`-th input batch and immediately rebuild it from its log.
struct RecoveryPoint {
   AuthorityIndex authority = 0;
   std::uint64_t batch = 0;
   bool tear_tail = false;
};

struct SimConfig {
   std::uint64_t seed = 0;
   std::size_t n = 4;
   LatencyBounds latency{};
   std::vector<PairLatency> pair_latency;
   Millis gst = 0;
   Millis delta = 0;  // 0: the largest configured max latency
   Round max_round = 20;
   Millis time_limit = 0;  // 0: derived from the other settings
   Millis leader_timeout = 1000;
   DeciderConfig decider{};
   LeaderSchedule::Kind schedule = LeaderSchedule::Kind::RoundRobin;
   TimestampLimits timestamps{};
   std::uint64_t epoch_length = 0;
   std::size_t queue_capacity = 10000;
   Workload workload{};
   std::vector<FaultSpec> faults;
   bool allow_beyond_f = false;
   std::optional<RecoveryPoint> recovery;
   bool write_ahead_log = false;
   bool trace = false;

   Millis effective_delta() const {
      if (delta) return delta;
      Millis d = latency.max;
      for (const auto& p : pair_latency) d = std::max(d, p.bounds.max);
      return d;
   }

   Millis effective_time_limit() const {
      if (time_limit) return time_limit;
      return gst + effective_delta() + (max_round + 20) * (2 * leader_timeout + 4 * effective_delta() + 10);
   }

   std::set<AuthorityIndex> faulty() const {
      std::set<AuthorityIndex> out;
      for (const auto& f : faults) out.insert(f.authority);
      return out;
   }

   void validate() const {
      Committee committee(n);
      decider.validate(committee);
      auto check_bounds = [&](const LatencyBounds& b) {
         if (b.min < 1) throw std::invalid_argument("latency min must be at least 1 ms");
         if (b.max < b.min) throw std::invalid_argument("latency max below min");
         if (b.max > effective_delta()) throw std::invalid_argument("latency max exceeds delta");
      };
      check_bounds(latency);
      for (const auto& p : pair_latency) {
         if (!committee.contains(p.from) || !committee.contains(p.to))
            throw std::invalid_argument("pair latency names an unknown authority");
         check_bounds(p.bounds);
      }
      for (const auto& f : faults)
         if (!committee.contains(f.authority)) throw std::invalid_argument("fault names an unknown authority");
      if (faulty().size() > committee.max_faulty() && !allow_beyond_f)
         throw std::invalid_argument("more than f faulty authorities; set allow_beyond_f for such runs");
      if (leader_timeout == 0) throw std::invalid_argument("leader_timeout must be positive");
      if (workload.tx_per_second < 0 || workload.conflict_rate < 0 || workload.conflict_rate > 1 ||
          workload.mixed_rate < 0 || workload.shared_rate < 0 ||
          workload.mixed_rate + workload.shared_rate > 1)
         throw std::invalid_argument("bad workload rates");
      if (recovery) {
         if (!committee.contains(recovery->authority)) throw std::invalid_argument("recovery names an unknown authority");
         if (faulty().contains(recovery->authority)) throw std::invalid_argument("recovery target must be honest");
      }
   }
};

// ---------------------------------------------------------------------------
// Outputs

struct TraceEvent {
   enum class Kind { Send, Deliver, Propose, Commit, Crash, Recover, Submit };
   Millis at = 0;
   Kind kind = Kind::Send;
   AuthorityIndex from = 0;
   AuthorityIndex to = 0;
   BlockRef ref;
};

inline std::string_view to_string(TraceEvent::Kind k) {
   switch (k) {
      case TraceEvent::Kind::Send: return "send";
      case TraceEvent::Kind::Deliver: return "deliver";
      case TraceEvent::Kind::Propose: return "propose";
      case TraceEvent::Kind::Commit: return "commit";
      case TraceEvent::Kind::Crash: return "crash";
      case TraceEvent::Kind::Recover: return "recover";
      case TraceEvent::Kind::Submit: return "submit";
   }
   return "?";
}

struct SlotMetric {
   AuthorityIndex validator = 0;
   Slot slot;
   Decision decision = Decision::Undecided;
   bool direct = false;
   Round depth = 0;
   Millis decided_at = 0;
   std::optional<Millis> latency;  // commit time minus proposal timestamp
};

struct TxMetric {
   AuthorityIndex validator = 0;
   Digest tx;
   Epoch epoch = 0;
   TxStatus status = TxStatus::Pending;
   FinalityRoute route = FinalityRoute::None;
   Millis submitted_at = 0;
   std::optional<Millis> execute_latency;
   std::optional<Millis> finalize_latency;
   std::optional<Round> proposed_round;
   std::optional<Round> executed_round;
};

struct Metrics {
   std::vector<SlotMetric> slots;
   std::vector<TxMetric> transactions;
   std::map<Round, std::size_t> commits_per_round;  // by leader round, first honest validator
   std::map<Round, std::size_t> blocks_per_round;   // union of honest views
   std::map<RejectReason, std::size_t> rejected;
   std::uint64_t events = 0;
   std::uint64_t messages = 0;
   Millis end_time = 0;
};

struct ConflictPair {
   Transaction first;
   Transaction second;
   Millis submitted_at = 0;
   bool resubmitted = false;
};

struct SimResult {
   SimConfig config;
   std::vector<Validator> validators;
   std::set<AuthorityIndex> honest;
   std::map<AuthorityIndex, Millis> crashed_at;
   Metrics metrics;
   std::vector<TraceEvent> trace;
   std::map<Digest, Millis> submitted_at;
   std::vector<ConflictPair> conflicts;
   std::vector<Digest> resubmissions;
   bool recovered = false;
};

// ---------------------------------------------------------------------------

class Simulator {
public:
   explicit Simulator(SimConfig cfg)
       : cfg_(std::move(cfg)), committee_((cfg_.validate(), cfg_.n)), delta_(cfg_.effective_delta()),
         limit_(cfg_.effective_time_limit()) {
      for (const auto& f : cfg_.faults) {
         if (f.kind == FaultSpec::Kind::Crash) {
            auto [it, fresh] = crash_at_.try_emplace(f.authority, f.at);
            if (!fresh) it->second = std::min(it->second, f.at);
         }
         if (f.kind == FaultSpec::Kind::Mute) mute_at_[f.authority] = f.at;
      }
      auto faulty = cfg_.faulty();
      for (AuthorityIndex a = 0; a < committee_.size(); ++a) {
         validators_.emplace_back(validator_config(a));
         latency_rng_.emplace_back(cfg_.seed, Stream::Latency, a);
         if (!faulty.contains(a)) honest_.insert(a);
      }
      batches_.assign(committee_.size(), 0);
      timers_.resize(committee_.size());
   }

   ValidatorConfig validator_config(AuthorityIndex a) const {
      ValidatorConfig v;
      v.authority = a;
      v.committee_size = cfg_.n;
      v.decider = cfg_.decider;
      v.schedule = cfg_.schedule;
      v.leader_timeout = cfg_.leader_timeout;
      v.timestamps = cfg_.timestamps;
      v.queue_capacity = cfg_.queue_capacity;
      v.max_round = cfg_.max_round;
      v.epoch_length = cfg_.epoch_length;
      v.signer_secret = cfg_.seed;
      v.write_ahead_log = cfg_.write_ahead_log || cfg_.recovery.has_value();
      for (const auto& f : cfg_.faults)
         if (f.authority == a && f.kind == FaultSpec::Kind::Equivocate) v.behavior = f.strategy;
      return v;
   }

   SimResult run() {
      for (AuthorityIndex a = 0; a < committee_.size(); ++a) push({0, 0, Event::Kind::Timer, a, a, nullptr, {}, {}});
      schedule_workload();

      while (!queue_.empty()) {
         auto t = queue_.top().at;
         if (t > limit_) break;
         std::map<AuthorityIndex, std::vector<Event>> batch;
         while (!queue_.empty() && queue_.top().at == t) {
            batch[queue_.top().to].push_back(queue_.top());
            queue_.pop();
         }
         for (auto& [a, events] : batch) process(a, events, t);
         resubmit_conflicts(t);
         now_ = t;
      }
      return finish();
   }

private:
   struct Event {
      enum class Kind { Deliver, Sync, Submit, Timer };
      Millis at = 0;
      std::uint64_t seq = 0;
      Kind kind = Kind::Timer;
      AuthorityIndex to = 0;
      AuthorityIndex from = 0;
      BlockPtr block;
      BlockRef ref;
      Transaction tx;
   };

   struct Later {
      bool operator()(const Event& a, const Event& b) const {
         if (a.at != b.at) return a.at > b.at;
         return a.seq > b.seq;
      }
   };

   void push(Event e) {
      e.seq = seq_++;
      queue_.push(std::move(e));
   }

   bool crashed(AuthorityIndex a, Millis t) const {
      auto it = crash_at_.find(a);
      return it != crash_at_.end() && t >= it->second;
   }

   bool muted(AuthorityIndex a, Millis t) const {
      auto it = mute_at_.find(a);
      return it != mute_at_.end() && t >= it->second;
   }

   LatencyBounds bounds(AuthorityIndex from, AuthorityIndex to) const {
      for (const auto& p : cfg_.pair_latency)
         if (p.from == from && p.to == to) return p.bounds;
      return cfg_.latency;
   }

   Millis sample_latency(AuthorityIndex from, AuthorityIndex to, Millis send) {
      auto b = bounds(from, to);
      Millis hi = b.max;
      if (send < cfg_.gst) hi = std::max(hi, cfg_.gst + delta_ - send);
      return std::max<Millis>(1, latency_rng_[from].uniform(b.min, hi));
   }

   void send_block(AuthorityIndex from, AuthorityIndex to, const BlockPtr& block, Millis t) {
      auto at = t + sample_latency(from, to, t);
      ++metrics_.messages;
      record({t, TraceEvent::Kind::Send, from, to, block->reference()});
      push({at, 0, Event::Kind::Deliver, to, from, block, {}, {}});
   }

   void record(TraceEvent e) {
      if (cfg_.trace) trace_.push_back(std::move(e));
   }

   void process(AuthorityIndex a, std::vector<Event>& events, Millis t) {
      for (auto& e : events)
         if (e.kind == Event::Kind::Timer) timers_[a].erase(e.at);
      if (crashed(a, t)) {
         if (!crash_recorded_.contains(a)) {
            crash_recorded_.insert(a);
            record({crash_at_.at(a), TraceEvent::Kind::Crash, a, a, {}});
         }
         return;
      }
      if (cfg_.recovery && cfg_.recovery->authority == a && batches_[a] == cfg_.recovery->batch && !recovered_) {
         Bytes log = validators_[a].wal().bytes();
         if (cfg_.recovery->tear_tail) {
            auto extra = frame_wal_record(WalRecord::step(t));
            log.insert(log.end(), extra.begin(), extra.begin() + static_cast<std::ptrdiff_t>(extra.size() / 2));
         }
         validators_[a] = Validator::recover(validator_config(a), log);
         recovered_ = true;
         record({t, TraceEvent::Kind::Recover, a, a, {}});
      }
      ++batches_[a];
      auto& v = validators_[a];
      for (auto& e : events) {
         ++metrics_.events;
         switch (e.kind) {
            case Event::Kind::Deliver:
               record({t, TraceEvent::Kind::Deliver, e.from, a, e.block->reference()});
               v.receive(e.block, e.from, t);
               break;
            case Event::Kind::Submit:
               record({t, TraceEvent::Kind::Submit, a, a, {}});
               v.submit(e.tx, t);
               break;
            case Event::Kind::Sync:
               if (!muted(a, t))
                  if (auto b = v.dag().get(e.ref)) send_block(a, e.from, b, t);
               break;
            case Event::Kind::Timer: break;
         }
      }
      auto proposed_before = v.proposals().size();
      auto commits = v.step(t);
      for (std::size_t i = proposed_before; i < v.proposals().size(); ++i)
         record({t, TraceEvent::Kind::Propose, a, a, v.proposals()[i].ref});
      for (const auto& c : commits) record({t, TraceEvent::Kind::Commit, a, a, c.leader});

      for (auto& out : v.take_outbox()) {
         if (muted(a, t)) continue;
         for (auto to : out.to) send_block(a, to, out.block, t);
      }
      for (auto& req : v.take_sync_requests()) {
         if (muted(a, t)) continue;
         push({t + sample_latency(a, req.peer, t), 0, Event::Kind::Sync, req.peer, a, nullptr, req.ref, {}});
      }
      if (auto deadline = v.next_deadline(); deadline && *deadline > t && timers_[a].insert(*deadline).second)
         push({*deadline, 0, Event::Kind::Timer, a, a, nullptr, {}, {}});
   }

   std::vector<AuthorityIndex> honest_targets() const { return {honest_.begin(), honest_.end()}; }

   void schedule_workload() {
      const auto& w = cfg_.workload;
      if (w.tx_per_second <= 0 || honest_.empty()) return;
      Rng rng(cfg_.seed, Stream::Workload);
      auto targets = honest_targets();
      Millis stop = w.stop ? w.stop : limit_;
      if (stop <= w.start) return;
      auto count = static_cast<std::uint64_t>(w.tx_per_second * static_cast<double>(stop - w.start) / 1000.0);
      std::vector<Millis> times;
      for (std::uint64_t i = 0; i < count; ++i) times.push_back(rng.uniform(w.start, stop - 1));
      std::sort(times.begin(), times.end());
      std::uint64_t next_object = 1;
      std::uint64_t counter = 0;
      auto payload = [&] {
         auto s = "tx:" + std::to_string(cfg_.seed) + ":" + std::to_string(counter++);
         return Bytes(s.begin(), s.end());
      };
      for (auto t : times) {
         auto i = rng.uniform(0, targets.size() - 1);
         auto target = targets[i];
         if (targets.size() >= 2 && rng.chance(w.conflict_rate)) {
            ObjectRef obj{next_object++, 0};
            Transaction a({obj}, false, payload());
            Transaction b({obj}, false, payload());
            auto j = rng.uniform(0, targets.size() - 2);
            if (j >= i) ++j;
            auto other = targets[j];
            submit_at(target, a, t);
            submit_at(other, b, t);
            conflicts_.push_back({a, b, t, false});
            continue;
         }
         auto kind = rng.unit();
         if (kind < w.shared_rate) {
            submit_at(target, Transaction({}, true, payload()), t);
         } else if (kind < w.shared_rate + w.mixed_rate) {
            submit_at(target, Transaction({ObjectRef{next_object++, 0}}, true, payload()), t);
         } else {
            submit_at(target, Transaction({ObjectRef{next_object++, 0}}, false, payload()), t);
         }
      }
   }

   void submit_at(AuthorityIndex to, const Transaction& tx, Millis t) {
      submitted_.try_emplace(tx.id(), t);
      push({t, 0, Event::Kind::Submit, to, to, nullptr, {}, tx});
   }

   /// After an epoch closes, the client of each equivocated pair retries its first variant, and
   /// keeps retrying after later closes until one variant finalizes. A variant still queued
   /// somewhere enters the next epoch on its own, so no retry is sent while one is unseen.
   void resubmit_conflicts(Millis t) {
      if (!cfg_.workload.resubmit_after_close || conflicts_.empty()) return;
      std::optional<AuthorityIndex> target;
      for (auto a : honest_)
         if (!crashed(a, t)) {
            target = a;
            break;
         }
      if (!target) return;
      const auto& v = validators_[*target];
      if (v.epoch_closes().size() <= seen_closes_) return;
      seen_closes_ = v.epoch_closes().size();
      auto closed = v.epoch_closes().back().epoch;
      for (auto& pair : conflicts_) {
         bool finalized = false, seen_first = false, seen_second = false;
         for (Epoch e = 0; e <= closed; ++e) {
            const auto* a = v.fastpath().record(e, pair.first.id());
            const auto* b = v.fastpath().record(e, pair.second.id());
            finalized = finalized || (a && a->status == TxStatus::Finalized) || (b && b->status == TxStatus::Finalized);
            seen_first = seen_first || a;
            seen_second = seen_second || b;
         }
         if (finalized || !seen_first || !seen_second) continue;
         if (pair.resubmitted && !v.fastpath().record(closed, pair.first.id())) continue;
         if (!pair.resubmitted) resubmissions_.push_back(pair.first.id());
         pair.resubmitted = true;
         push({t + 1, 0, Event::Kind::Submit, *target, *target, nullptr, {}, pair.first});
      }
   }

   SimResult finish() {
      SimResult out;
      out.config = cfg_;
      out.honest = honest_;
      for (const auto& [a, t] : crash_at_) out.crashed_at[a] = t;
      metrics_.end_time = now_;
      collect_metrics();
      out.metrics = std::move(metrics_);
      out.trace = std::move(trace_);
      out.submitted_at = std::move(submitted_);
      out.conflicts = std::move(conflicts_);
      out.resubmissions = std::move(resubmissions_);
      out.recovered = recovered_;
      out.validators = std::move(validators_);
      return out;
   }

   void collect_metrics() {
      bool first = true;
      std::set<BlockRef> all_blocks;
      for (auto a : honest_) {
         const auto& v = validators_[a];
         for (const auto& [reason, count] : v.rejected()) metrics_.rejected[reason] += count;
         for (const auto& b : v.dag().blocks()) all_blocks.insert(b->reference());
         std::map<BlockRef, Millis> commit_time;
         for (std::size_t i = 0; i < v.commits().size(); ++i) commit_time[v.commits()[i].leader] = v.commit_times()[i];
         for (const auto& entry : v.slot_log()) {
            SlotMetric m;
            m.validator = a;
            m.slot = entry.status.slot;
            m.decision = entry.status.decision;
            m.direct = entry.status.direct;
            m.depth = entry.decided_at_round - entry.status.slot.round;
            m.decided_at = entry.decided_at;
            if (entry.status.block) m.latency = entry.decided_at - v.dag().at(*entry.status.block).timestamp();
            metrics_.slots.push_back(m);
         }
         if (first)
            for (const auto& c : v.commits()) ++metrics_.commits_per_round[c.leader.round];
         first = false;
         for (const auto& [key, rec] : v.fastpath().records()) {
            TxMetric m;
            m.validator = a;
            m.tx = key.second;
            m.epoch = key.first;
            m.status = rec.status;
            m.route = rec.route;
            auto it = submitted_.find(key.second);
            m.submitted_at = it == submitted_.end() ? 0 : it->second;
            if (rec.executed_at) m.execute_latency = *rec.executed_at - std::min(*rec.executed_at, m.submitted_at);
            if (rec.finalized_at) m.finalize_latency = *rec.finalized_at - std::min(*rec.finalized_at, m.submitted_at);
            m.proposed_round = rec.proposed_round;
            m.executed_round = rec.executed_round;
            metrics_.transactions.push_back(m);
         }
      }
      for (const auto& r : all_blocks) ++metrics_.blocks_per_round[r.round];
   }

   SimConfig cfg_;
   Committee committee_;
   Millis delta_;
   Millis limit_;
   std::vector<Validator> validators_;
   std::vector<Rng> latency_rng_;
   std::set<AuthorityIndex> honest_;
   std::map<AuthorityIndex, Millis> crash_at_;
   std::map<AuthorityIndex, Millis> mute_at_;
   std::set<AuthorityIndex> crash_recorded_;
   std::priority_queue<Event, std::vector<Event>, Later> queue_;
   std::uint64_t seq_ = 0;
   std::vector<std::uint64_t> batches_;
   std::vector<std::set<Millis>> timers_;
   Millis now_ = 0;
   bool recovered_ = false;
   std::size_t seen_closes_ = 0;
   Metrics metrics_;
   std::vector<TraceEvent> trace_;
   std::map<Digest, Millis> submitted_;
   std::vector<ConflictPair> conflicts_;
   std::vector<Digest> resubmissions_;
};

inline SimResult run_simulation(const SimConfig& cfg) { return Simulator(cfg).run(); }

} // namespace mysticeti

#pragma once

#include "mysticeti/checker.hpp"

namespace mysticeti {

enum class FuzzProfile { Consensus, FastPath };

/// A random adversarial configuration. Faults never exceed f in total.
inline SimConfig random_config(std::uint64_t seed, FuzzProfile profile = FuzzProfile::Consensus) {
   Rng rng(seed, Stream::Fuzz);
   SimConfig c;
   c.seed = seed;
   c.n = rng.chance(0.5) ? 4 : 7;
   Committee committee(c.n);
   c.latency.min = rng.uniform(1, 40);
   c.latency.max = c.latency.min + rng.uniform(0, 250);
   if (rng.chance(0.3)) {
      PairLatency slow;
      slow.from = static_cast<AuthorityIndex>(rng.uniform(0, c.n - 1));
      slow.to = static_cast<AuthorityIndex>(rng.uniform(0, c.n - 1));
      slow.bounds.min = c.latency.min;
      slow.bounds.max = c.latency.max + rng.uniform(0, 400);
      c.pair_latency.push_back(slow);
   }
   c.gst = rng.chance(0.5) ? 0 : rng.uniform(200, 3000);
   c.leader_timeout = rng.uniform(150, 1000);
   c.decider.num_of_proposers = static_cast<std::uint32_t>(rng.uniform(1, c.n));
   c.decider.wave_length = static_cast<std::uint32_t>(rng.uniform(3, 4));
   c.schedule = rng.chance(0.8) ? LeaderSchedule::Kind::RoundRobin : LeaderSchedule::Kind::Fixed;
   c.max_round = rng.uniform(10, 24);
   c.trace = true;

   std::vector<AuthorityIndex> pool(c.n);
   for (std::size_t i = 0; i < c.n; ++i) pool[i] = static_cast<AuthorityIndex>(i);
   for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.uniform(0, i - 1)]);
   std::size_t budget = committee.max_faulty();
   std::size_t used = 0;
   if (rng.chance(0.5)) {
      FaultSpec eq;
      eq.authority = pool[used++];
      eq.kind = FaultSpec::Kind::Equivocate;
      eq.strategy = profile == FuzzProfile::FastPath && rng.chance(0.5) ? Behavior::DuplicateTx : Behavior::SplitViews;
      c.faults.push_back(eq);
   }
   auto crashes = rng.uniform(0, budget - used);
   for (std::uint64_t i = 0; i < crashes; ++i) {
      FaultSpec f;
      f.authority = pool[used++];
      f.kind = rng.chance(0.8) ? FaultSpec::Kind::Crash : FaultSpec::Kind::Mute;
      f.at = rng.chance(0.5) ? 0 : rng.uniform(0, 3000);
      c.faults.push_back(f);
   }

   if (profile == FuzzProfile::FastPath) {
      c.max_round = rng.uniform(20, 36);
      c.epoch_length = rng.uniform(3, 8);
      c.workload.tx_per_second = static_cast<double>(rng.uniform(5, 40));
      c.workload.stop = rng.uniform(1000, 4000);
      c.workload.conflict_rate = 0.1 + 0.4 * rng.unit();
      c.workload.mixed_rate = 0.2 * rng.unit();
      c.workload.shared_rate = 0.1 * rng.unit();
   }
   return c;
}

struct FuzzOutcome {
   std::uint64_t seed = 0;
   SimConfig config;
   CheckReport report;
   std::size_t commits = 0;
};

inline FuzzOutcome fuzz_one(const SimConfig& config) {
   auto run = run_simulation(config);
   FuzzOutcome out;
   out.seed = config.seed;
   out.config = config;
   out.report = multi_view_check(run);
   if (!run.honest.empty()) out.commits = run.validators[*run.honest.begin()].commits().size();
   return out;
}

} // namespace mysticeti

#include "support/builder.hpp"
#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace mysticeti;
using testing_support::DagBuilder;

namespace {

struct Golden {
   Scenario scenario;
   BuiltScenario built;
   std::vector<SlotStatus> statuses;

   Golden() {
      std::ifstream in(std::string(SCENARIO_DIR) + "/golden.dag");
      std::stringstream ss;
      ss << in.rdbuf();
      scenario = parse_scenario(ss.str());
      built = build_scenario(scenario);
      statuses = scenario_statuses(scenario, built);
   }

   const Block& block(const std::string& name) const { return *built.blocks.at(name); }
   BlockRef ref(const std::string& name) const { return built.blocks.at(name)->reference(); }

   Committer committer() const {
      return Committer(built.committee, scenario.decider(), LeaderSchedule(4, scenario.schedule));
   }

   const SlotStatus& status(AuthorityIndex a, Round r) const {
      for (const auto& s : statuses)
         if (s.slot.authority == a && s.slot.round == r) return s;
      throw std::out_of_range("no slot");
   }
};

/// Brute-force certificate count: decision-round blocks whose distinct-author parents
/// support `candidate` at least 2f+1 times, counted per author.
std::size_t brute_certificates(const BlockRef& candidate, Round decision_round, const DagState& dag,
                               const Committee& committee) {
   std::set<AuthorityIndex> certifiers;
   for (const auto& b : dag.blocks_at(decision_round))
      if (oracle::distinct_vote_authors(candidate, b->parents(), dag) >= committee.quorum_threshold())
         certifiers.insert(b->author());
   return certifiers.size();
}

} // namespace

TEST(WaveArithmetic, MatchesDefinitions) {
   Committee c(4);
   LeaderSchedule s(4);
   DirectDecider d0(c, s, 3, 0, 0);
   EXPECT_EQ(d0.proposer_round(2), 6u);
   EXPECT_EQ(d0.decision_round(2), 8u);
   DirectDecider d1(c, s, 3, 1, 0);
   EXPECT_EQ(d1.wave_number(1), 0u);
   DirectDecider d2(c, s, 3, 2, 0);
   EXPECT_EQ(d2.proposer_round(1), 5u);
   for (std::uint32_t wl = 3; wl <= 6; ++wl)
      for (std::uint32_t off = 0; off < wl; ++off) {
         DirectDecider d(c, s, wl, off, 0);
         for (std::uint64_t w = 0; w < 5; ++w) {
            EXPECT_EQ(d.decision_round(w), d.proposer_round(w) + wl - 1);
            EXPECT_EQ(d.wave_number(d.proposer_round(w)), w);
         }
      }
}

TEST(DeciderConfig, RejectsOutOfRangeValues) {
   Committee c(4);
   EXPECT_THROW((DeciderConfig{2, 1}.validate(c)), std::invalid_argument);
   EXPECT_THROW((DeciderConfig{3, 0}.validate(c)), std::invalid_argument);
   EXPECT_THROW((DeciderConfig{3, 5}.validate(c)), std::invalid_argument);
   EXPECT_NO_THROW((DeciderConfig{3, 4}.validate(c)));
   EXPECT_THROW(Committer(c, DeciderConfig{1, 1}, LeaderSchedule(4)), std::invalid_argument);
}

TEST(LeaderSchedule, ThreeConsecutiveHonestPrimariesInEveryWindow) {
   for (std::size_t n : {4u, 7u, 10u, 13u}) {
      Committee c(n);
      auto f = c.max_faulty();
      LeaderSchedule s(n);
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
         if (static_cast<std::size_t>(std::popcount(mask)) > f) continue;
         for (Round start = 0; start < 2 * n; ++start) {
            std::size_t run = 0, best = 0;
            for (Round r = start; r < start + 3 * f + 3; ++r) {
               bool honest = !(mask >> s.proposer(r, 0) & 1u);
               run = honest ? run + 1 : 0;
               best = std::max(best, run);
            }
            ASSERT_GE(best, 3u) << "n=" << n << " mask=" << mask << " start=" << start;
         }
      }
      std::set<AuthorityIndex> seen;
      for (Round r = 0; r < n; ++r) seen.insert(s.proposer(r, 0));
      EXPECT_EQ(seen.size(), n);
   }
}

TEST(SkippedProposer, ThreeOfFourOmitting) {
   DagBuilder d;
   auto r1 = d.full_rounds(1);
   std::vector<BlockRef> without3{r1[0], r1[1], r1[2]};
   d.layer(2, {0, 1}, without3);
   EXPECT_FALSE(skipped_proposer(3, 1, d.dag, d.committee));
   d.layer(2, {2}, without3);
   d.layer(2, {3}, r1);
   EXPECT_TRUE(skipped_proposer(3, 1, d.dag, d.committee));
   EXPECT_FALSE(skipped_proposer(0, 1, d.dag, d.committee));
}

TEST(SkippedProposer, CrashedProposerIsSkipped) {
   DagBuilder d;
   auto r1 = d.layer(1, {0, 1, 2}, d.genesis_round());
   d.layer(2, {0, 1, 2}, r1);
   EXPECT_TRUE(skipped_proposer(3, 1, d.dag, d.committee));
}

TEST(SkippedProposer, TwoOmittersAreBelowQuorum) {
   DagBuilder d;
   auto r1 = d.full_rounds(1);
   d.layer(2, {0, 1}, {r1[0], r1[1], r1[2]});
   d.layer(2, {2, 3}, r1);
   EXPECT_FALSE(skipped_proposer(3, 1, d.dag, d.committee));
}

TEST(SupportedProposer, EmptySlotIsNone) {
   DagBuilder d;
   auto r1 = d.layer(1, {0, 1, 2}, d.genesis_round());
   auto r2 = d.layer(2, {0, 1, 2}, r1);
   d.layer(3, {0, 1, 2}, r2);
   EXPECT_FALSE(supported_proposer(3, 1, 3, d.dag, d.committee));
}

TEST(SupportedProposer, TwoCertificatesAreNotEnough) {
   DagBuilder d;
   auto r1 = d.full_rounds(1);
   auto voters = d.layer(2, {0, 1, 2}, r1);
   auto a3 = d.add(3, 2, {r1[3], r1[1], r1[2]});
   d.add(0, 3, {voters[0], voters[1], voters[2]});
   d.add(1, 3, {voters[1], voters[0], voters[2]});
   d.add(2, 3, {voters[2], a3, voters[0]});
   d.add(3, 3, {a3, voters[0], voters[1]});

   EXPECT_EQ(brute_certificates(r1[0], 3, d.dag, d.committee), 2u);
   EXPECT_EQ(count_certificates(d.dag.at(r1[0]), 3, d.dag, d.committee), 2u);
   EXPECT_FALSE(supported_proposer(0, 1, 3, d.dag, d.committee));

   d.add(DagBuilder::make(3, 3, {a3, voters[0], voters[1], voters[2]}, 0, "fork"));
   EXPECT_EQ(brute_certificates(r1[0], 3, d.dag, d.committee), 3u);
   EXPECT_EQ(supported_proposer(0, 1, 3, d.dag, d.committee), r1[0]);
}

TEST(SupportedProposer, CertificateCountMatchesBruteForceOnRandomDags) {
   for (std::uint64_t seed = 1; seed <= 80; ++seed) {
      auto rd = oracle::random_dag(seed);
      auto dag = DagState::with_genesis(rd.committee);
      for (const auto& b : rd.blocks) dag.insert(b);
      for (Round r = 1; r + 2 <= dag.highest_round(); ++r)
         for (const auto& b : dag.blocks_at(r))
            ASSERT_EQ(count_certificates(*b, r + 2, dag, rd.committee),
                      brute_certificates(b->reference(), r + 2, dag, rd.committee))
                << "seed " << seed << " block " << b->reference();
   }
}

TEST(Golden, DirectRuleOnRoundFour) {
   Golden fx;
   auto committer = fx.committer();
   auto a = committer.decider_for(4, 0);
   auto sa = a.try_direct_decide(a.wave_number(4), fx.built.dag);
   EXPECT_EQ(sa.decision, Decision::Skip);
   EXPECT_TRUE(sa.direct);

   auto d = committer.decider_for(4, 3);
   auto sd = d.try_direct_decide(d.wave_number(4), fx.built.dag);
   EXPECT_EQ(sd.decision, Decision::Commit);
   EXPECT_EQ(sd.block, fx.ref("L4d"));
   EXPECT_EQ(supported_proposer(3, 4, 6, fx.built.dag, fx.built.committee), fx.ref("L4d"));
}

TEST(Golden, NoVotingBlocksYetIsUndecided) {
   Golden fx;
   auto committer = fx.committer();
   auto d = committer.decider_for(6, 1);
   EXPECT_EQ(d.try_direct_decide(d.wave_number(6), fx.built.dag).decision, Decision::Undecided);
}

TEST(Golden, CertifiedLinks) {
   Golden fx;
   const auto& c = fx.built.committee;
   const auto& dag = fx.built.dag;
   EXPECT_TRUE(certified_link(fx.block("L4b"), fx.block("L1d"), 3, dag, c));
   EXPECT_FALSE(certified_link(fx.block("L4b"), fx.block("L1b"), 3, dag, c));

   bool found = false;
   for (const auto& b : dag.blocks_at(3)) {
      if (!is_certificate(*b, fx.block("L1d"), dag, c)) continue;
      EXPECT_TRUE(certified_link(*b, fx.block("L1d"), 3, dag, c));
      found = true;
   }
   EXPECT_TRUE(found);
}

TEST(Golden, IndirectRule) {
   Golden fx;
   auto committer = fx.committer();
   const auto& dag = fx.built.dag;
   auto later_than = [&](Slot s) {
      std::vector<SlotStatus> out;
      for (const auto& st : fx.statuses)
         if (s < st.slot) out.push_back(st);
      return out;
   };

   auto c2 = committer.decider_for(2, 2);
   auto l2c = later_than(c2.slot(c2.wave_number(2)));
   EXPECT_EQ(c2.try_indirect_decide(c2.wave_number(2), l2c, dag).decision, Decision::Undecided);

   auto d1 = committer.decider_for(1, 3);
   auto l1d = later_than(d1.slot(d1.wave_number(1)));
   auto sd = d1.try_indirect_decide(d1.wave_number(1), l1d, dag);
   EXPECT_EQ(sd.decision, Decision::Commit);
   EXPECT_EQ(sd.block, fx.ref("L1d"));
   EXPECT_FALSE(sd.direct);

   auto b1 = committer.decider_for(1, 1);
   auto l1b = later_than(b1.slot(b1.wave_number(1)));
   auto sb = b1.try_indirect_decide(b1.wave_number(1), l1b, dag);
   EXPECT_EQ(sb.decision, Decision::Skip);
   EXPECT_FALSE(sb.direct);
}

TEST(Golden, SlotStatusesAndSequence) {
   Golden fx;
   EXPECT_EQ(fx.status(0, 4).decision, Decision::Skip);
   EXPECT_EQ(fx.status(3, 4).decision, Decision::Commit);
   EXPECT_EQ(fx.status(2, 2).decision, Decision::Undecided);
   EXPECT_EQ(fx.status(3, 1).block, fx.ref("L1d"));
   EXPECT_EQ(fx.status(1, 1).decision, Decision::Skip);

   auto prefix = fx.committer().try_decide(std::nullopt, fx.built.dag);
   std::vector<std::string> got;
   for (const auto& s : prefix) got.push_back(s.slot.to_string() + " " + std::string(to_string(s.decision)));
   EXPECT_EQ(got, (std::vector<std::string>{"A0@1/0 commit", "A1@1/1 skip", "A2@1/2 commit", "A3@1/3 commit",
                                            "A0@2/0 commit"}));

   std::vector<BlockRef> leaders;
   for (const auto& c : scenario_commits(fx.scenario, fx.built)) leaders.push_back(c.leader);
   EXPECT_EQ(leaders, (std::vector<BlockRef>{fx.ref("L1a"), fx.ref("L1c"), fx.ref("L1d"), fx.ref("L2a")}));
}

TEST(Golden, SingleProposerAgreesOnPrimarySlots) {
   Golden fx;
   Committer single(fx.built.committee, DeciderConfig{3, 1}, LeaderSchedule(4, LeaderSchedule::Kind::Fixed));
   auto statuses = single.decide_slots(std::nullopt, fx.built.dag);
   ASSERT_EQ(statuses.size(), 6u);
   for (const auto& s : statuses) {
      const auto& four = fx.status(0, s.slot.round);
      EXPECT_EQ(s.decision, four.decision) << s.slot.to_string();
      EXPECT_EQ(s.block, four.block) << s.slot.to_string();
   }
}

TEST(TryDecide, GenesisOnlyDagIsEmpty) {
   DagBuilder d;
   Committer c(d.committee, DeciderConfig{3, 4}, LeaderSchedule(4));
   EXPECT_TRUE(c.try_decide(std::nullopt, d.dag).empty());
   EXPECT_TRUE(c.try_decide(Round{0}, d.dag).empty());
}

TEST(TryDecide, LockstepCommitsExactlyTwoRoundsLater) {
   for (std::size_t n : {4u, 7u}) {
      DagBuilder d(n);
      Committer c(d.committee, DeciderConfig{3, static_cast<std::uint32_t>(n)}, LeaderSchedule(n));
      for (Round k = 1; k <= 8; ++k) {
         std::vector<AuthorityIndex> all;
         for (AuthorityIndex a = 0; a < n; ++a) all.push_back(a);
         std::vector<BlockRef> prev;
         for (const auto& b : d.dag.blocks_at(k - 1)) prev.push_back(b->reference());
         d.layer(k, all, prev);
         for (const auto& s : c.decide_slots(std::nullopt, d.dag)) {
            if (s.slot.round + 2 <= k) {
               EXPECT_EQ(s.decision, Decision::Commit) << s.slot.to_string() << " at " << k;
               EXPECT_TRUE(s.direct);
            } else {
               EXPECT_EQ(s.decision, Decision::Undecided) << s.slot.to_string() << " at " << k;
            }
         }
      }
   }
}

TEST(TryDecide, RoundEntryPointResumesAfterCommittedRound) {
   Golden fx;
   auto committer = fx.committer();
   auto rest = committer.try_decide(Round{1}, fx.built.dag);
   ASSERT_EQ(rest.size(), 1u);
   EXPECT_EQ(rest[0].block, fx.ref("L2a"));
}

TEST(TryDecide, DeterministicUnderInsertionOrder) {
   for (std::uint64_t seed = 1; seed <= 40; ++seed) {
      auto rd = oracle::random_dag(seed);
      Committer c(rd.committee, rd.decider, LeaderSchedule(4, rd.schedule));
      auto forward = DagState::with_genesis(rd.committee);
      for (const auto& b : rd.blocks) forward.insert(b);

      // Same contents, inserted round by round in reverse order within each round.
      auto shuffled = DagState::with_genesis(rd.committee);
      std::map<Round, std::vector<BlockPtr>> by_round;
      for (const auto& b : rd.blocks) by_round[b->round()].push_back(b);
      for (auto& [r, bs] : by_round)
         for (auto it = bs.rbegin(); it != bs.rend(); ++it) shuffled.insert(*it);

      auto a = c.decide_slots(std::nullopt, forward);
      EXPECT_EQ(a, c.decide_slots(std::nullopt, forward));
      EXPECT_EQ(a, c.decide_slots(std::nullopt, shuffled)) << "seed " << seed;
   }
}

TEST(ViewAgreement, RegressionWaveFourDirectSkip) {
   auto rd = oracle::random_dag(38);
   ASSERT_EQ(rd.decider.wave_length, 4u);
   bool within = false;
   auto res = oracle::check_all_views(rd, 20000, &within);
   EXPECT_TRUE(within);
   EXPECT_TRUE(res.violations.empty()) << res.violations.front();
}

TEST(ViewAgreement, RandomDagsAgreeAcrossAllViews) {
   std::size_t checked = 0;
   for (std::uint64_t seed = 100; seed < 160; ++seed) {
      auto rd = oracle::random_dag(seed, 5);
      bool within = false;
      auto res = oracle::check_all_views(rd, 2000, &within);
      if (!within) continue;
      ++checked;
      ASSERT_TRUE(res.violations.empty()) << "seed " << seed << ": " << res.violations.front();
   }
   EXPECT_GT(checked, 30u);
}

TEST(Linearize, LeaderWithNothingNewIsAlone) {
   DagBuilder d;
   auto r1 = d.full_rounds(2);
   auto hist = oracle::history(r1[0], d.dag);
   RefSet delivered(hist.begin(), hist.end());
   delivered.erase(r1[0]);
   EXPECT_EQ(linearize(r1[0], delivered, d.dag), std::vector<BlockRef>{r1[0]});
   delivered.insert(r1[0]);
   EXPECT_TRUE(linearize(r1[0], delivered, d.dag).empty());
}

TEST(Linearize, SecondCommitEmitsOnlyTheDifference) {
   DagBuilder d;
   d.full_rounds(3);
   auto first = d.dag.slot_blocks(0, 2).front()->reference();
   auto second = d.dag.slot_blocks(1, 3).front()->reference();
   auto out1 = linearize(first, {}, d.dag);
   RefSet delivered(out1.begin(), out1.end());
   auto out2 = linearize(second, delivered, d.dag);

   auto h1 = oracle::history(first, d.dag);
   auto h2 = oracle::history(second, d.dag);
   std::set<BlockRef> diff;
   for (const auto& r : h2)
      if (!h1.contains(r)) diff.insert(r);
   EXPECT_EQ(std::set<BlockRef>(out2.begin(), out2.end()), diff);
   EXPECT_EQ(out2.back(), second);
   EXPECT_EQ(std::set<BlockRef>(out1.begin(), out1.end()), h1);
}

TEST(Linearize, ConcatenationIsDuplicateFreeTopologicalUnion) {
   std::size_t with_commits = 0;
   for (std::uint64_t seed = 1; seed <= 150; ++seed) {
      auto rd = oracle::random_dag(seed);
      auto dag = DagState::with_genesis(rd.committee);
      for (const auto& b : rd.blocks) dag.insert(b);
      Committer c(rd.committee, rd.decider, LeaderSchedule(4, rd.schedule));
      CommitSequencer seq;
      std::vector<BlockRef> all;
      std::set<BlockRef> expected;
      for (const auto& s : c.try_decide(std::nullopt, dag)) {
         auto rec = seq.sequence(s, dag);
         if (!rec) continue;
         ASSERT_EQ(rec->blocks.back(), rec->leader);
         all.insert(all.end(), rec->blocks.begin(), rec->blocks.end());
         auto h = oracle::history(rec->leader, dag);
         expected.insert(h.begin(), h.end());
      }
      if (!all.empty()) ++with_commits;
      std::set<BlockRef> unique(all.begin(), all.end());
      ASSERT_EQ(unique.size(), all.size()) << "seed " << seed;
      ASSERT_EQ(unique, expected) << "seed " << seed;
      ASSERT_TRUE(oracle::parents_first(all, dag)) << "seed " << seed;
   }
   EXPECT_GT(with_commits, 50u);
}

TEST(CommitTimestamp, ClampsToPrevious) {
   auto at = [](Millis ts) { return DagBuilder::make(0, 1, {}, ts); };
   std::vector<BlockPtr> seven{at(7)};
   std::vector<BlockPtr> fifteen{at(15)};
   EXPECT_EQ(commit_timestamp(seven, 10), 10u);
   EXPECT_EQ(commit_timestamp(fifteen, 10), 15u);
   EXPECT_EQ(commit_timestamp({}, 10), 10u);
   std::vector<BlockPtr> both{at(3), at(12)};
   EXPECT_EQ(commit_timestamp(both, 5), 12u);
}

TEST(CommitTimestamp, SequenceIsNonDecreasing) {
   Rng rng(7, Stream::Dag);
   for (int trial = 0; trial < 200; ++trial) {
      Millis prev = 0;
      for (int i = 0; i < 30; ++i) {
         std::vector<BlockPtr> leaders;
         auto k = rng.uniform(0, 2);
         Millis top = 0;
         for (std::uint64_t j = 0; j < k; ++j) {
            auto ts = rng.uniform(1, 1000);
            top = std::max<Millis>(top, ts);
            leaders.push_back(DagBuilder::make(0, 1, {}, ts));
         }
         auto next = commit_timestamp(leaders, prev);
         ASSERT_GE(next, prev);
         ASSERT_EQ(next, std::max(prev, top));
         prev = next;
      }
   }
}

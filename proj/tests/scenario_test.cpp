#include "support/oracle.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <fstream>
#include <sstream>

using namespace mysticeti;

namespace {

std::string slurp(const std::string& path) {
   std::ifstream in(path);
   std::stringstream ss;
   ss << in.rdbuf();
   return ss.str();
}

/// Scenario text for a random DAG, with random transactions, votes, bits and expectations.
Scenario random_scenario(std::uint64_t seed) {
   auto rd = oracle::random_dag(seed);
   Rng rng(seed, Stream::Fuzz);
   Scenario s;
   s.schedule = rng.chance(0.5) ? LeaderSchedule::Kind::Fixed : LeaderSchedule::Kind::RoundRobin;
   s.proposers = rd.decider.num_of_proposers;
   s.wave_length = rd.decider.wave_length;
   std::map<BlockRef, std::string> names;
   for (AuthorityIndex a = 0; a < 4; ++a) names[genesis_block(a)->reference()] = "G" + std::to_string(a);
   std::vector<std::string> labels;
   int counter = 0;
   for (const auto& b : rd.blocks) {
      BlockDecl d;
      d.name = "B" + std::to_string(counter++);
      names[b->reference()] = d.name;
      d.author = b->author();
      d.round = b->round();
      for (const auto& p : b->parents()) d.parents.push_back(names.at(p));
      if (rng.chance(0.5)) d.timestamp = b->timestamp();
      if (rng.chance(0.3)) {
         TxDecl tx;
         tx.label = "t" + std::to_string(counter);
         auto objects = rng.uniform(1, 3);
         for (std::uint64_t i = 0; i < objects; ++i) tx.objects.push_back({rng.uniform(0, 50), rng.uniform(0, 3)});
         tx.shared = rng.chance(0.3);
         d.transactions.push_back(tx);
         labels.push_back(tx.label);
      }
      if (!labels.empty() && rng.chance(0.3))
         d.transactions.push_back({labels[rng.uniform(0, labels.size() - 1)], {}, false, true});
      if (!labels.empty() && rng.chance(0.4)) d.votes.push_back({labels[rng.uniform(0, labels.size() - 1)], rng.chance(0.8)});
      d.epoch_change_bit = rng.chance(0.1);
      s.blocks.push_back(std::move(d));
   }
   for (int i = 0; i < 3; ++i) {
      SlotExpect e;
      e.author = static_cast<AuthorityIndex>(rng.uniform(0, 3));
      e.round = rng.uniform(1, 5);
      e.decision = static_cast<Decision>(rng.uniform(0, 2));
      if (e.decision == Decision::Commit && !s.blocks.empty()) e.block = s.blocks.front().name;
      s.slots.push_back(e);
   }
   if (rng.chance(0.5)) s.sequence = std::vector<std::string>{"B0", "B1"};
   for (const auto& l : labels)
      s.transactions.push_back({static_cast<TxExpect::Kind>(rng.uniform(0, 2)), l, rng.chance(0.5)});
   return s;
}

} // namespace

TEST(ScenarioFile, GoldenExpectationsHold) {
   auto start = std::chrono::steady_clock::now();
   auto sc = parse_scenario(slurp(std::string(SCENARIO_DIR) + "/golden.dag"));
   auto built = build_scenario(sc);
   auto report = assert_scenario(sc, built);
   auto elapsed = std::chrono::steady_clock::now() - start;
   EXPECT_TRUE(report.ok()) << (report.failures.empty() ? "" : report.failures.front());
   EXPECT_EQ(report.lines.size(), sc.slots.size() + 1);
   EXPECT_LT(elapsed, std::chrono::seconds(1));
}

TEST(ScenarioFile, EmptyScenarioHasGenesisOnly) {
   auto sc = parse_scenario("");
   EXPECT_EQ(sc, Scenario{});
   auto built = build_scenario(sc);
   EXPECT_EQ(built.dag.size(), 4u);
   EXPECT_TRUE(scenario_commits(sc, built).empty());
   EXPECT_TRUE(assert_scenario(sc, built).ok());
}

TEST(ScenarioFile, CommentsAndBlankLinesIgnored) {
   auto sc = parse_scenario("# header\n\n   committee n=7   # trailing\n\nproposers 3\n");
   EXPECT_EQ(sc.committee_size, 7u);
   EXPECT_EQ(sc.proposers, 3u);
}

TEST(ScenarioFile, PrintParseRoundTripOnGolden) {
   auto sc = parse_scenario(slurp(std::string(SCENARIO_DIR) + "/golden.dag"));
   auto text = print_scenario(sc);
   EXPECT_EQ(parse_scenario(text), sc);
   EXPECT_EQ(print_scenario(parse_scenario(text)), text);
}

TEST(ScenarioFile, PrintParseRoundTripOnRandomScenarios) {
   for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      auto sc = random_scenario(seed);
      auto text = print_scenario(sc);
      auto back = parse_scenario(text);
      ASSERT_EQ(back, sc) << "seed " << seed << "\n" << text;
   }
}

TEST(ScenarioFile, BuildIsDeterministic) {
   auto text = slurp(std::string(SCENARIO_DIR) + "/golden.dag");
   auto a = build_scenario(parse_scenario(text));
   auto b = build_scenario(parse_scenario(text));
   EXPECT_EQ(a.names, b.names);
   EXPECT_EQ(a.blocks.at("L4d")->serialize(), b.blocks.at("L4d")->serialize());
}

TEST(ScenarioFile, ParseErrorsCarryLineAndColumn) {
   try {
      parse_scenario("committee n=4\nblock X author=B1 round=1 parents=[G0]\n");
      FAIL() << "no error";
   } catch (const ParseError& e) {
      EXPECT_EQ(e.line, 2u);
      EXPECT_EQ(e.column, 16u);
      EXPECT_NE(std::string(e.what()).find("2:16"), std::string::npos);
   }
   try {
      parse_scenario("expect slot A1@2 = maybe\n");
      FAIL() << "no error";
   } catch (const ParseError& e) {
      EXPECT_EQ(e.line, 1u);
      EXPECT_EQ(e.column, 25u);
   }
   EXPECT_THROW(parse_scenario("block X author=A1 round=1\n"), ParseError);
   EXPECT_THROW(parse_scenario("proposers 2 3\n"), ParseError);
   EXPECT_THROW(parse_scenario("frobnicate\n"), ParseError);
   EXPECT_THROW(parse_scenario("block X author=A1 round=1 parents=[G0 G1]\n"), ParseError);
}

TEST(ScenarioFile, BuildErrors) {
   EXPECT_THROW(build_scenario(parse_scenario("block X author=A0 round=1 parents=[Y]\n")), BuildError);
   EXPECT_THROW(build_scenario(parse_scenario("block X author=A0 round=1 parents=[G0, G1]\n")), BuildError);
   EXPECT_THROW(build_scenario(parse_scenario("block G0 author=A0 round=1 parents=[G0, G1, G2]\n")), BuildError);
   EXPECT_THROW(build_scenario(parse_scenario("block X author=A0 round=1 parents=[G0, G1, G2] tx=[t]\n")),
                BuildError);
}

TEST(ScenarioFile, InvalidExpectedBlocks) {
   auto ok = build_scenario(parse_scenario("block X author=A0 round=1 parents=[G0, G1] invalid-expected\n"));
   ASSERT_EQ(ok.rejected.size(), 1u);
   EXPECT_EQ(ok.rejected[0], "X InsufficientPreviousRoundParents");
   EXPECT_EQ(ok.dag.size(), 4u);

   EXPECT_THROW(build_scenario(parse_scenario("block X author=A0 round=1 parents=[G0, G1, G2] invalid-expected\n")),
                BuildError);
   EXPECT_THROW(build_scenario(parse_scenario("block X author=A0 round=1 parents=[G0, G1] invalid-expected\n"
                                              "block Y author=A1 round=2 parents=[X]\n")),
                BuildError);
}

TEST(ScenarioFile, EquivocationByNameAndFastPathExpectations) {
   auto text = R"(
committee n=4
block A author=A0 round=1 parents=[G0, G1, G2, G3] tx=[t:7.0]
block A' author=A0 round=1 parents=[G0, G1, G2, G3] tx=[u:7.0]
block B author=A1 round=1 parents=[G1, G0, G2, G3]
block C author=A2 round=1 parents=[G2, G0, G1, G3]
block D author=A3 round=1 parents=[G3, G0, G1, G2]
block B2 author=A1 round=2 parents=[B, A, C] votes=[t]
block C2 author=A2 round=2 parents=[C, A, B] votes=[t]
block D2 author=A3 round=2 parents=[D, A', B] votes=[-u]
expect executed t = true
expect executed u = false
expect finalized t = false
)";
   auto sc = parse_scenario(text);
   auto built = build_scenario(sc);
   EXPECT_EQ(built.dag.slot_blocks(0, 1).size(), 2u);
   auto report = assert_scenario(sc, built);
   EXPECT_TRUE(report.ok()) << (report.failures.empty() ? "" : report.failures.front());
   const auto& d2 = *built.blocks.at("D2");
   ASSERT_EQ(d2.votes().size(), 1u);
   EXPECT_FALSE(d2.votes()[0].accept);
}

TEST(ScenarioFile, MismatchIsReported) {
   auto sc = parse_scenario(slurp(std::string(SCENARIO_DIR) + "/golden.dag"));
   sc.slots.push_back({1, 1, Decision::Commit, std::string("L1b")});
   sc.sequence = std::vector<std::string>{"L1a"};
   auto report = assert_scenario(sc, build_scenario(sc));
   EXPECT_EQ(report.failures.size(), 2u);
}

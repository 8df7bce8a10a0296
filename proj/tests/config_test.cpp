#include "mysticeti/mysticeti.hpp"

#include <gtest/gtest.h>

using namespace mysticeti;

TEST(FaultList, ParsesEveryKind) {
   auto f = parse_fault_list("crash:1@0,mute:2@1500,equivocate:3:split-views,equivocate:0:duplicate-tx,crash:4");
   ASSERT_EQ(f.size(), 5u);
   EXPECT_EQ(f[0].kind, FaultSpec::Kind::Crash);
   EXPECT_EQ(f[0].authority, 1u);
   EXPECT_EQ(f[0].at, 0u);
   EXPECT_EQ(f[1].kind, FaultSpec::Kind::Mute);
   EXPECT_EQ(f[1].at, 1500u);
   EXPECT_EQ(f[2].kind, FaultSpec::Kind::Equivocate);
   EXPECT_EQ(f[2].strategy, Behavior::SplitViews);
   EXPECT_EQ(f[3].strategy, Behavior::DuplicateTx);
   EXPECT_EQ(f[4].authority, 4u);
   EXPECT_EQ(f[4].at, 0u);
   EXPECT_TRUE(parse_fault_list("").empty());
   EXPECT_EQ(parse_fault_list("crash:1@5,,").size(), 1u);
}

TEST(FaultList, RejectsMalformedItems) {
   for (auto bad : {"crash", "crash:x@1", "crash:1@y", "boom:1", "equivocate:2:sideways", "mute:@3"})
      EXPECT_THROW(parse_fault_list(bad), ConfigError) << bad;
}

TEST(SimConfigJson, RoundTrips) {
   SimConfig c;
   c.seed = 99;
   c.n = 7;
   c.latency = {15, 250};
   c.pair_latency.push_back({1, 2, {300, 400}});
   c.gst = 2000;
   c.delta = 500;
   c.max_round = 77;
   c.leader_timeout = 900;
   c.decider = {4, 3};
   c.schedule = LeaderSchedule::Kind::Fixed;
   c.epoch_length = 25;
   c.workload.tx_per_second = 12.5;
   c.workload.conflict_rate = 0.25;
   c.faults = parse_fault_list("crash:1@10,equivocate:2:duplicate-tx");
   c.trace = true;
   auto j = sim_config_to_json(c);
   auto back = sim_config_from_json(j);
   EXPECT_EQ(sim_config_to_json(back).dump(), j.dump());
   EXPECT_EQ(back.decider.wave_length, 4u);
   EXPECT_EQ(back.faults[1].strategy, Behavior::DuplicateTx);
   EXPECT_EQ(parse_sim_config(j.dump()).seed, 99u);
}

TEST(SimConfigJson, DefaultsAndShorthand) {
   auto c = parse_sim_config(R"({"seed": 5, "latency": 40})");
   EXPECT_EQ(c.seed, 5u);
   EXPECT_EQ(c.latency.min, 40u);
   EXPECT_EQ(c.latency.max, 40u);
   EXPECT_EQ(c.n, SimConfig{}.n);
   EXPECT_EQ(sim_config_to_json(parse_sim_config("{}")).dump(), sim_config_to_json(SimConfig{}).dump());
}

TEST(SimConfigJson, RejectsUnknownKeysAndBadValues) {
   EXPECT_THROW(parse_sim_config(R"({"sede": 1})"), ConfigError);
   EXPECT_THROW(parse_sim_config(R"({"latency": {"min": 1, "mean": 3}})"), ConfigError);
   EXPECT_THROW(parse_sim_config(R"({"workload": {"rate": 3}})"), ConfigError);
   EXPECT_THROW(parse_sim_config(R"({"faults": [{"authority": 1, "when": 3}]})"), ConfigError);
   EXPECT_THROW(parse_sim_config(R"({"faults": [{"authority": 1, "kind": "explode"}]})"), ConfigError);
   EXPECT_THROW(parse_sim_config(R"({"n": "four"})"), ConfigError);
   EXPECT_THROW(parse_sim_config(R"({"schedule": "random"})"), ConfigError);
   EXPECT_THROW(parse_sim_config("[1, 2]"), ConfigError);
   EXPECT_THROW(parse_sim_config("{"), ConfigError);
}

TEST(CommitLog, OneJsonObjectPerLine) {
   CommitRecord c;
   c.index = 3;
   c.leader = BlockRef{2, 9, Digest{}};
   c.blocks = {BlockRef{1, 8, Digest{}}, c.leader};
   c.timestamp = 4500;
   auto text = commit_log_string({c, c});
   auto nl = text.find('\n');
   ASSERT_NE(nl, std::string::npos);
   auto line = text.substr(0, nl);
   EXPECT_EQ(text, line + "\n" + line + "\n");
   auto j = nlohmann::ordered_json::parse(line);
   std::vector<std::string> keys;
   for (const auto& [k, _] : j.items()) keys.push_back(k);
   EXPECT_EQ(keys, (std::vector<std::string>{"index", "leader", "timestamp", "blocks"}));
   EXPECT_EQ(j["index"], 3);
   EXPECT_EQ(j["leader"]["author"], 2);
   EXPECT_EQ(j["leader"]["round"], 9);
   EXPECT_EQ(j["leader"]["digest"].get<std::string>().size(), 64u);
   EXPECT_EQ(j["timestamp"], 4500);
   EXPECT_EQ(j["blocks"].size(), 2u);
   EXPECT_EQ(commit_log_string({}), "");
}

TEST(Metrics, CsvHeadersAndRowCounts) {
   SimConfig c;
   c.seed = 4;
   c.max_round = 8;
   c.latency = {20, 40};
   c.decider.num_of_proposers = 2;
   c.workload.tx_per_second = 5;
   auto r = run_simulation(c);
   auto lines = [](const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); };
   std::ostringstream slots, txs, rounds, slots_jl;
   write_slot_metrics(slots, r.metrics, MetricsFormat::Csv);
   write_tx_metrics(txs, r.metrics, MetricsFormat::Csv);
   write_round_metrics(rounds, r.metrics, MetricsFormat::Csv);
   write_slot_metrics(slots_jl, r.metrics, MetricsFormat::JsonLines);
   EXPECT_EQ(slots.str().rfind("validator,author,round,offset,decision,direct,depth,decided_at,latency\n", 0), 0u);
   EXPECT_EQ(lines(slots.str()), r.metrics.slots.size() + 1);
   EXPECT_EQ(lines(txs.str()), r.metrics.transactions.size() + 1);
   EXPECT_EQ(lines(slots_jl.str()), r.metrics.slots.size());
   EXPECT_EQ(rounds.str().rfind("round,blocks,commits\n", 0), 0u);
   auto summary = run_summary(r);
   EXPECT_EQ(summary["seed"], 4);
   EXPECT_EQ(summary["n"], 4);
}

TEST(Dot, MarksLeadersAndEquivocations) {
   DagState dag = DagState::with_genesis(Committee(4));
   std::ostringstream os;
   write_dot(os, dag);
   auto text = os.str();
   EXPECT_EQ(text.rfind("digraph dag {", 0), 0u);
   EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 2 + 1 + 4 + 1);
   EXPECT_EQ(text.find("->"), std::string::npos);
}

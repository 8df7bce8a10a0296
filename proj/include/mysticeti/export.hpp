#pragma once

#include "mysticeti/simulator.hpp"

#include <json.hpp>

#include <map>
#include <ostream>
#include <set>
#include <string>

namespace mysticeti {

inline nlohmann::ordered_json ref_json(const BlockRef& r) {
   return {{"author", r.author}, {"round", r.round}, {"digest", r.digest.hex()}};
}

/// One JSON object per line; byte-stable for a given commit sequence.
inline void write_commit_log(std::ostream& os, const std::vector<CommitRecord>& commits) {
   for (const auto& c : commits) {
      nlohmann::ordered_json j;
      j["index"] = c.index;
      j["leader"] = ref_json(c.leader);
      j["timestamp"] = c.timestamp;
      j["blocks"] = nlohmann::ordered_json::array();
      for (const auto& b : c.blocks) j["blocks"].push_back(ref_json(b));
      os << j.dump() << '\n';
   }
}

inline std::string commit_log_string(const std::vector<CommitRecord>& commits) {
   std::ostringstream os;
   write_commit_log(os, commits);
   return os.str();
}

enum class MetricsFormat { JsonLines, Csv };

namespace detail {

template <typename T>
nlohmann::ordered_json opt(const std::optional<T>& v) {
   return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

template <typename T>
std::string opt_csv(const std::optional<T>& v) {
   return v ? std::to_string(*v) : std::string();
}

} // namespace detail

inline void write_slot_metrics(std::ostream& os, const Metrics& m, MetricsFormat fmt) {
   if (fmt == MetricsFormat::Csv) os << "validator,author,round,offset,decision,direct,depth,decided_at,latency\n";
   for (const auto& s : m.slots) {
      if (fmt == MetricsFormat::Csv) {
         os << s.validator << ',' << s.slot.authority << ',' << s.slot.round << ',' << s.slot.offset << ','
            << to_string(s.decision) << ',' << (s.direct ? 1 : 0) << ',' << s.depth << ',' << s.decided_at << ','
            << detail::opt_csv(s.latency) << '\n';
         continue;
      }
      nlohmann::ordered_json j{{"validator", s.validator},
                               {"author", s.slot.authority},
                               {"round", s.slot.round},
                               {"offset", s.slot.offset},
                               {"decision", std::string(to_string(s.decision))},
                               {"direct", s.direct},
                               {"depth", s.depth},
                               {"decided_at", s.decided_at},
                               {"latency", detail::opt(s.latency)}};
      os << j.dump() << '\n';
   }
}

inline void write_tx_metrics(std::ostream& os, const Metrics& m, MetricsFormat fmt) {
   if (fmt == MetricsFormat::Csv)
      os << "validator,tx,epoch,status,route,submitted_at,execute_latency,finalize_latency,proposed_round,"
            "executed_round\n";
   for (const auto& t : m.transactions) {
      if (fmt == MetricsFormat::Csv) {
         os << t.validator << ',' << t.tx.hex() << ',' << t.epoch << ',' << to_string(t.status) << ','
            << to_string(t.route) << ',' << t.submitted_at << ',' << detail::opt_csv(t.execute_latency) << ','
            << detail::opt_csv(t.finalize_latency) << ',' << detail::opt_csv(t.proposed_round) << ','
            << detail::opt_csv(t.executed_round) << '\n';
         continue;
      }
      nlohmann::ordered_json j{{"validator", t.validator},
                               {"tx", t.tx.hex()},
                               {"epoch", t.epoch},
                               {"status", std::string(to_string(t.status))},
                               {"route", std::string(to_string(t.route))},
                               {"submitted_at", t.submitted_at},
                               {"execute_latency", detail::opt(t.execute_latency)},
                               {"finalize_latency", detail::opt(t.finalize_latency)},
                               {"proposed_round", detail::opt(t.proposed_round)},
                               {"executed_round", detail::opt(t.executed_round)}};
      os << j.dump() << '\n';
   }
}

inline void write_round_metrics(std::ostream& os, const Metrics& m, MetricsFormat fmt) {
   std::set<Round> rounds;
   for (const auto& [r, _] : m.blocks_per_round) rounds.insert(r);
   for (const auto& [r, _] : m.commits_per_round) rounds.insert(r);
   auto get = [](const std::map<Round, std::size_t>& src, Round r) {
      auto it = src.find(r);
      return it == src.end() ? std::size_t{0} : it->second;
   };
   if (fmt == MetricsFormat::Csv) os << "round,blocks,commits\n";
   for (auto r : rounds) {
      if (fmt == MetricsFormat::Csv) {
         os << r << ',' << get(m.blocks_per_round, r) << ',' << get(m.commits_per_round, r) << '\n';
      } else {
         nlohmann::ordered_json j{
             {"round", r}, {"blocks", get(m.blocks_per_round, r)}, {"commits", get(m.commits_per_round, r)}};
         os << j.dump() << '\n';
      }
   }
}

inline nlohmann::ordered_json run_summary(const SimResult& run) {
   nlohmann::ordered_json j;
   j["seed"] = run.config.seed;
   j["n"] = run.config.n;
   j["end_time"] = run.metrics.end_time;
   j["events"] = run.metrics.events;
   j["messages"] = run.metrics.messages;
   std::size_t commits = 0;
   Round top = 0;
   if (!run.honest.empty()) {
      const auto& v = run.validators[*run.honest.begin()];
      commits = v.commits().size();
      top = v.dag().highest_round();
   }
   j["commits"] = commits;
   j["highest_round"] = top;
   std::size_t direct = 0, indirect = 0, skipped = 0;
   for (const auto& s : run.metrics.slots) {
      if (s.decision == Decision::Skip) ++skipped;
      if (s.decision == Decision::Undecided) continue;
      (s.direct ? direct : indirect)++;
   }
   j["direct_decisions"] = direct;
   j["indirect_decisions"] = indirect;
   j["skipped_slots"] = skipped;
   std::size_t finalized = 0;
   for (const auto& t : run.metrics.transactions) finalized += t.status == TxStatus::Finalized;
   j["finalized_transactions"] = finalized;
   nlohmann::ordered_json rejected = nlohmann::ordered_json::object();
   for (const auto& [reason, count] : run.metrics.rejected) rejected[std::string(to_string(reason))] = count;
   j["rejected"] = rejected;
   return j;
}

/// Graphviz rendering. Edges point from child to parent; committed leaders are boxed.
inline void write_dot(std::ostream& os, const DagState& dag, const std::map<BlockRef, std::string>& names = {},
                      const std::vector<CommitRecord>& commits = {}) {
   std::set<BlockRef> leaders;
   for (const auto& c : commits) leaders.insert(c.leader);
   auto id = [](const BlockRef& r) { return "\"" + r.to_string() + "\""; };
   os << "digraph dag {\n  rankdir=BT;\n  node [shape=ellipse, fontsize=10];\n";
   for (Round r = 0; r <= dag.highest_round(); ++r) {
      auto blocks = dag.blocks_at(r);
      if (blocks.empty()) continue;
      os << "  { rank=same;";
      for (const auto& b : blocks) os << ' ' << id(b->reference()) << ';';
      os << " }\n";
   }
   for (const auto& b : dag.blocks()) {
      auto ref = b->reference();
      auto it = names.find(ref);
      auto label = it != names.end() ? it->second : "A" + std::to_string(ref.author) + "@" + std::to_string(ref.round);
      os << "  " << id(ref) << " [label=\"" << label << "\"";
      if (leaders.contains(ref)) os << ", shape=box, style=bold";
      if (dag.slot_blocks(ref.author, ref.round).size() > 1) os << ", color=red";
      os << "];\n";
   }
   for (const auto& b : dag.blocks())
      for (const auto& p : b->parents()) os << "  " << id(b->reference()) << " -> " << id(p) << ";\n";
   os << "}\n";
}

} // namespace mysticeti

#pragma once

#include "mysticeti/simulator.hpp"

#include <json.hpp>

#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

namespace mysticeti {

struct ConfigError : std::runtime_error {
   using std::runtime_error::runtime_error;
};

namespace detail {

using json = nlohmann::ordered_json;

inline void reject_unknown(const json& obj, std::initializer_list<std::string_view> keys, const std::string& where) {
   if (!obj.is_object()) throw ConfigError(where + " must be an object");
   for (const auto& [k, _] : obj.items()) {
      bool known = false;
      for (auto key : keys) known = known || key == k;
      if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
   }
}

template <typename T>
void read(const json& obj, std::string_view key, T& out) {
   auto it = obj.find(std::string(key));
   if (it == obj.end()) return;
   try {
      out = it->template get<T>();
   } catch (const nlohmann::json::exception&) {
      throw ConfigError("bad value for '" + std::string(key) + "'");
   }
}

inline Behavior parse_behavior(const std::string& s) {
   if (s == "split-views") return Behavior::SplitViews;
   if (s == "duplicate-tx") return Behavior::DuplicateTx;
   throw ConfigError("unknown equivocation strategy '" + s + "'");
}

inline LeaderSchedule::Kind parse_schedule(const std::string& s) {
   if (s == "round-robin") return LeaderSchedule::Kind::RoundRobin;
   if (s == "fixed") return LeaderSchedule::Kind::Fixed;
   throw ConfigError("unknown schedule '" + s + "'");
}

} // namespace detail

/// `crash:1@0,mute:2@1500,equivocate:3:split-views`
inline std::vector<FaultSpec> parse_fault_list(std::string_view text) {
   std::vector<FaultSpec> out;
   std::size_t start = 0;
   while (start < text.size()) {
      auto end = text.find(',', start);
      if (end == std::string_view::npos) end = text.size();
      std::string item(text.substr(start, end - start));
      start = end + 1;
      if (item.empty()) continue;
      auto colon = item.find(':');
      if (colon == std::string::npos) throw ConfigError("fault '" + item + "' needs kind:authority");
      auto kind = item.substr(0, colon);
      auto rest = item.substr(colon + 1);
      FaultSpec f;
      try {
         if (kind == "crash" || kind == "mute") {
            f.kind = kind == "crash" ? FaultSpec::Kind::Crash : FaultSpec::Kind::Mute;
            auto at = rest.find('@');
            f.authority = static_cast<AuthorityIndex>(std::stoul(rest.substr(0, at)));
            if (at != std::string::npos) f.at = std::stoull(rest.substr(at + 1));
         } else if (kind == "equivocate") {
            f.kind = FaultSpec::Kind::Equivocate;
            auto c2 = rest.find(':');
            f.authority = static_cast<AuthorityIndex>(std::stoul(rest.substr(0, c2)));
            if (c2 != std::string::npos) f.strategy = detail::parse_behavior(rest.substr(c2 + 1));
         } else {
            throw ConfigError("unknown fault kind '" + kind + "'");
         }
      } catch (const std::logic_error&) {
         throw ConfigError("malformed fault '" + item + "'");
      }
      out.push_back(f);
   }
   return out;
}

inline SimConfig sim_config_from_json(const nlohmann::ordered_json& j) {
   using detail::read;
   detail::reject_unknown(j,
                          {"seed", "n", "latency", "pair_latency", "gst", "delta", "max_round", "time_limit",
                           "leader_timeout", "wave_length", "num_of_proposers", "schedule", "drift_tolerance",
                           "max_suspend", "epoch_length", "queue_capacity", "workload", "faults", "allow_beyond_f",
                           "trace"},
                          "config");
   SimConfig c;
   read(j, "seed", c.seed);
   read(j, "n", c.n);
   if (j.contains("latency")) {
      const auto& l = j["latency"];
      if (l.is_number_unsigned()) {
         c.latency.min = c.latency.max = l.get<Millis>();
      } else {
         detail::reject_unknown(l, {"min", "max"}, "latency");
         read(l, "min", c.latency.min);
         read(l, "max", c.latency.max);
      }
   }
   if (j.contains("pair_latency")) {
      for (const auto& p : j["pair_latency"]) {
         detail::reject_unknown(p, {"from", "to", "min", "max"}, "pair_latency entry");
         PairLatency pl;
         read(p, "from", pl.from);
         read(p, "to", pl.to);
         read(p, "min", pl.bounds.min);
         read(p, "max", pl.bounds.max);
         c.pair_latency.push_back(pl);
      }
   }
   read(j, "gst", c.gst);
   read(j, "delta", c.delta);
   read(j, "max_round", c.max_round);
   read(j, "time_limit", c.time_limit);
   read(j, "leader_timeout", c.leader_timeout);
   read(j, "wave_length", c.decider.wave_length);
   read(j, "num_of_proposers", c.decider.num_of_proposers);
   if (j.contains("schedule")) c.schedule = detail::parse_schedule(j["schedule"].get<std::string>());
   read(j, "drift_tolerance", c.timestamps.drift_tolerance);
   read(j, "max_suspend", c.timestamps.max_suspend);
   read(j, "epoch_length", c.epoch_length);
   read(j, "queue_capacity", c.queue_capacity);
   if (j.contains("workload")) {
      const auto& w = j["workload"];
      detail::reject_unknown(w,
                             {"tx_per_second", "start", "stop", "conflict_rate", "mixed_rate", "shared_rate",
                              "resubmit_after_close"},
                             "workload");
      read(w, "tx_per_second", c.workload.tx_per_second);
      read(w, "start", c.workload.start);
      read(w, "stop", c.workload.stop);
      read(w, "conflict_rate", c.workload.conflict_rate);
      read(w, "mixed_rate", c.workload.mixed_rate);
      read(w, "shared_rate", c.workload.shared_rate);
      read(w, "resubmit_after_close", c.workload.resubmit_after_close);
   }
   if (j.contains("faults")) {
      for (const auto& f : j["faults"]) {
         detail::reject_unknown(f, {"authority", "kind", "at", "strategy"}, "fault");
         FaultSpec spec;
         read(f, "authority", spec.authority);
         read(f, "at", spec.at);
         auto kind = f.value("kind", std::string("crash"));
         if (kind == "crash") spec.kind = FaultSpec::Kind::Crash;
         else if (kind == "mute") spec.kind = FaultSpec::Kind::Mute;
         else if (kind == "equivocate") spec.kind = FaultSpec::Kind::Equivocate;
         else throw ConfigError("unknown fault kind '" + kind + "'");
         if (f.contains("strategy")) spec.strategy = detail::parse_behavior(f["strategy"].get<std::string>());
         c.faults.push_back(spec);
      }
   }
   read(j, "allow_beyond_f", c.allow_beyond_f);
   read(j, "trace", c.trace);
   return c;
}

inline SimConfig parse_sim_config(std::string_view text) {
   nlohmann::ordered_json j;
   try {
      j = nlohmann::ordered_json::parse(text);
   } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
   }
   return sim_config_from_json(j);
}

inline nlohmann::ordered_json sim_config_to_json(const SimConfig& c) {
   nlohmann::ordered_json j;
   j["seed"] = c.seed;
   j["n"] = c.n;
   j["latency"] = {{"min", c.latency.min}, {"max", c.latency.max}};
   if (!c.pair_latency.empty()) {
      j["pair_latency"] = nlohmann::ordered_json::array();
      for (const auto& p : c.pair_latency)
         j["pair_latency"].push_back({{"from", p.from}, {"to", p.to}, {"min", p.bounds.min}, {"max", p.bounds.max}});
   }
   j["gst"] = c.gst;
   j["delta"] = c.delta;
   j["max_round"] = c.max_round;
   j["time_limit"] = c.time_limit;
   j["leader_timeout"] = c.leader_timeout;
   j["wave_length"] = c.decider.wave_length;
   j["num_of_proposers"] = c.decider.num_of_proposers;
   j["schedule"] = c.schedule == LeaderSchedule::Kind::Fixed ? "fixed" : "round-robin";
   j["drift_tolerance"] = c.timestamps.drift_tolerance;
   j["max_suspend"] = c.timestamps.max_suspend;
   j["epoch_length"] = c.epoch_length;
   j["queue_capacity"] = c.queue_capacity;
   j["workload"] = {{"tx_per_second", c.workload.tx_per_second}, {"start", c.workload.start},
                    {"stop", c.workload.stop},                   {"conflict_rate", c.workload.conflict_rate},
                    {"mixed_rate", c.workload.mixed_rate},       {"shared_rate", c.workload.shared_rate},
                    {"resubmit_after_close", c.workload.resubmit_after_close}};
   j["faults"] = nlohmann::ordered_json::array();
   for (const auto& f : c.faults) {
      nlohmann::ordered_json fj{{"authority", f.authority}, {"kind", std::string(to_string(f.kind))}, {"at", f.at}};
      if (f.kind == FaultSpec::Kind::Equivocate) fj["strategy"] = std::string(to_string(f.strategy));
      j["faults"].push_back(fj);
   }
   j["allow_beyond_f"] = c.allow_beyond_f;
   j["trace"] = c.trace;
   return j;
}

} // namespace mysticeti

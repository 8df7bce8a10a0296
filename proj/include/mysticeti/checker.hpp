#pragma once

#include "mysticeti/simulator.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace mysticeti {

struct Violation {
   std::string property;
   std::string detail;
   std::vector<std::string> trace;
   std::vector<std::pair<AuthorityIndex, Round>> slots;  // trace events for these slots are excerpted

   Violation(std::string property, std::string detail, std::vector<std::string> trace = {},
             std::vector<std::pair<AuthorityIndex, Round>> slots = {})
       : property(std::move(property)), detail(std::move(detail)), trace(std::move(trace)), slots(std::move(slots)) {}
};

struct CheckReport {
   std::optional<Violation> violation;

   bool clean() const { return !violation.has_value(); }

   std::string summary() const {
      if (clean()) return "clean";
      std::ostringstream os;
      os << "violation [" << violation->property << "] " << violation->detail;
      for (const auto& line : violation->trace) os << "\n  " << line;
      return os.str();
   }
};

/// What one validator reports: its decided slots in order and its commit log.
struct ValidatorView {
   AuthorityIndex authority = 0;
   std::vector<SlotStatus> slots;
   std::vector<CommitRecord> commits;
};

inline ValidatorView view_of(const Validator& v) {
   ValidatorView view;
   view.authority = v.authority();
   for (const auto& e : v.slot_log()) view.slots.push_back(e.status);
   view.commits = v.commits();
   return view;
}

inline std::string describe(const SlotStatus& s) {
   std::string out = s.slot.to_string() + " " + std::string(to_string(s.decision));
   if (s.block) out += " " + s.block->to_string();
   out += s.direct ? " (direct)" : " (indirect)";
   return out;
}

inline std::optional<Violation> check_slot_agreement(std::span<const ValidatorView> views) {
   std::map<Slot, std::pair<AuthorityIndex, SlotStatus>> first;
   for (const auto& view : views) {
      for (const auto& s : view.slots) {
         if (!s.decided()) continue;
         auto [it, fresh] = first.try_emplace(s.slot, view.authority, s);
         if (fresh) continue;
         const auto& other = it->second.second;
         if (other.decision != s.decision || other.block != s.block) {
            return Violation{"slot-agreement",
                             "validators " + std::to_string(it->second.first) + " and " +
                                 std::to_string(view.authority) + " disagree on slot " + s.slot.to_string(),
                             {"validator " + std::to_string(it->second.first) + ": " + describe(other),
                              "validator " + std::to_string(view.authority) + ": " + describe(s)},
                             {{s.slot.authority, s.slot.round}}};
         }
      }
   }
   return std::nullopt;
}

inline std::optional<Violation> check_prefix(std::span<const ValidatorView> views) {
   for (std::size_t i = 0; i < views.size(); ++i) {
      for (std::size_t j = i + 1; j < views.size(); ++j) {
         const auto& a = views[i].commits;
         const auto& b = views[j].commits;
         auto common = std::min(a.size(), b.size());
         for (std::size_t k = 0; k < common; ++k) {
            if (a[k] == b[k]) continue;
            return Violation{"prefix",
                             "commit " + std::to_string(k) + " differs between validators " +
                                 std::to_string(views[i].authority) + " and " + std::to_string(views[j].authority),
                             {"validator " + std::to_string(views[i].authority) + ": leader " + a[k].leader.to_string(),
                              "validator " + std::to_string(views[j].authority) + ": leader " + b[k].leader.to_string()},
                             {{a[k].leader.author, a[k].leader.round}, {b[k].leader.author, b[k].leader.round}}};
         }
      }
   }
   return std::nullopt;
}

/// Each block at most once over the sequence; every record is exactly the new part of its leader's history.
inline std::optional<Violation> check_commit_integrity(const ValidatorView& view, const DagState& dag) {
   RefSet delivered;
   for (const auto& c : view.commits) {
      auto expected = linearize(c.leader, delivered, dag);
      if (expected != c.blocks)
         return Violation{"integrity",
                          "validator " + std::to_string(view.authority) + " commit " + std::to_string(c.index) +
                              " does not match the leader's undelivered history",
                          {"leader " + c.leader.to_string()}};
      delivered.insert(c.blocks.begin(), c.blocks.end());
   }
   return std::nullopt;
}

inline std::optional<Violation> check_timestamps(const ValidatorView& view, const DagState& dag) {
   Millis previous = 0;
   for (const auto& c : view.commits) {
      auto expected = std::max(previous, dag.at(c.leader).timestamp());
      if (c.timestamp != expected || c.timestamp < previous)
         return Violation{"timestamps",
                          "validator " + std::to_string(view.authority) + " commit " + std::to_string(c.index) +
                              " has timestamp " + std::to_string(c.timestamp) + ", expected " +
                              std::to_string(expected),
                          {}};
      previous = c.timestamp;
   }
   return std::nullopt;
}

/// Union of several stores; each must be closed under parents.
inline DagState merge_dags(const std::vector<const DagState*>& dags) {
   std::map<BlockRef, BlockPtr> all;
   for (const auto* d : dags)
      for (const auto& b : d->blocks()) all.emplace(b->reference(), b);
   DagState merged;
   for (const auto& [ref, b] : all) merged.insert(b);  // map order is round-major
   return merged;
}

/// At most one proposal per slot gathers 2f+1 distinct-author votes.
inline std::optional<Violation> check_unique_certificates(const DagState& dag, const Committee& committee) {
   for (const auto& [author, round] : dag.equivocations()) {
      std::vector<BlockRef> certified;
      for (const auto& proposal : dag.slot_blocks(author, round)) {
         std::set<AuthorityIndex> voters;
         for (const auto& b : dag.blocks_at(round + 1))
            if (is_vote(*b, *proposal, dag)) voters.insert(b->author());
         if (voters.size() >= committee.quorum_threshold()) certified.push_back(proposal->reference());
      }
      if (certified.size() > 1) {
         Violation v{"unique-certificate", "slot A" + std::to_string(author) + "@" + std::to_string(round) +
                                               " has " + std::to_string(certified.size()) + " certified proposals",
                     {},
                     {{author, round}}};
         for (const auto& c : certified) v.trace.push_back("certified " + c.to_string());
         return v;
      }
   }
   return std::nullopt;
}

inline std::optional<Violation> check_fpc_safety(const SimResult& run) {
   std::map<ObjectRef, std::pair<Digest, AuthorityIndex>> finalized;
   std::map<std::pair<Epoch, ObjectRef>, std::pair<Digest, AuthorityIndex>> executed;
   for (auto a : run.honest) {
      for (const auto& [key, rec] : run.validators[a].fastpath().records()) {
         for (const auto& obj : rec.tx.owned_inputs()) {
            if (rec.status == TxStatus::Finalized) {
               auto [it, fresh] = finalized.try_emplace(obj, rec.tx.id(), a);
               if (!fresh && it->second.first != rec.tx.id())
                  return Violation{"fpc-safety",
                                   "conflicting transactions finalized on object " + std::to_string(obj.id) + "." +
                                       std::to_string(obj.version),
                                   {"validator " + std::to_string(it->second.second) + ": " +
                                        it->second.first.short_hex(),
                                    "validator " + std::to_string(a) + ": " + rec.tx.id().short_hex()}};
            }
            if (rec.executed_at) {
               auto [it, fresh] = executed.try_emplace({key.first, obj}, rec.tx.id(), a);
               if (!fresh && it->second.first != rec.tx.id())
                  return Violation{"execution-intersection",
                                   "conflicting transactions executed in epoch " + std::to_string(key.first),
                                   {"validator " + std::to_string(it->second.second) + ": " +
                                        it->second.first.short_hex(),
                                    "validator " + std::to_string(a) + ": " + rec.tx.id().short_hex()}};
            }
         }
      }
   }
   return std::nullopt;
}

/// At every close: each finalized transaction of the closed epoch has its finality evidence inside
/// the committed history, and nothing is left executed-but-unfinalized.
inline std::optional<Violation> check_epoch_close(const Validator& v, const Committee& committee) {
   const auto& fp = v.fastpath();
   for (const auto& close : v.epoch_closes()) {
      std::span<const CommitRecord> prefix(v.commits().data(), close.commit_index + 1);
      auto committed = committed_blocks(prefix);
      for (const auto& [key, rec] : fp.records()) {
         if (key.first != close.epoch) continue;
         auto where = "validator " + std::to_string(v.authority()) + " epoch " + std::to_string(close.epoch) + " tx " +
                      rec.tx.id().short_hex();
         if (rec.status == TxStatus::Executed)
            return Violation{"epoch-close", where + " still executed after close", {}};
         if (rec.status != TxStatus::Finalized) continue;
         bool evidence = false;
         for (const auto& pos : rec.positions) {
            if (rec.tx.is_mixed()) {
               evidence = finalize_mixed(pos, v.dag(), prefix, committee);
            } else if (const auto* t = fp.tally(pos)) {
               evidence = std::any_of(t->certificates.begin(), t->certificates.end(),
                                      [&](const BlockRef& c) { return committed.contains(c); });
            }
            if (evidence) break;
         }
         if (!evidence) return Violation{"epoch-close", where + " finalized without committed certificate", {}};
      }
   }
   return std::nullopt;
}

inline std::vector<std::string> trace_excerpt(const SimResult& run, const Violation& v, std::size_t limit = 12) {
   std::vector<std::string> out;
   std::set<std::pair<AuthorityIndex, Round>> slots(v.slots.begin(), v.slots.end());
   for (const auto& e : run.trace) {
      if (out.size() >= limit) break;
      bool relevant = e.kind == TraceEvent::Kind::Crash || e.kind == TraceEvent::Kind::Recover ||
                      slots.contains({e.ref.author, e.ref.round});
      if (!relevant || e.kind == TraceEvent::Kind::Submit) continue;
      out.push_back("t=" + std::to_string(e.at) + " " + std::string(to_string(e.kind)) + " " +
                    std::to_string(e.from) + "->" + std::to_string(e.to) + " " + e.ref.to_string());
   }
   return out;
}

/// Cross-checks every honest validator of a finished run.
inline CheckReport multi_view_check(const SimResult& run) {
   Committee committee(run.config.n);
   std::vector<ValidatorView> views;
   std::vector<const DagState*> dags;
   for (auto a : run.honest) {
      views.push_back(view_of(run.validators[a]));
      dags.push_back(&run.validators[a].dag());
   }
   auto finish = [&](Violation v) {
      auto excerpt = trace_excerpt(run, v);
      v.trace.insert(v.trace.end(), excerpt.begin(), excerpt.end());
      return CheckReport{std::move(v)};
   };
   if (auto v = check_slot_agreement(views)) return finish(*v);
   if (auto v = check_prefix(views)) return finish(*v);
   for (std::size_t i = 0; i < views.size(); ++i) {
      if (auto v = check_commit_integrity(views[i], *dags[i])) return finish(*v);
      if (auto v = check_timestamps(views[i], *dags[i])) return finish(*v);
   }
   if (!views.empty()) {
      auto merged = merge_dags(dags);
      if (auto v = check_unique_certificates(merged, committee)) return finish(*v);
   }
   if (auto v = check_fpc_safety(run)) return finish(*v);
   for (auto a : run.honest)
      if (auto v = check_epoch_close(run.validators[a], committee)) return finish(*v);
   return {};
}

} // namespace mysticeti

#pragma once

#include "mysticeti/committer.hpp"
#include "mysticeti/dag.hpp"
#include "mysticeti/fastpath.hpp"

#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mysticeti {

// Line-oriented DAG description:
//
//   committee n=4
//   schedule fixed | round-robin
//   proposers 2
//   wave-length 3
//   block <name> author=A<i> round=<r> parents=[<name>, ...] [ts=<ms>] [epoch=<e>]
//         [tx=[<label>:<obj>.<ver>+<obj>.<ver>[:shared], <label>, ...]] [votes=[<label>, -<label>]]
//         [ecbit] [invalid-expected]
//   expect slot A<i>@<r> = commit [<name>] | skip | undecided
//   expect sequence = [<name>, ...]
//   expect executed|finalized|mixed-finalized <label> = true|false
//
// Genesis blocks are named G0..G<n-1>. A bare tx label re-includes an earlier transaction;
// votes name the first block that carried the label. Every block also carries one trailing
// transaction whose payload is its name, so same-slot declarations get distinct digests.

struct ParseError : std::runtime_error {
   std::size_t line;
   std::size_t column;
   ParseError(std::size_t line, std::size_t column, const std::string& msg)
       : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg), line(line),
         column(column) {}
};

struct BuildError : std::runtime_error {
   using std::runtime_error::runtime_error;
};

struct TxDecl {
   std::string label;
   std::vector<ObjectRef> objects;
   bool shared = false;
   bool reference = false;  // bare label: re-include an earlier declaration
   bool operator==(const TxDecl&) const = default;
};

struct VoteDecl {
   std::string label;
   bool accept = true;
   bool operator==(const VoteDecl&) const = default;
};

struct BlockDecl {
   std::string name;
   AuthorityIndex author = 0;
   Round round = 0;
   std::vector<std::string> parents;
   std::optional<Millis> timestamp;
   Epoch epoch = 0;
   std::vector<TxDecl> transactions;
   std::vector<VoteDecl> votes;
   bool epoch_change_bit = false;
   bool invalid_expected = false;
   bool operator==(const BlockDecl&) const = default;
};

struct SlotExpect {
   AuthorityIndex author = 0;
   Round round = 0;
   Decision decision = Decision::Undecided;
   std::optional<std::string> block;
   bool operator==(const SlotExpect&) const = default;
};

struct TxExpect {
   enum class Kind { Executed, Finalized, MixedFinalized };
   Kind kind = Kind::Executed;
   std::string label;
   bool value = true;
   bool operator==(const TxExpect&) const = default;
};

inline std::string_view to_string(TxExpect::Kind k) {
   switch (k) {
      case TxExpect::Kind::Executed: return "executed";
      case TxExpect::Kind::Finalized: return "finalized";
      case TxExpect::Kind::MixedFinalized: return "mixed-finalized";
   }
   return "?";
}

struct Scenario {
   std::size_t committee_size = 4;
   LeaderSchedule::Kind schedule = LeaderSchedule::Kind::RoundRobin;
   std::uint32_t proposers = DeciderConfig{}.num_of_proposers;
   std::uint32_t wave_length = DeciderConfig{}.wave_length;
   std::vector<BlockDecl> blocks;
   std::vector<SlotExpect> slots;
   std::optional<std::vector<std::string>> sequence;
   std::vector<TxExpect> transactions;
   bool operator==(const Scenario&) const = default;

   DeciderConfig decider() const { return {wave_length, proposers}; }
};

namespace detail {

class LineCursor {
public:
   LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

   void skip_space() {
      while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
   }
   bool done() {
      skip_space();
      return pos_ >= text_.size();
   }
   std::size_t column() const { return pos_ + 1; }

   [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, column(), msg); }

   bool peek(char c) {
      skip_space();
      return pos_ < text_.size() && text_[pos_] == c;
   }
   void expect(char c) {
      if (!peek(c)) fail(std::string("expected '") + c + "'");
      ++pos_;
   }
   bool accept(char c) {
      if (!peek(c)) return false;
      ++pos_;
      return true;
   }

   static bool word_char(char c) {
      return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '\'';
   }

   std::string word() {
      skip_space();
      auto start = pos_;
      while (pos_ < text_.size() && word_char(text_[pos_])) ++pos_;
      if (start == pos_) fail("expected a word");
      return std::string(text_.substr(start, pos_ - start));
   }

   std::string name() {
      skip_space();
      auto start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_' || text_[pos_] == '\''))
         ++pos_;
      if (start == pos_) fail("expected a name");
      return std::string(text_.substr(start, pos_ - start));
   }

   std::uint64_t number() {
      skip_space();
      auto start = pos_;
      std::uint64_t v = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
         auto next = v * 10 + static_cast<std::uint64_t>(text_[pos_] - '0');
         if (next / 10 != v) fail("number too large");
         v = next;
         ++pos_;
      }
      if (start == pos_) fail("expected a number");
      return v;
   }

   AuthorityIndex authority() {
      skip_space();
      if (pos_ >= text_.size() || text_[pos_] != 'A') fail("expected an authority like A0");
      ++pos_;
      auto v = number();
      if (v > 0xffffffffULL) fail("authority index too large");
      return static_cast<AuthorityIndex>(v);
   }

   /// `[a, b, c]` of items parsed by `item`.
   template <typename F>
   void list(F&& item) {
      expect('[');
      if (accept(']')) return;
      do item();
      while (accept(','));
      expect(']');
   }

private:
   std::string_view text_;
   std::size_t line_;
   std::size_t pos_ = 0;
};

inline Decision parse_decision(LineCursor& c) {
   auto w = c.word();
   if (w == "commit") return Decision::Commit;
   if (w == "skip") return Decision::Skip;
   if (w == "undecided") return Decision::Undecided;
   c.fail("expected commit, skip or undecided");
}

inline bool parse_bool(LineCursor& c) {
   auto w = c.word();
   if (w == "true") return true;
   if (w == "false") return false;
   c.fail("expected true or false");
}

inline void parse_block(LineCursor& c, Scenario& s) {
   BlockDecl b;
   b.name = c.name();
   bool has_author = false, has_round = false, has_parents = false;
   while (!c.done()) {
      auto key = c.word();
      if (key == "ecbit") {
         b.epoch_change_bit = true;
         continue;
      }
      if (key == "invalid-expected") {
         b.invalid_expected = true;
         continue;
      }
      c.expect('=');
      if (key == "author") {
         b.author = c.authority();
         has_author = true;
      } else if (key == "round") {
         b.round = c.number();
         has_round = true;
      } else if (key == "parents") {
         c.list([&] { b.parents.push_back(c.name()); });
         has_parents = true;
      } else if (key == "ts") {
         b.timestamp = c.number();
      } else if (key == "epoch") {
         b.epoch = c.number();
      } else if (key == "tx") {
         c.list([&] {
            TxDecl tx;
            tx.label = c.name();
            if (!c.accept(':')) {
               tx.reference = true;
               b.transactions.push_back(tx);
               return;
            }
            do {
               ObjectRef o;
               o.id = c.number();
               c.expect('.');
               o.version = c.number();
               tx.objects.push_back(o);
            } while (c.accept('+'));
            if (c.accept(':')) {
               if (c.word() != "shared") c.fail("expected 'shared'");
               tx.shared = true;
            }
            b.transactions.push_back(tx);
         });
      } else if (key == "votes") {
         c.list([&] {
            VoteDecl v;
            if (c.accept('-')) v.accept = false;
            v.label = c.name();
            b.votes.push_back(v);
         });
      } else {
         c.fail("unknown block attribute '" + key + "'");
      }
   }
   if (!has_author || !has_round || !has_parents) c.fail("block needs author=, round= and parents=");
   s.blocks.push_back(std::move(b));
}

inline void parse_expect(LineCursor& c, Scenario& s) {
   auto what = c.word();
   if (what == "slot") {
      SlotExpect e;
      e.author = c.authority();
      c.expect('@');
      e.round = c.number();
      c.expect('=');
      e.decision = parse_decision(c);
      if (e.decision == Decision::Commit && !c.done()) e.block = c.name();
      s.slots.push_back(e);
   } else if (what == "sequence") {
      c.expect('=');
      std::vector<std::string> seq;
      c.list([&] { seq.push_back(c.name()); });
      s.sequence = std::move(seq);
   } else if (what == "executed" || what == "finalized" || what == "mixed-finalized") {
      TxExpect e;
      e.kind = what == "executed"    ? TxExpect::Kind::Executed
               : what == "finalized" ? TxExpect::Kind::Finalized
                                     : TxExpect::Kind::MixedFinalized;
      e.label = c.name();
      c.expect('=');
      e.value = parse_bool(c);
      s.transactions.push_back(e);
   } else {
      c.fail("unknown expectation '" + what + "'");
   }
}

} // namespace detail

inline Scenario parse_scenario(std::string_view text) {
   Scenario s;
   std::size_t line_no = 0;
   std::size_t start = 0;
   while (start <= text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      auto line = text.substr(start, end - start);
      ++line_no;
      start = end + 1;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      detail::LineCursor c(line, line_no);
      if (c.done()) {
         if (end == text.size()) break;
         continue;
      }
      auto keyword = c.word();
      if (keyword == "committee") {
         if (c.word() != "n") c.fail("expected n=");
         c.expect('=');
         s.committee_size = c.number();
      } else if (keyword == "schedule") {
         auto kind = c.word();
         if (kind == "fixed") s.schedule = LeaderSchedule::Kind::Fixed;
         else if (kind == "round-robin") s.schedule = LeaderSchedule::Kind::RoundRobin;
         else c.fail("expected fixed or round-robin");
      } else if (keyword == "proposers") {
         s.proposers = static_cast<std::uint32_t>(c.number());
      } else if (keyword == "wave-length") {
         s.wave_length = static_cast<std::uint32_t>(c.number());
      } else if (keyword == "block") {
         detail::parse_block(c, s);
      } else if (keyword == "expect") {
         detail::parse_expect(c, s);
      } else {
         c.fail("unknown statement '" + keyword + "'");
      }
      if (!c.done()) c.fail("unexpected trailing input");
      if (end == text.size()) break;
   }
   return s;
}

inline std::string print_scenario(const Scenario& s) {
   std::ostringstream os;
   os << "committee n=" << s.committee_size << "\n";
   os << "schedule " << (s.schedule == LeaderSchedule::Kind::Fixed ? "fixed" : "round-robin") << "\n";
   os << "proposers " << s.proposers << "\n";
   os << "wave-length " << s.wave_length << "\n";
   auto join = [&](const auto& items, auto&& fn) {
      os << "[";
      for (std::size_t i = 0; i < items.size(); ++i) {
         if (i) os << ", ";
         fn(items[i]);
      }
      os << "]";
   };
   for (const auto& b : s.blocks) {
      os << "block " << b.name << " author=A" << b.author << " round=" << b.round << " parents=";
      join(b.parents, [&](const std::string& p) { os << p; });
      if (b.timestamp) os << " ts=" << *b.timestamp;
      if (b.epoch) os << " epoch=" << b.epoch;
      if (!b.transactions.empty()) {
         os << " tx=";
         join(b.transactions, [&](const TxDecl& tx) {
            os << tx.label;
            if (tx.reference) return;
            os << ":";
            for (std::size_t i = 0; i < tx.objects.size(); ++i)
               os << (i ? "+" : "") << tx.objects[i].id << "." << tx.objects[i].version;
            if (tx.shared) os << ":shared";
         });
      }
      if (!b.votes.empty()) {
         os << " votes=";
         join(b.votes, [&](const VoteDecl& v) { os << (v.accept ? "" : "-") << v.label; });
      }
      if (b.epoch_change_bit) os << " ecbit";
      if (b.invalid_expected) os << " invalid-expected";
      os << "\n";
   }
   for (const auto& e : s.slots) {
      os << "expect slot A" << e.author << "@" << e.round << " = " << to_string(e.decision);
      if (e.block) os << " " << *e.block;
      os << "\n";
   }
   if (s.sequence) {
      os << "expect sequence = ";
      join(*s.sequence, [&](const std::string& n) { os << n; });
      os << "\n";
   }
   for (const auto& e : s.transactions)
      os << "expect " << to_string(e.kind) << " " << e.label << " = " << (e.value ? "true" : "false") << "\n";
   return os.str();
}

struct BuiltScenario {
   Committee committee{4};
   DagState dag;
   std::map<std::string, BlockPtr> blocks;
   std::map<BlockRef, std::string> names;
   std::map<std::string, Transaction> transactions;
   std::map<std::string, TxPosition> positions;
   std::vector<std::string> rejected;  // invalid-expected blocks and their reasons

   std::string name_of(const BlockRef& ref) const {
      auto it = names.find(ref);
      return it == names.end() ? ref.to_string() : it->second;
   }
};

inline BuiltScenario build_scenario(const Scenario& s) {
   BuiltScenario out;
   out.committee = Committee(s.committee_size);
   out.dag = DagState::with_genesis(out.committee);
   for (AuthorityIndex a = 0; a < s.committee_size; ++a) {
      auto g = out.dag.slot_blocks(a, 0).front();
      auto name = "G" + std::to_string(a);
      out.blocks[name] = g;
      out.names[g->reference()] = name;
   }
   std::set<std::string> invalid;
   for (const auto& decl : s.blocks) {
      auto where = "block " + decl.name + ": ";
      if (out.blocks.contains(decl.name) || invalid.contains(decl.name)) throw BuildError(where + "duplicate name");
      BlockContents c;
      c.epoch = decl.epoch;
      c.author = decl.author;
      c.round = decl.round;
      c.epoch_change_bit = decl.epoch_change_bit;
      c.timestamp = decl.timestamp.value_or(decl.round);
      for (const auto& p : decl.parents) {
         if (invalid.contains(p)) throw BuildError(where + "parent " + p + " is an invalid block");
         auto it = out.blocks.find(p);
         if (it == out.blocks.end()) throw BuildError(where + "unknown parent " + p);
         c.parents.push_back(it->second->reference());
      }
      std::vector<std::string> new_labels;
      for (const auto& tx : decl.transactions) {
         if (tx.reference) {
            auto it = out.transactions.find(tx.label);
            if (it == out.transactions.end()) throw BuildError(where + "unknown transaction " + tx.label);
            c.transactions.push_back(it->second);
            continue;
         }
         if (out.transactions.contains(tx.label)) throw BuildError(where + "transaction " + tx.label + " redeclared");
         Transaction t(tx.objects, tx.shared, Bytes(tx.label.begin(), tx.label.end()));
         out.transactions.emplace(tx.label, t);
         new_labels.push_back(tx.label);
         c.transactions.push_back(std::move(t));
      }
      for (const auto& v : decl.votes) {
         auto it = out.positions.find(v.label);
         if (it == out.positions.end()) throw BuildError(where + "vote for unknown transaction position " + v.label);
         c.votes.push_back({it->second.block, it->second.index, v.accept});
      }
      c.transactions.emplace_back(std::vector<ObjectRef>{}, false, Bytes(decl.name.begin(), decl.name.end()));

      auto block = Block::make_unsigned(std::move(c));
      auto verdict = verify_block(*block, out.committee, out.dag, block->timestamp());
      if (decl.invalid_expected) {
         if (verdict.accepted()) throw BuildError(where + "marked invalid-expected but passes verification");
         invalid.insert(decl.name);
         out.rejected.push_back(decl.name + " " + std::string(to_string(verdict.reason)));
         continue;
      }
      if (!verdict.accepted())
         throw BuildError(where + "fails verification: " +
                          (verdict.suspended() ? std::string("suspended") : std::string(to_string(verdict.reason))));
      out.dag.insert(block);
      out.blocks[decl.name] = block;
      out.names[block->reference()] = decl.name;
      const auto& txs = block->transactions();
      for (std::uint32_t i = 0; i < txs.size(); ++i) {
         for (const auto& [label, t] : out.transactions)
            if (t.id() == txs[i].id() && !out.positions.contains(label))
               out.positions[label] = {block->reference(), i};
      }
   }
   return out;
}

struct AssertReport {
   std::vector<std::string> lines;
   std::vector<std::string> failures;
   bool ok() const { return failures.empty(); }
};

/// Slot statuses from the universal committer over the whole built DAG.
inline std::vector<SlotStatus> scenario_statuses(const Scenario& s, const BuiltScenario& built) {
   Committer committer(built.committee, s.decider(), LeaderSchedule(s.committee_size, s.schedule));
   return committer.decide_slots(std::nullopt, built.dag);
}

inline std::vector<CommitRecord> scenario_commits(const Scenario& s, const BuiltScenario& built) {
   Committer committer(built.committee, s.decider(), LeaderSchedule(s.committee_size, s.schedule));
   CommitSequencer sequencer;
   std::vector<CommitRecord> out;
   for (const auto& status : committer.try_decide(std::nullopt, built.dag))
      if (auto rec = sequencer.sequence(status, built.dag)) out.push_back(*rec);
   return out;
}

inline AssertReport assert_scenario(const Scenario& s, const BuiltScenario& built) {
   AssertReport report;
   auto statuses = scenario_statuses(s, built);
   auto commits = scenario_commits(s, built);
   auto describe = [&](const SlotStatus& st) {
      std::string out(to_string(st.decision));
      if (st.block) out += " " + built.name_of(*st.block);
      return out;
   };

   for (const auto& e : s.slots) {
      auto label = "slot A" + std::to_string(e.author) + "@" + std::to_string(e.round);
      auto it = std::find_if(statuses.begin(), statuses.end(), [&](const SlotStatus& st) {
         return st.slot.authority == e.author && st.slot.round == e.round;
      });
      if (it == statuses.end()) {
         report.failures.push_back(label + ": not a proposer slot under this schedule");
         continue;
      }
      bool match = it->decision == e.decision && (!e.block || (it->block && built.name_of(*it->block) == *e.block));
      auto line = label + " = " + describe(*it) + (it->decided() ? (it->direct ? " (direct)" : " (indirect)") : "");
      report.lines.push_back(line);
      if (!match) {
         std::string want(to_string(e.decision));
         if (e.block) want += " " + *e.block;
         report.failures.push_back(label + ": expected " + want + ", got " + describe(*it));
      }
   }

   if (s.sequence) {
      std::vector<std::string> got;
      for (const auto& c : commits) got.push_back(built.name_of(c.leader));
      auto render = [](const std::vector<std::string>& v) {
         std::string out = "[";
         for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
         return out + "]";
      };
      report.lines.push_back("sequence = " + render(got));
      if (got != *s.sequence)
         report.failures.push_back("sequence: expected " + render(*s.sequence) + ", got " + render(got));
   }

   for (const auto& e : s.transactions) {
      auto it = built.positions.find(e.label);
      if (it == built.positions.end()) {
         report.failures.push_back(std::string(to_string(e.kind)) + " " + e.label + ": unknown transaction");
         continue;
      }
      bool got = false;
      switch (e.kind) {
         case TxExpect::Kind::Executed: got = executable(it->second, built.dag, built.committee); break;
         case TxExpect::Kind::Finalized: got = finalized(it->second, built.dag, commits, built.committee); break;
         case TxExpect::Kind::MixedFinalized:
            got = finalize_mixed(it->second, built.dag, commits, built.committee);
            break;
      }
      auto line = std::string(to_string(e.kind)) + " " + e.label + " = " + (got ? "true" : "false");
      report.lines.push_back(line);
      if (got != e.value) report.failures.push_back(line + " (expected " + (e.value ? "true" : "false") + ")");
   }
   return report;
}

} // namespace mysticeti

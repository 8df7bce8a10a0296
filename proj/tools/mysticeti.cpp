#include "mysticeti/mysticeti.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

namespace fs = std::filesystem;
using namespace mysticeti;

namespace {

struct UsageError : std::runtime_error {
   using std::runtime_error::runtime_error;
};

struct Overrides {
   std::string config;
   std::optional<std::uint64_t> seed;
   std::string faults;
   std::optional<Millis> gst;
   std::optional<Millis> delta;
   std::optional<Millis> leader_timeout;
   std::optional<std::uint32_t> proposers;
   std::optional<std::uint32_t> wave_length;
   std::optional<Round> max_round;
   std::optional<std::size_t> n;

   void attach(CLI::App* app, bool with_seed) {
      app->add_option("--config", config, "SimConfig JSON file")->check(CLI::ExistingFile);
      if (with_seed) app->add_option("--seed", seed, "RNG seed");
      app->add_option("--faults", faults, "e.g. crash:1@0,mute:2@500,equivocate:3:split-views");
      app->add_option("--gst", gst, "global stabilization time (ms)");
      app->add_option("--delta", delta, "post-GST latency bound (ms)");
      app->add_option("--leader-timeout", leader_timeout, "ms");
      app->add_option("--proposers", proposers, "proposer slots per round");
      app->add_option("--wave-length", wave_length, "rounds per wave");
      app->add_option("--max-round", max_round, "last round to propose");
      app->add_option("--n", n, "committee size");
   }

   bool has_config() const { return !config.empty(); }

   SimConfig base() const {
      if (!has_config()) return SimConfig{};
      auto bytes = read_file(config);
      return parse_sim_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
   }

   void apply(SimConfig& c) const {
      if (seed) c.seed = *seed;
      if (n) c.n = *n;
      if (!faults.empty()) c.faults = parse_fault_list(faults);
      if (gst) c.gst = *gst;
      if (delta) c.delta = *delta;
      if (leader_timeout) c.leader_timeout = *leader_timeout;
      if (proposers) c.decider.num_of_proposers = *proposers;
      if (wave_length) c.decider.wave_length = *wave_length;
      if (max_round) c.max_round = *max_round;
   }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
   std::vector<std::uint64_t> out;
   std::size_t start = 0;
   while (start <= text.size()) {
      auto end = text.find(',', start);
      if (end == std::string::npos) end = text.size();
      auto item = text.substr(start, end - start);
      start = end + 1;
      if (item.empty()) continue;
      try {
         auto dots = item.find("..");
         if (dots == std::string::npos) {
            out.push_back(std::stoull(item));
         } else {
            auto lo = std::stoull(item.substr(0, dots));
            auto hi = std::stoull(item.substr(dots + 2));
            if (hi < lo) throw UsageError("empty seed range " + item);
            for (auto s = lo; s <= hi; ++s) out.push_back(s);
         }
      } catch (const std::logic_error&) {
         throw UsageError("bad seed list '" + text + "'");
      }
   }
   if (out.empty()) throw UsageError("seed list is empty");
   return out;
}

MetricsFormat parse_format(const std::string& s) {
   if (s == "json-lines") return MetricsFormat::JsonLines;
   if (s == "csv") return MetricsFormat::Csv;
   throw UsageError("unknown format '" + s + "'");
}

std::ofstream open_out(const fs::path& p) {
   std::ofstream os(p, std::ios::binary);
   if (!os) throw std::runtime_error("cannot write " + p.string());
   return os;
}

void write_run(const SimResult& run, const fs::path& dir, MetricsFormat fmt) {
   fs::create_directories(dir);
   auto ext = fmt == MetricsFormat::Csv ? ".csv" : ".jsonl";
   open_out(dir / "config.json") << sim_config_to_json(run.config).dump(2) << '\n';
   open_out(dir / "summary.json") << run_summary(run).dump(2) << '\n';
   for (auto a : run.honest) {
      auto os = open_out(dir / ("commits-" + std::to_string(a) + ".jsonl"));
      write_commit_log(os, run.validators[a].commits());
   }
   {
      auto os = open_out(dir / (std::string("slots") + ext));
      write_slot_metrics(os, run.metrics, fmt);
   }
   {
      auto os = open_out(dir / (std::string("transactions") + ext));
      write_tx_metrics(os, run.metrics, fmt);
   }
   {
      auto os = open_out(dir / (std::string("rounds") + ext));
      write_round_metrics(os, run.metrics, fmt);
   }
   if (run.config.trace) {
      auto os = open_out(dir / "trace.jsonl");
      for (const auto& e : run.trace) {
         nlohmann::ordered_json j{{"at", e.at},
                                  {"kind", std::string(to_string(e.kind))},
                                  {"from", e.from},
                                  {"to", e.to},
                                  {"block", ref_json(e.ref)}};
         os << j.dump() << '\n';
      }
   }
}

std::string read_text(const std::string& path) {
   auto bytes = read_file(path);
   return std::string(bytes.begin(), bytes.end());
}

int cmd_sim(const Overrides& o, const std::string& out, const std::string& format) {
   auto fmt = parse_format(format);
   auto cfg = o.base();
   o.apply(cfg);
   try {
      cfg.validate();
   } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
   }
   auto run = run_simulation(cfg);
   auto report = multi_view_check(run);
   if (!out.empty()) {
      write_run(run, out, fmt);
      if (!report.clean()) open_out(fs::path(out) / "violation.txt") << report.summary() << '\n';
   }
   auto s = run_summary(run);
   std::cout << "sim seed=" << cfg.seed << " n=" << cfg.n << " commits=" << s["commits"].get<std::size_t>()
             << " highest_round=" << s["highest_round"].get<Round>() << " end_time=" << run.metrics.end_time
             << " check=" << (report.clean() ? "clean" : report.violation->property) << '\n';
   if (!report.clean()) {
      std::cerr << report.summary() << '\n';
      return 1;
   }
   return 0;
}

int cmd_scenario(const std::string& path, const std::string& out) {
   Scenario sc;
   try {
      sc = parse_scenario(read_text(path));
   } catch (const ParseError& e) {
      std::cerr << path << ":" << e.line << ":" << e.column << ": " << e.what() << '\n';
      return 1;
   }
   AssertReport report;
   try {
      report = assert_scenario(sc, build_scenario(sc));
   } catch (const BuildError& e) {
      std::cerr << path << ": " << e.what() << '\n';
      return 1;
   }
   if (!out.empty()) {
      fs::create_directories(out);
      auto os = open_out(fs::path(out) / "report.txt");
      for (const auto& line : report.lines) os << line << '\n';
   }
   for (const auto& f : report.failures) std::cerr << f << '\n';
   std::cout << "scenario " << path << " checks=" << report.lines.size() << " failures=" << report.failures.size()
             << '\n';
   return report.ok() ? 0 : 1;
}

int cmd_fuzz(const Overrides& o, const std::string& seeds_text, const std::string& out, const std::string& profile,
             unsigned jobs) {
   auto seeds = parse_seeds(seeds_text);
   FuzzProfile prof;
   if (profile == "consensus") prof = FuzzProfile::Consensus;
   else if (profile == "fastpath") prof = FuzzProfile::FastPath;
   else throw UsageError("unknown profile '" + profile + "'");

   std::vector<SimConfig> configs;
   SimConfig base = o.base();
   for (auto s : seeds) {
      SimConfig c = o.has_config() ? base : random_config(s, prof);
      c.seed = s;
      c.trace = true;
      o.apply(c);
      c.seed = s;
      try {
         c.validate();
      } catch (const std::invalid_argument& e) {
         throw UsageError("seed " + std::to_string(s) + ": " + e.what());
      }
      configs.push_back(std::move(c));
   }

   std::vector<std::optional<FuzzOutcome>> outcomes(configs.size());
   std::atomic<std::size_t> next{0};
   std::atomic<bool> failed{false};
   auto worker = [&] {
      for (;;) {
         auto i = next.fetch_add(1);
         if (i >= configs.size() || failed.load()) return;
         outcomes[i] = fuzz_one(configs[i]);
         if (!outcomes[i]->report.clean()) failed = true;
      }
   };
   jobs = std::max(1u, jobs);
   std::vector<std::thread> pool;
   for (unsigned t = 1; t < jobs; ++t) pool.emplace_back(worker);
   worker();
   for (auto& t : pool) t.join();

   std::size_t ran = 0, commits = 0;
   for (const auto& oc : outcomes) {
      if (!oc) continue;
      ++ran;
      commits += oc->commits;
      if (oc->report.clean()) continue;
      if (!out.empty()) {
         auto dir = fs::path(out) / ("seed-" + std::to_string(oc->seed));
         fs::create_directories(dir);
         open_out(dir / "config.json") << sim_config_to_json(oc->config).dump(2) << '\n';
         open_out(dir / "violation.txt") << "seed " << oc->seed << '\n' << oc->report.summary() << '\n';
      }
      std::cerr << "seed " << oc->seed << ": " << oc->report.summary() << '\n';
      std::cout << "fuzz seeds=" << ran << " violation_seed=" << oc->seed << " property=" << oc->report.violation->property
                << '\n';
      return 1;
   }
   std::cout << "fuzz seeds=" << ran << " commits=" << commits << " violations=0\n";
   return 0;
}

int cmd_export_dot(const Overrides& o, const std::string& scenario, const std::string& out) {
   std::ostringstream dot;
   if (!scenario.empty()) {
      Scenario sc;
      try {
         sc = parse_scenario(read_text(scenario));
      } catch (const ParseError& e) {
         std::cerr << scenario << ":" << e.line << ":" << e.column << ": " << e.what() << '\n';
         return 1;
      }
      auto built = build_scenario(sc);
      write_dot(dot, built.dag, built.names, scenario_commits(sc, built));
   } else {
      auto cfg = o.base();
      o.apply(cfg);
      try {
         cfg.validate();
      } catch (const std::invalid_argument& e) {
         throw UsageError(e.what());
      }
      auto run = run_simulation(cfg);
      if (run.honest.empty()) throw UsageError("no honest validator to export");
      const auto& v = run.validators[*run.honest.begin()];
      write_dot(dot, v.dag(), {}, v.commits());
   }
   if (out.empty()) {
      std::cout << dot.str();
   } else {
      auto p = fs::path(out);
      if (p.has_parent_path()) fs::create_directories(p.parent_path());
      open_out(p) << dot.str();
      std::cout << "export-dot wrote " << out << '\n';
   }
   return 0;
}

} // namespace

int main(int argc, char** argv) {
   CLI::App app{"Uncertified-DAG consensus kernel: simulator, scenarios and fuzzing"};
   app.require_subcommand(1, 1);

   Overrides sim_o, fuzz_o, dot_o;
   std::string sim_out, sim_format = "json-lines";
   auto* sim = app.add_subcommand("sim", "run one simulation and write metrics and commit logs");
   sim_o.attach(sim, true);
   sim->add_option("--out", sim_out, "output directory");
   sim->add_option("--format", sim_format, "json-lines or csv");

   std::string scenario_path, scenario_out;
   auto* scen = app.add_subcommand("scenario", "parse, build and check a .dag scenario file");
   scen->add_option("file", scenario_path, "scenario file")->required()->check(CLI::ExistingFile);
   scen->add_option("--out", scenario_out, "output directory");

   std::string seeds = "1..100", fuzz_out, profile = "consensus";
   unsigned jobs = 1;
   auto* fuzz = app.add_subcommand("fuzz", "check many randomized runs for safety violations");
   fuzz_o.attach(fuzz, false);
   fuzz->add_option("--seeds", seeds, "seed list, e.g. 1..1000 or 3,7,9");
   fuzz->add_option("--out", fuzz_out, "directory for violating seeds");
   fuzz->add_option("--profile", profile, "consensus or fastpath");
   fuzz->add_option("--jobs", jobs, "worker threads");

   std::string dot_scenario, dot_out;
   auto* dot = app.add_subcommand("export-dot", "render a scenario or simulated DAG as Graphviz");
   dot->add_option("scenario", dot_scenario, "scenario file")->check(CLI::ExistingFile);
   dot_o.attach(dot, true);
   dot->add_option("--out", dot_out, "output .dot file (stdout if omitted)");

   try {
      app.parse(argc, argv);
   } catch (const CLI::CallForHelp&) {
      std::cout << app.help();
      return 0;
   } catch (const CLI::ParseError& e) {
      std::cerr << "error: " << e.what() << "\n\n" << app.help();
      return 2;
   }

   try {
      if (sim->parsed()) return cmd_sim(sim_o, sim_out, sim_format);
      if (scen->parsed()) return cmd_scenario(scenario_path, scenario_out);
      if (fuzz->parsed()) return cmd_fuzz(fuzz_o, seeds, fuzz_out, profile, jobs);
      if (dot->parsed()) return cmd_export_dot(dot_o, dot_scenario, dot_out);
   } catch (const UsageError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
   } catch (const ConfigError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
   } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
   }
   return 2;
}

// dfscan: passive grouping, active fronting scans, classification and
// reporting, plus the local CDN simulator and the Host-rewrite demo.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dfscan/asn_table.hpp"
#include "dfscan/candidate_sets.hpp"
#include "dfscan/classifier.hpp"
#include "dfscan/dns_ingest.hpp"
#include "dfscan/errors.hpp"
#include "dfscan/json_io.hpp"
#include "dfscan/pipeline.hpp"
#include "dfscan/public_suffix.hpp"
#include "dfscan/report.hpp"
#include "dfscan/scan_engine.hpp"
#include "dfscan/sim/demo.hpp"
#include "dfscan/sim/scenario.hpp"
#include "dfscan/sim/test_ca.hpp"

namespace fs = std::filesystem;
using namespace dfscan;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

struct ScanOptions {
  std::size_t parallelism = 32;
  long connect_ms = 5000;
  long tls_ms = 5000;
  long total_ms = 30000;
  long retry_delay_ms = 1000;
  std::string user_agent{kChrome104UserAgent};
  std::size_t max_body = 8 * 1024 * 1024;
  std::uint16_t port = 443;
  bool serialize_per_ip = false;
  std::string target;
  std::string allowlist;
  bool own_infrastructure = false;

  void add_to(CLI::App* app) {
    app->add_option("--parallelism", parallelism, "Concurrent scans")->check(CLI::PositiveNumber);
    app->add_option("--timeout-connect", connect_ms, "TCP connect timeout (ms)")->check(CLI::PositiveNumber);
    app->add_option("--timeout-tls", tls_ms, "TLS handshake timeout (ms)")->check(CLI::PositiveNumber);
    app->add_option("--timeout-total", total_ms, "Whole-scan timeout (ms)")->check(CLI::PositiveNumber);
    app->add_option("--retry-delay", retry_delay_ms, "Pause before each sequential retry (ms)")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--user-agent", user_agent, "User-Agent for every scan");
    app->add_option("--max-body", max_body, "Largest body to read (bytes)")->check(CLI::PositiveNumber);
    app->add_option("--port", port, "TCP port scans connect to");
    app->add_flag("--serialize-per-ip", serialize_per_ip, "At most one scan in flight per address");
    app->add_option("--target", target, "Send every scan to this ip:port instead");
    app->add_option("--allowlist", allowlist, "CIDRs that non-loopback scans may reach");
    app->add_flag("--i-own-this-infrastructure", own_infrastructure,
                  "Lift the allowlist requirement for non-loopback targets");
  }

  ScanConfig build() const {
    ScanConfig cfg;
    cfg.parallelism = parallelism;
    cfg.connect_timeout = std::chrono::milliseconds(connect_ms);
    cfg.tls_timeout = std::chrono::milliseconds(tls_ms);
    cfg.total_timeout = std::chrono::milliseconds(total_ms);
    cfg.retry_delay = std::chrono::milliseconds(retry_delay_ms);
    cfg.user_agent = user_agent;
    cfg.max_body = max_body;
    cfg.port = port;
    cfg.serialize_per_ip = serialize_per_ip;
    if (!target.empty()) {
      cfg.target_override = Endpoint::parse(target);
      if (!cfg.target_override) throw ArgumentError("--target must be ip:port");
    }
    if (!allowlist.empty()) cfg.guard = TargetGuard::load_allowlist(allowlist);
    cfg.guard.set_owner_override(own_infrastructure);
    return cfg;
  }
};

struct SimOptions {
  std::string scenario;
  std::string state_dir;
  std::size_t domains = 8;

  void add_to(CLI::App* app, bool required) {
    auto* opt = app->add_option("--scenario", scenario,
                                "Scenario file or preset (strict, permissive, faking, domainless, "
                                "wildcard, mixed)");
    if (required) opt->required();
    app->add_option("--state-dir", state_dir, "Keep the test CA here between runs");
    app->add_option("--domains", domains, "Bound domains per generated preset")->check(CLI::Range(2, 1000));
  }

  sim::TestCa make_ca() const {
    return state_dir.empty() ? sim::TestCa::create() : sim::TestCa::load_or_create(state_dir);
  }
};

std::ostream& open_output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  file.open(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path);
  return file;
}

void write_output(const std::string& path, const std::string& content) {
  std::ofstream file;
  std::ostream& out = open_output(path, file);
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + (path.empty() ? std::string("stdout") : path));
}

template <typename T, typename Decode>
std::vector<T> read_jsonl(const std::string& path, Decode decode) {
  std::vector<T> out;
  for (const auto& j : jsonl::read_file(path)) out.push_back(decode(j));
  return out;
}

void print_stats(const char* what, const IngestStats& s) {
  std::cerr << what << ": " << s.lines << " lines, " << s.accepted << " accepted, " << s.malformed
            << " malformed, " << s.skipped_ipv6 << " ipv6 skipped\n";
}

GroupKind parse_kind(const std::string& text) {
  auto kind = parse_group_kind(text);
  if (!kind) throw ArgumentError("unknown grouping '" + text + "'");
  return *kind;
}

ReportFormat parse_format(const std::string& text) {
  auto f = parse_report_format(text);
  if (!f) throw ArgumentError("unknown report format '" + text + "'");
  return *f;
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw ArgumentError("--seed is required for scan planning");
  return *seed;
}

void print_simulation(const sim::Simulation& simulation) {
  for (std::size_t e = 0; e < simulation.edges().size(); ++e) {
    const auto& edge = *simulation.edges()[e];
    const auto& spec = simulation.scenario().edges[e];
    std::cerr << "edge " << edge.name() << " listening on " << edge.endpoint().to_string() << "\n";
    for (std::size_t i = 0; i < spec.bindings.size(); ++i) {
      std::cerr << "  " << spec.binding_ip(i).to_string() << "  " << spec.bindings[i].origin.domain << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Find shared infrastructure that permits domain fronting, faking or domainless fronting"};
  app.set_config("--config", "", "TOML-style key = value file; flags override it");
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Normalize CNAME or TLS observation logs to JSONL");
  std::string ingest_cname, ingest_tls, ingest_out, suffix_list;
  auto* cname_opt = ingest->add_option("--cname-log", ingest_cname, "CNAME JSONL (alias, cname, ip, ts)");
  auto* tls_opt = ingest->add_option("--tls-log", ingest_tls, "TLS JSONL (sni, dst_ip)");
  cname_opt->excludes(tls_opt);
  ingest->add_option("--out", ingest_out, "Output file (default stdout)");
  ingest->add_option("--suffix-list", suffix_list, "Public suffix list to use instead of the bundled one");

  // build-sets
  auto* build = app.add_subcommand("build-sets", "Group observations into candidate sets");
  std::string build_obs, build_tls, build_asn, build_out, build_group = "cname-domain";
  std::size_t max_set_size = kMaxCandidateSetSize;
  build->add_option("--observations", build_obs, "Normalized CNAME observations");
  build->add_option("--tls-observations", build_tls, "Normalized TLS observations");
  build->add_option("--group-by", build_group, "as | cname-domain | cname-fqdn");
  build->add_option("--asn-db", build_asn, "prefix,asn,name CSV for AS grouping");
  build->add_option("--max-set-size", max_set_size, "Keep at most this many tuples per set")
      ->check(CLI::PositiveNumber);
  build->add_option("--out", build_out, "Output file (default stdout)");

  // scan
  auto* scan = app.add_subcommand("scan", "Sample pairs from candidate sets and run the five scans");
  std::string scan_sets, scan_out_dir;
  std::optional<std::uint64_t> scan_seed;
  std::size_t scan_ppt = kDefaultPairsPerTuple;
  bool scan_prefilter = false;
  ScanOptions scan_opts;
  SimOptions scan_sim;
  scan->add_option("--sets", scan_sets, "Candidate sets JSONL")->required();
  scan->add_option("--seed", scan_seed, "Sampling seed");
  scan->add_option("--pairs-per-tuple", scan_ppt, "Fronts drawn per target")->check(CLI::PositiveNumber);
  scan->add_flag("--prefilter", scan_prefilter, "Drop tuples whose own baseline is not 200 first");
  scan->add_option("--out-dir", scan_out_dir, "Where pairs.jsonl and outcomes.jsonl go")->required();
  scan_opts.add_to(scan);
  scan_sim.add_to(scan, false);

  // classify
  auto* classify = app.add_subcommand("classify", "Turn scan outcomes into per-pair verdicts");
  std::string cls_pairs, cls_outcomes, cls_out;
  classify->add_option("--pairs", cls_pairs, "pairs.jsonl")->required();
  classify->add_option("--outcomes", cls_outcomes, "outcomes.jsonl")->required();
  classify->add_option("--out", cls_out, "Output file (default stdout)");

  // report
  auto* report = app.add_subcommand("report", "Aggregate verdicts per group, or estimate popular-domain exposure");
  std::string rep_verdicts, rep_format = "markdown", rep_out, rep_popularity, rep_obs;
  report->add_option("--verdicts", rep_verdicts, "verdicts.jsonl")->required();
  report->add_option("--format", rep_format, "markdown | csv | json");
  report->add_option("--out", rep_out, "Output file (default stdout)");
  report->add_option("--popularity", rep_popularity, "rank,domain CSV; switches to the exposure estimate");
  report->add_option("--observations", rep_obs, "CNAME observations mapping domains to canonical domains");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run scenario edges on loopback");
  SimOptions sim_opts;
  std::string sim_obs_out;
  double sim_duration = 0;
  sim_opts.add_to(simulate, true);
  simulate->add_option("--observations-out", sim_obs_out, "Write the scenario's DNS observations here");
  simulate->add_option("--duration", sim_duration, "Seconds to stay up (0: until interrupted)")
      ->check(CLI::NonNegativeNumber);

  // demo
  auto* demo = app.add_subcommand("demo", "Replay the Host-rewrite chain against a local edge");
  SimOptions demo_sim;
  std::string demo_out;
  sim::DemoSetup demo_setup;
  demo_sim.add_to(demo, true);
  demo->add_option("--out", demo_out, "Transcript file (default stdout)");
  demo->add_option("--victim-label", demo_setup.victim_label, "14-character victim label");
  demo->add_option("--attacker-label", demo_setup.attacker_label, "Attacker label of the same length");
  demo->add_option("--zone", demo_setup.zone, "Shared zone under the reserved .test suffix");

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "prefilter, sample, scan, retry, classify and report in one go");
  std::string pl_obs, pl_tls, pl_asn, pl_out_dir, pl_group = "cname-domain", pl_format = "markdown";
  std::optional<std::uint64_t> pl_seed;
  std::size_t pl_ppt = kDefaultPairsPerTuple;
  bool pl_no_prefilter = false;
  ScanOptions pl_scan;
  SimOptions pl_sim;
  pipeline->add_option("--observations", pl_obs, "Normalized CNAME observations");
  pipeline->add_option("--tls-observations", pl_tls, "Normalized TLS observations");
  pipeline->add_option("--asn-db", pl_asn, "prefix,asn,name CSV for AS grouping");
  pipeline->add_option("--group-by", pl_group, "as | cname-domain | cname-fqdn");
  pipeline->add_option("--seed", pl_seed, "Sampling seed");
  pipeline->add_option("--pairs-per-tuple", pl_ppt, "Fronts drawn per target")->check(CLI::PositiveNumber);
  pipeline->add_flag("--no-prefilter", pl_no_prefilter, "Skip the baseline prefilter");
  pipeline->add_option("--out-dir", pl_out_dir, "Artifact directory")->required();
  pipeline->add_option("--format", pl_format, "Report format echoed to stdout");
  pl_scan.add_to(pipeline);
  pl_sim.add_to(pipeline, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*ingest) {
      if (ingest_cname.empty() == ingest_tls.empty()) throw ArgumentError("give exactly one of --cname-log / --tls-log");
      if (!ingest_cname.empty()) {
        const auto psl = suffix_list.empty() ? PublicSuffixList::bundled() : PublicSuffixList::load(suffix_list);
        auto result = parse_cname_file(ingest_cname, psl);
        print_stats("ingest", result.stats);
        write_output(ingest_out, jsonl::to_lines(result.records));
      } else {
        auto result = parse_tls_file(ingest_tls);
        print_stats("ingest", result.stats);
        write_output(ingest_out, jsonl::to_lines(result.records));
      }
      return 0;
    }

    if (*build) {
      const GroupKind kind = parse_kind(build_group);
      std::vector<CandidateSet> sets;
      if (kind == GroupKind::autonomous_system) {
        if (build_tls.empty() || build_asn.empty()) {
          throw ArgumentError("AS grouping needs --tls-observations and --asn-db");
        }
        const auto tls = read_jsonl<TlsObservation>(build_tls, jsonl::decode_tls);
        sets = build_groups(tls, AsnTable::load_csv(build_asn), max_set_size);
      } else {
        if (build_obs.empty()) throw ArgumentError("CNAME grouping needs --observations");
        const auto obs = read_jsonl<DnsCnameObservation>(build_obs, jsonl::decode_cname);
        sets = build_groups(obs, kind, max_set_size);
      }
      write_output(build_out, jsonl::to_lines(sets));
      return 0;
    }

    if (*scan) {
      const std::uint64_t seed = require_seed(scan_seed);
      auto sets = read_jsonl<CandidateSet>(scan_sets, jsonl::decode_candidate_set);
      ScanConfig cfg = scan_opts.build();
      std::unique_ptr<sim::Simulation> simulation;
      std::optional<sim::TestCa> ca;
      if (!scan_sim.scenario.empty()) {
        ca = scan_sim.make_ca();
        simulation = sim::Simulation::start(sim::resolve_scenario(scan_sim.scenario, scan_sim.domains), *ca);
        cfg.redirects = simulation->redirects();
      }
      std::vector<DestinationTuple> tuples;
      for (const auto& s : sets) {
        for (const auto& wt : s.tuples) tuples.push_back(wt.tuple);
      }
      check_targets(tuples, cfg);
      if (scan_prefilter) sets = prefilter_sets(std::move(sets), cfg);
      const auto pairs = plan_pairs(sets, scan_ppt, seed);
      const auto records = scan_pairs(pairs, cfg);
      std::string pair_lines;
      for (std::size_t i = 0; i < pairs.size(); ++i) pair_lines += jsonl::encode(pairs[i], i).dump() + "\n";
      jsonl::write_file(fs::path(scan_out_dir) / "pairs.jsonl", pair_lines);
      jsonl::write_file(fs::path(scan_out_dir) / "outcomes.jsonl", jsonl::to_lines(records));
      std::cerr << "scan: " << pairs.size() << " pairs, " << records.size() << " scans\n";
      return 0;
    }

    if (*classify) {
      std::vector<ScanPair> pairs;
      for (const auto& j : jsonl::read_file(cls_pairs)) {
        auto [id, pair] = jsonl::decode_pair(j);
        if (id != pairs.size()) throw FormatError("pairs.jsonl must list pair_id 0, 1, 2, ... in order");
        pairs.push_back(std::move(pair));
      }
      const auto records = read_jsonl<ScanRecord>(cls_outcomes, jsonl::decode_record);
      write_output(cls_out, jsonl::to_lines(classify_records(pairs, records)));
      return 0;
    }

    if (*report) {
      const ReportFormat fmt = parse_format(rep_format);
      const auto verdicts = read_jsonl<PairVerdict>(rep_verdicts, jsonl::decode_verdict);
      const ReportTable table = aggregate_all(verdicts);
      if (rep_popularity.empty()) {
        write_output(rep_out, render(table, fmt));
        return 0;
      }
      if (rep_obs.empty()) throw ArgumentError("--popularity needs --observations for the CNAME map");
      const auto popularity = load_popularity_csv(rep_popularity);
      std::map<std::string, std::string> cname_map;
      for (const auto& obs : read_jsonl<DnsCnameObservation>(rep_obs, jsonl::decode_cname)) {
        cname_map.try_emplace(obs.alias_fqdn, obs.canonical_domain);
      }
      std::map<std::string, double> support;
      for (const auto& row : table.rows) {
        if (row.key.kind == GroupKind::cname_domain) support[row.key.value] = row.fronting_pct;
      }
      write_output(rep_out, render(popularity_estimate(popularity, cname_map, support), fmt));
      return 0;
    }

    if (*simulate) {
      const auto scenario = sim::resolve_scenario(sim_opts.scenario, sim_opts.domains);
      const auto ca = sim_opts.make_ca();
      auto simulation = sim::Simulation::start(scenario, ca);
      print_simulation(*simulation);
      if (!sim_obs_out.empty()) write_output(sim_obs_out, jsonl::to_lines(simulation->observations()));
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(sim_duration);
      while (!g_interrupted && (sim_duration == 0 || std::chrono::steady_clock::now() < until)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      simulation->stop();
      return 0;
    }

    if (*demo) {
      const auto scenario = sim::resolve_scenario(demo_sim.scenario, demo_sim.domains);
      demo_setup.policy = scenario.edges.front().policy;
      const auto ca = demo_sim.make_ca();
      const auto transcript = sim::run_demo(demo_setup, ca);
      write_output(demo_out, sim::to_json(transcript).dump(2) + "\n");
      return 0;
    }

    if (*pipeline) {
      PipelineConfig cfg;
      cfg.out_dir = pl_out_dir;
      cfg.group_by = parse_kind(pl_group);
      cfg.pairs_per_tuple = pl_ppt;
      cfg.seed = pl_seed;
      cfg.prefilter = !pl_no_prefilter;
      cfg.scan = pl_scan.build();
      require_seed(cfg.seed);
      const ReportFormat fmt = parse_format(pl_format);

      PipelineResult result;
      if (!pl_sim.scenario.empty()) {
        if (cfg.group_by == GroupKind::autonomous_system) {
          throw ArgumentError("simulator scenarios provide DNS observations; use a CNAME grouping");
        }
        const auto scenario = sim::resolve_scenario(pl_sim.scenario, pl_sim.domains);
        const auto ca = pl_sim.make_ca();
        auto simulation = sim::Simulation::start(scenario, ca);
        cfg.scan.redirects = simulation->redirects();
        const auto obs = simulation->observations();
        jsonl::write_file(fs::path(pl_out_dir) / "observations.jsonl", jsonl::to_lines(obs));
        result = run_pipeline(std::span<const DnsCnameObservation>(obs), cfg);
      } else if (cfg.group_by == GroupKind::autonomous_system) {
        if (pl_tls.empty() || pl_asn.empty()) throw ArgumentError("AS grouping needs --tls-observations and --asn-db");
        const auto tls = read_jsonl<TlsObservation>(pl_tls, jsonl::decode_tls);
        result = run_pipeline(std::span<const TlsObservation>(tls), AsnTable::load_csv(pl_asn), cfg);
      } else {
        if (pl_obs.empty()) throw ArgumentError("give --observations or --scenario");
        const auto obs = read_jsonl<DnsCnameObservation>(pl_obs, jsonl::decode_cname);
        result = run_pipeline(std::span<const DnsCnameObservation>(obs), cfg);
      }
      std::cout << render(result.table, fmt);
      std::cerr << "pipeline: " << result.pairs.size() << " pairs, " << result.prefilter_dropped
                << " tuples dropped by prefilter\n";
      return 0;
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const TargetRefused& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

#include "dfscan/pipeline.hpp"

#include <algorithm>
#include <set>

#include "dfscan/errors.hpp"
#include "dfscan/json_io.hpp"

namespace dfscan {

void validate(const PipelineConfig& cfg) {
  if (cfg.pairs_per_tuple < 1) throw ArgumentError("pairs_per_tuple must be at least 1");
  if (cfg.scan.parallelism < 1) throw ArgumentError("parallelism must be at least 1");
  if (!cfg.seed) throw ArgumentError("a seed is required for scan planning");
}

void check_targets(std::span<const DestinationTuple> tuples, const ScanConfig& cfg) {
  std::set<Ipv4Address> refused;
  for (const auto& t : tuples) {
    const Endpoint ep = cfg.connect_endpoint(t.ip);
    if (!cfg.guard.permits(ep.ip)) refused.insert(ep.ip);
  }
  if (refused.empty()) return;
  std::string list;
  std::size_t shown = 0;
  for (const auto& ip : refused) {
    if (shown++ == 5) {
      list += ", ...";
      break;
    }
    if (!list.empty()) list += ", ";
    list += ip.to_string();
  }
  throw TargetRefused(std::to_string(refused.size()) +
                      " target address(es) outside the allowlist: " + list +
                      " (pass --allowlist, or --i-own-this-infrastructure)");
}

std::vector<CandidateSet> prefilter_sets(std::vector<CandidateSet> sets, const ScanConfig& cfg,
                                         std::size_t* dropped) {
  std::set<DestinationTuple> unique;
  for (const auto& s : sets) {
    for (const auto& wt : s.tuples) unique.insert(wt.tuple);
  }
  const std::vector<DestinationTuple> all(unique.begin(), unique.end());
  const auto kept_list = prefilter(all, cfg);
  const std::set<DestinationTuple> kept(kept_list.begin(), kept_list.end());
  if (dropped) *dropped = all.size() - kept.size();

  std::vector<CandidateSet> out;
  for (auto& s : sets) {
    std::erase_if(s.tuples, [&](const WeightedTuple& wt) { return !kept.contains(wt.tuple); });
    if (s.tuples.size() >= 2) out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScanPair> plan_pairs(std::span<const CandidateSet> sets, std::size_t pairs_per_tuple,
                                 std::uint64_t seed) {
  std::vector<ScanPair> pairs;
  for (const auto& s : sets) {
    auto sampled = sample_pairs(s, pairs_per_tuple, seed);
    pairs.insert(pairs.end(), std::make_move_iterator(sampled.begin()),
                 std::make_move_iterator(sampled.end()));
  }
  return pairs;
}

std::vector<ScanRecord> scan_pairs(std::span<const ScanPair> pairs, const ScanConfig& cfg) {
  std::vector<ScanSpec> specs;
  specs.reserve(pairs.size() * kAllRoles.size());
  for (const auto& p : pairs) {
    for (const auto& spec : plan_scans(p)) specs.push_back(spec);
  }
  auto outcomes = run_scans(specs, cfg);
  std::vector<ScanRecord> records;
  records.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    records.push_back({i / kAllRoles.size(), std::move(outcomes[i])});
  }
  return retry_failed_sequential(std::move(records), cfg);
}

std::vector<PairVerdict> classify_records(std::span<const ScanPair> pairs,
                                          std::span<const ScanRecord> records) {
  std::vector<std::vector<ScanOutcome>> by_pair(pairs.size());
  for (const auto& r : records) {
    if (r.pair_id >= pairs.size()) throw ArgumentError("record for unknown pair " + std::to_string(r.pair_id));
    by_pair[r.pair_id].push_back(r.outcome);
  }
  std::vector<PairVerdict> verdicts;
  verdicts.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) verdicts.push_back(evaluate_pair(pairs[i], by_pair[i]));
  return verdicts;
}

PipelineResult run_pipeline(std::vector<CandidateSet> sets, const PipelineConfig& cfg) {
  validate(cfg);
  std::vector<DestinationTuple> tuples;
  for (const auto& s : sets) {
    for (const auto& wt : s.tuples) tuples.push_back(wt.tuple);
  }
  check_targets(tuples, cfg.scan);

  PipelineResult result;
  result.sets = cfg.prefilter ? prefilter_sets(std::move(sets), cfg.scan, &result.prefilter_dropped)
                              : std::move(sets);
  result.pairs = plan_pairs(result.sets, cfg.pairs_per_tuple, *cfg.seed);
  result.records = scan_pairs(result.pairs, cfg.scan);
  result.verdicts = classify_records(result.pairs, result.records);
  result.table = aggregate_all(result.verdicts);
  if (cfg.out_dir) write_artifacts(result, *cfg.out_dir);
  return result;
}

PipelineResult run_pipeline(std::span<const DnsCnameObservation> observations, const PipelineConfig& cfg) {
  if (cfg.group_by == GroupKind::autonomous_system) {
    throw ArgumentError("AS grouping needs TLS observations and an ASN table");
  }
  validate(cfg);
  return run_pipeline(build_groups(observations, cfg.group_by, cfg.max_set_size), cfg);
}

PipelineResult run_pipeline(std::span<const TlsObservation> observations, const AsnTable& asns,
                            const PipelineConfig& cfg) {
  validate(cfg);
  return run_pipeline(build_groups(observations, asns, cfg.max_set_size), cfg);
}

void write_artifacts(const PipelineResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  jsonl::write_file(dir / "candidate_sets.jsonl", jsonl::to_lines(result.sets));
  std::string pairs;
  for (std::size_t i = 0; i < result.pairs.size(); ++i) {
    pairs += jsonl::encode(result.pairs[i], i).dump();
    pairs += '\n';
  }
  jsonl::write_file(dir / "pairs.jsonl", pairs);
  jsonl::write_file(dir / "outcomes.jsonl", jsonl::to_lines(result.records));
  jsonl::write_file(dir / "verdicts.jsonl", jsonl::to_lines(result.verdicts));
  jsonl::write_file(dir / "report.md", render(result.table, ReportFormat::markdown));
  jsonl::write_file(dir / "report.csv", render(result.table, ReportFormat::csv));
  jsonl::write_file(dir / "report.json", render(result.table, ReportFormat::json));
}

}  // namespace dfscan

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dfscan/asn_table.hpp"
#include "dfscan/candidate_sets.hpp"
#include "dfscan/classifier.hpp"
#include "dfscan/dns_ingest.hpp"
#include "dfscan/report.hpp"
#include "dfscan/scan_engine.hpp"

namespace dfscan {

struct PipelineConfig {
  std::optional<std::filesystem::path> out_dir;  // artifacts are written when set
  GroupKind group_by = GroupKind::cname_domain;
  std::size_t pairs_per_tuple = kDefaultPairsPerTuple;
  std::optional<std::uint64_t> seed;
  bool prefilter = true;
  std::size_t max_set_size = kMaxCandidateSetSize;
  ScanConfig scan;
};

/// ArgumentError unless pairs_per_tuple >= 1, parallelism >= 1 and a seed
/// is present.
void validate(const PipelineConfig& cfg);

struct PipelineResult {
  std::vector<CandidateSet> sets;  // after prefiltering
  std::size_t prefilter_dropped = 0;
  std::vector<ScanPair> pairs;     // pair_id is the index
  std::vector<ScanRecord> records;
  std::vector<PairVerdict> verdicts;  // verdicts[i] answers pairs[i]
  ReportTable table;
};

/// TargetRefused naming the first offending addresses when any tuple would
/// connect somewhere the guard does not permit.
void check_targets(std::span<const DestinationTuple> tuples, const ScanConfig& cfg);

/// Drop tuples that fail the baseline prefilter; sets left with fewer than
/// two tuples are dropped too.
std::vector<CandidateSet> prefilter_sets(std::vector<CandidateSet> sets, const ScanConfig& cfg,
                                         std::size_t* dropped = nullptr);

/// Sample pairs set by set, in set order.
std::vector<ScanPair> plan_pairs(std::span<const CandidateSet> sets, std::size_t pairs_per_tuple,
                                 std::uint64_t seed);

/// Run the five scans of every pair in parallel, then retry failures one
/// at a time. Records come back ordered by pair_id, then role.
std::vector<ScanRecord> scan_pairs(std::span<const ScanPair> pairs, const ScanConfig& cfg);

/// One verdict per pair. ArgumentError when a pair's records are
/// incomplete or refer to an unknown pair.
std::vector<PairVerdict> classify_records(std::span<const ScanPair> pairs,
                                          std::span<const ScanRecord> records);

/// Everything after grouping: guard check, prefilter, sampling, scanning,
/// retry, classification and aggregation.
PipelineResult run_pipeline(std::vector<CandidateSet> sets, const PipelineConfig& cfg);

PipelineResult run_pipeline(std::span<const DnsCnameObservation> observations, const PipelineConfig& cfg);
PipelineResult run_pipeline(std::span<const TlsObservation> observations, const AsnTable& asns,
                            const PipelineConfig& cfg);

/// candidate_sets.jsonl, pairs.jsonl, outcomes.jsonl, verdicts.jsonl and
/// report.{md,csv,json} under `dir`.
void write_artifacts(const PipelineResult& result, const std::filesystem::path& dir);

}  // namespace dfscan

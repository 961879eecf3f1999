#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfscan/candidate_sets.hpp"
#include "dfscan/classifier.hpp"
#include "dfscan/dns_ingest.hpp"
#include "dfscan/scan_engine.hpp"

// JSONL encodings for every pipeline artifact. Field order is fixed so that
// identical inputs serialize to identical bytes.
namespace dfscan::jsonl {

using Json = nlohmann::ordered_json;

Json encode(const DnsCnameObservation& obs);
Json encode(const TlsObservation& obs);
Json encode(const DestinationTuple& tuple);
Json encode(const GroupKey& key);
Json encode(const CandidateSet& set);
Json encode(const ScanPair& pair, std::size_t pair_id);
Json encode(const CertSummary& cert);
Json encode(const ScanOutcome& outcome);
Json encode(const ScanRecord& record);
Json encode(const PairVerdict& verdict);

// Decoders throw FormatError on missing or mistyped fields.
DnsCnameObservation decode_cname(const Json& j);
TlsObservation decode_tls(const Json& j);
DestinationTuple decode_tuple(const Json& j);
GroupKey decode_group_key(const Json& j);
CandidateSet decode_candidate_set(const Json& j);
std::pair<std::size_t, ScanPair> decode_pair(const Json& j);
CertSummary decode_cert(const Json& j);
ScanOutcome decode_outcome(const Json& j);
ScanRecord decode_record(const Json& j);
PairVerdict decode_verdict(const Json& j);

void write_file(const std::filesystem::path& path, const std::string& content);
std::vector<Json> read_lines(std::istream& in);
std::vector<Json> read_file(const std::filesystem::path& path);

/// One compact JSON document per line.
template <typename Range>
std::string to_lines(const Range& items) {
  std::string out;
  for (const auto& item : items) {
    out += encode(item).dump();
    out += '\n';
  }
  return out;
}

}  // namespace dfscan::jsonl

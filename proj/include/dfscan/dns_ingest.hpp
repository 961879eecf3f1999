#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dfscan/ipv4.hpp"
#include "dfscan/public_suffix.hpp"

namespace dfscan {

/// One DNS CNAME answer: alias -> canonical name, plus the address the
/// canonical name resolved to.
struct DnsCnameObservation {
  std::string alias_fqdn;
  std::string canonical_fqdn;
  std::string canonical_domain;  // registrable domain of canonical_fqdn
  Ipv4Address resolved_ip;
  std::optional<std::int64_t> observed_at;  // UTC seconds

  friend bool operator==(const DnsCnameObservation&, const DnsCnameObservation&) = default;
};

/// A passively observed TLS ClientHello destination.
struct TlsObservation {
  std::optional<std::string> server_name;
  Ipv4Address dst_ip;

  friend bool operator==(const TlsObservation&, const TlsObservation&) = default;
};

struct IngestStats {
  std::size_t lines = 0;      // non-blank lines seen
  std::size_t accepted = 0;
  std::size_t malformed = 0;
  std::size_t skipped_ipv6 = 0;

  friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

template <typename Record>
struct IngestResult {
  std::vector<Record> records;
  IngestStats stats;
};

/// Parse CNAME JSONL (`alias`, `cname`, `ip`, optional `ts`).
///
/// Malformed lines are counted and skipped. If more than half of the
/// non-blank lines are malformed the whole input is rejected with a
/// FormatError, which usually means the wrong file was passed.
IngestResult<DnsCnameObservation> parse_cname_records(
    std::istream& in, const PublicSuffixList& suffixes = PublicSuffixList::bundled());
IngestResult<DnsCnameObservation> parse_cname_file(
    const std::filesystem::path& path,
    const PublicSuffixList& suffixes = PublicSuffixList::bundled());

/// Parse TLS JSONL (`sni` string or null, `dst_ip`). Same error policy.
IngestResult<TlsObservation> parse_tls_records(std::istream& in);
IngestResult<TlsObservation> parse_tls_file(const std::filesystem::path& path);

/// Build a validated observation from raw fields; nullopt when any invariant
/// fails (bad IP, empty names, alias equal to canonical).
std::optional<DnsCnameObservation> make_cname_observation(
    std::string_view alias, std::string_view cname, std::string_view ip,
    std::optional<std::int64_t> ts,
    const PublicSuffixList& suffixes = PublicSuffixList::bundled());

}  // namespace dfscan

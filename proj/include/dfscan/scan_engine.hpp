#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dfscan/candidate_sets.hpp"
#include "dfscan/ipv4.hpp"

namespace dfscan {

/// The five scans run per (target, front) pair, in execution order.
enum class ScanRole { baseline_0, baseline_1, fronting, faking, domainless };

inline constexpr std::array<ScanRole, 5> kAllRoles = {
    ScanRole::baseline_0, ScanRole::baseline_1, ScanRole::fronting, ScanRole::faking,
    ScanRole::domainless};

std::string_view to_string(ScanRole role);
std::optional<ScanRole> parse_scan_role(std::string_view text);

struct ScanSpec {
  ScanRole role = ScanRole::baseline_0;
  Ipv4Address dst_ip;
  std::optional<std::string> sni;  // nullopt: SNI extension omitted
  std::string host;
  std::string path = "/";

  friend bool operator==(const ScanSpec&, const ScanSpec&) = default;
};

struct CertSummary {
  std::optional<std::string> subject_common_name;
  std::vector<std::string> san_dns_names;

  friend bool operator==(const CertSummary&, const CertSummary&) = default;
};

/// What one attempt of a retried scan returned.
struct AttemptRecord {
  std::optional<int> status_code;
  std::optional<std::string> transport_error;

  friend bool operator==(const AttemptRecord&, const AttemptRecord&) = default;
};

struct ScanOutcome {
  ScanSpec spec;
  std::optional<int> status_code;      // nullopt iff transport_error is set
  std::vector<std::string> header_names;  // wire order, case preserved
  std::size_t content_length = 0;
  std::optional<CertSummary> leaf_cert;
  std::optional<std::string> transport_error;
  // Every attempt made for this scan, oldest first; empty unless retried.
  std::vector<AttemptRecord> attempts;

  friend bool operator==(const ScanOutcome&, const ScanOutcome&) = default;
};

/// One scan result tied back to the pair it belongs to.
struct ScanRecord {
  std::size_t pair_id = 0;
  ScanOutcome outcome;

  friend bool operator==(const ScanRecord&, const ScanRecord&) = default;
};

/// Decides which addresses a scan may connect to. Loopback is always
/// permitted; anything else must fall inside an allowlisted prefix unless
/// the operator declared ownership of the infrastructure.
class TargetGuard {
 public:
  void allow(const Ipv4Prefix& prefix) { allowed_.push_back(prefix); }
  void set_owner_override(bool enabled) { owner_override_ = enabled; }
  bool permits(Ipv4Address ip) const;

  /// One CIDR or address per line; '#' comments.
  static TargetGuard load_allowlist(const std::filesystem::path& path);

 private:
  std::vector<Ipv4Prefix> allowed_;
  bool owner_override_ = false;
};

inline constexpr std::string_view kChrome104UserAgent =
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) "
    "Chrome/104.0.0.0 Safari/537.36";

struct ScanConfig {
  std::chrono::milliseconds connect_timeout{5000};
  std::chrono::milliseconds tls_timeout{5000};
  std::chrono::milliseconds total_timeout{30000};
  std::chrono::milliseconds retry_delay{1000};
  std::string user_agent{kChrome104UserAgent};
  std::size_t max_body = 8 * 1024 * 1024;
  std::size_t parallelism = 32;
  bool serialize_per_ip = false;
  std::uint16_t port = 443;

  // A scan for dst_ip connects to redirects[dst_ip] if present, else to
  // target_override if set, else to dst_ip:port.
  std::map<Ipv4Address, Endpoint> redirects;
  std::optional<Endpoint> target_override;

  TargetGuard guard;

  Endpoint connect_endpoint(Ipv4Address dst_ip) const;
};

/// The Table-I matrix for one pair: baseline-0, baseline-1, fronting,
/// faking, domainless.
std::array<ScanSpec, 5> plan_scans(const ScanPair& pair);

/// Connect to `spec.dst_ip`, handshake with `spec.sni` (or none),
/// send one `GET` and record status, header order, body length and leaf
/// certificate. Never resolves names; failures come back as transport_error.
ScanOutcome execute_scan(const ScanSpec& spec, const ScanConfig& cfg);

/// Lower-level exchange used by execute_scan and the attack demo: send the
/// given raw request bytes over TLS and read one response.
struct RawExchange {
  std::optional<CertSummary> leaf_cert;
  std::optional<int> status_code;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::size_t body_length = 0;
  std::optional<std::string> transport_error;
};
RawExchange https_exchange(const Endpoint& endpoint, const std::optional<std::string>& sni,
                           std::string_view request, const ScanConfig& cfg);

/// The request execute_scan sends for a spec.
std::string build_scan_request(const ScanSpec& spec, const ScanConfig& cfg);

/// Execute specs with bounded parallelism; result[i] answers specs[i].
std::vector<ScanOutcome> run_scans(std::span<const ScanSpec> specs, const ScanConfig& cfg);

/// Keep tuples whose (ip, sni=domain, host=domain) scan returns 200.
std::vector<DestinationTuple> prefilter(std::span<const DestinationTuple> tuples,
                                        const ScanConfig& cfg);

/// Re-run failed scans one at a time, sleeping cfg.retry_delay before each.
/// A scan is retried when it has a transport error, or when it is a baseline
/// that did not return 200. A successful retry replaces the outcome; a
/// failed one keeps the original. Both attempts land in `attempts`.
std::vector<ScanRecord> retry_failed_sequential(std::vector<ScanRecord> records,
                                                const ScanConfig& cfg);
std::vector<ScanOutcome> retry_failed_sequential(std::vector<ScanOutcome> outcomes,
                                                 const ScanConfig& cfg);

bool needs_retry(const ScanOutcome& outcome);

}  // namespace dfscan

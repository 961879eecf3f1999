#include "dfscan/scan_engine.hpp"

#include <openssl/err.h>
#include <openssl/ssl.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <fstream>
#include <mutex>
#include <thread>

#include "dfscan/errors.hpp"
#include "dfscan/http_wire.hpp"
#include "dfscan/tls_util.hpp"

namespace dfscan {
namespace {

using Clock = std::chrono::steady_clock;

SSL_CTX* client_context() {
  static ossl::SslCtxPtr ctx = [] {
    ossl::SslCtxPtr c(SSL_CTX_new(TLS_client_method()));
    if (!c) throw StartupError("SSL_CTX_new: " + ossl::last_error());
    // Scans pair mismatched SNI and Host on purpose; the leaf certificate is
    // recorded, not validated.
    SSL_CTX_set_verify(c.get(), SSL_VERIFY_NONE, nullptr);
    SSL_CTX_set_min_proto_version(c.get(), TLS1_2_VERSION);
    SSL_CTX_set_options(c.get(), SSL_OP_IGNORE_UNEXPECTED_EOF);
    static constexpr unsigned char kAlpn[] = {8, 'h', 't', 't', 'p', '/', '1', '.', '1'};
    SSL_CTX_set_alpn_protos(c.get(), kAlpn, sizeof(kAlpn));
    return c;
  }();
  return ctx.get();
}

std::chrono::milliseconds remaining(Clock::time_point deadline) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
}

CertSummary summarize(X509* cert) {
  auto names = cert_names(cert);
  return CertSummary{std::move(names.common_name), std::move(names.dns_names)};
}

}  // namespace

std::string_view to_string(ScanRole role) {
  switch (role) {
    case ScanRole::baseline_0: return "BASELINE_0";
    case ScanRole::baseline_1: return "BASELINE_1";
    case ScanRole::fronting: return "FRONTING";
    case ScanRole::faking: return "FAKING";
    case ScanRole::domainless: return "DOMAINLESS";
  }
  return "?";
}

std::optional<ScanRole> parse_scan_role(std::string_view text) {
  for (ScanRole role : kAllRoles) {
    if (to_string(role) == text) return role;
  }
  return std::nullopt;
}

bool TargetGuard::permits(Ipv4Address ip) const {
  if (ip.is_loopback() || owner_override_) return true;
  return std::any_of(allowed_.begin(), allowed_.end(),
                     [&](const Ipv4Prefix& p) { return p.contains(ip); });
}

TargetGuard TargetGuard::load_allowlist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open allowlist: " + path.string());
  TargetGuard guard;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = line.substr(0, line.find('#'));
    line.erase(0, line.find_first_not_of(" \t\r"));
    line.erase(line.find_last_not_of(" \t\r") + 1);
    if (line.empty()) continue;
    // A bare address allows that single host.
    auto prefix = line.find('/') == std::string::npos ? Ipv4Prefix::parse(line + "/32") : Ipv4Prefix::parse(line);
    if (!prefix) {
      throw FormatError("allowlist line " + std::to_string(line_no) + ": not an IPv4 prefix");
    }
    guard.allow(*prefix);
  }
  return guard;
}

Endpoint ScanConfig::connect_endpoint(Ipv4Address dst_ip) const {
  if (auto it = redirects.find(dst_ip); it != redirects.end()) return it->second;
  if (target_override) return *target_override;
  return Endpoint{dst_ip, port};
}

std::array<ScanSpec, 5> plan_scans(const ScanPair& pair) {
  const auto& t = pair.target;
  const auto& f = pair.front;
  return {{
      {ScanRole::baseline_0, t.ip, t.domain, t.domain},
      {ScanRole::baseline_1, f.ip, f.domain, f.domain},
      {ScanRole::fronting, f.ip, f.domain, t.domain},
      {ScanRole::faking, t.ip, f.domain, t.domain},
      {ScanRole::domainless, t.ip, std::nullopt, t.domain},
  }};
}

std::string build_scan_request(const ScanSpec& spec, const ScanConfig& cfg) {
  return http::format_request("GET", spec.path,
                              {{"Host", spec.host},
                               {"User-Agent", cfg.user_agent},
                               {"Accept-Encoding", "identity"},
                               {"Connection", "close"}});
}

RawExchange https_exchange(const Endpoint& endpoint, const std::optional<std::string>& sni,
                           std::string_view request, const ScanConfig& cfg) {
  RawExchange ex;
  if (!cfg.guard.permits(endpoint.ip)) {
    ex.transport_error = "refused: " + endpoint.ip.to_string() + " is outside the allowlist";
    return ex;
  }
  const auto deadline = Clock::now() + cfg.total_timeout;
  auto conn = tcp_connect(endpoint, std::min(cfg.connect_timeout, cfg.total_timeout));
  if (!conn.socket) {
    ex.transport_error = std::move(conn.error);
    return ex;
  }
  const int fd = conn.socket.get();
  set_io_timeout(fd, std::min(cfg.tls_timeout, remaining(deadline)));

  ERR_clear_error();
  ossl::SslPtr ssl(SSL_new(client_context()));
  SSL_set_fd(ssl.get(), fd);
  if (sni) SSL_set_tlsext_host_name(ssl.get(), sni->c_str());
  errno = 0;
  if (SSL_connect(ssl.get()) != 1) {
    const bool timed_out = errno == EAGAIN || errno == EWOULDBLOCK;
    ex.transport_error = timed_out ? "tls handshake: timed out" : "tls handshake: " + ossl::last_error();
    return ex;
  }
  if (X509* peer = SSL_get0_peer_certificate(ssl.get())) ex.leaf_cert = summarize(peer);

  set_io_timeout(fd, remaining(deadline));
  if (!ssl_write_all(ssl.get(), request)) {
    ex.transport_error = "write: " + ossl::last_error();
    return ex;
  }

  http::ResponseReader reader(cfg.max_body);
  char buf[16384];
  try {
    for (;;) {
      if (remaining(deadline).count() <= 0) {
        ex.transport_error = "total timeout exceeded";
        return ex;
      }
      std::size_t n = 0;
      errno = 0;
      if (SSL_read_ex(ssl.get(), buf, sizeof(buf), &n) == 1) {
        if (reader.feed(std::string_view(buf, n))) break;
        continue;
      }
      const int err = SSL_get_error(ssl.get(), 0);
      if (err == SSL_ERROR_ZERO_RETURN || (err == SSL_ERROR_SYSCALL && errno == 0)) {
        if (!reader.finish()) {
          ex.transport_error = reader.has_head() ? "connection closed mid-body"
                                                 : "connection closed before response";
          return ex;
        }
        break;
      }
      if (err == SSL_ERROR_SYSCALL && (errno == EAGAIN || errno == EWOULDBLOCK)) {
        ex.transport_error = "read timed out";
      } else {
        ex.transport_error = "read: " + ossl::last_error();
      }
      return ex;
    }
  } catch (const FormatError& e) {
    ex.transport_error = std::string("malformed HTTP response: ") + e.what();
    return ex;
  }

  if (reader.oversized()) {
    ex.transport_error = "body truncated: exceeds max_body of " + std::to_string(cfg.max_body) + " bytes";
    return ex;
  }
  ex.status_code = reader.head().status;
  for (const auto& h : reader.head().headers) ex.headers.emplace_back(h.name, h.value);
  ex.body = reader.body();
  ex.body_length = reader.body_length();
  SSL_shutdown(ssl.get());
  return ex;
}

ScanOutcome execute_scan(const ScanSpec& spec, const ScanConfig& cfg) {
  ScanOutcome outcome;
  outcome.spec = spec;
  auto ex = https_exchange(cfg.connect_endpoint(spec.dst_ip), spec.sni,
                           build_scan_request(spec, cfg), cfg);
  outcome.leaf_cert = std::move(ex.leaf_cert);
  if (ex.transport_error) {
    outcome.transport_error = std::move(ex.transport_error);
    return outcome;
  }
  outcome.status_code = ex.status_code;
  outcome.header_names.reserve(ex.headers.size());
  for (auto& [name, value] : ex.headers) outcome.header_names.push_back(std::move(name));
  outcome.content_length = ex.body_length;
  return outcome;
}

std::vector<ScanOutcome> run_scans(std::span<const ScanSpec> specs, const ScanConfig& cfg) {
  std::vector<ScanOutcome> results(specs.size());
  if (specs.empty()) return results;

  std::map<Ipv4Address, std::mutex> ip_locks;
  if (cfg.serialize_per_ip) {
    for (const auto& s : specs) ip_locks.try_emplace(cfg.connect_endpoint(s.dst_ip).ip);
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      if (cfg.serialize_per_ip) {
        std::lock_guard lock(ip_locks.at(cfg.connect_endpoint(specs[i].dst_ip).ip));
        results[i] = execute_scan(specs[i], cfg);
      } else {
        results[i] = execute_scan(specs[i], cfg);
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(cfg.parallelism, 1, specs.size());
  {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return results;
}

std::vector<DestinationTuple> prefilter(std::span<const DestinationTuple> tuples,
                                        const ScanConfig& cfg) {
  std::vector<ScanSpec> specs;
  specs.reserve(tuples.size());
  for (const auto& t : tuples) specs.push_back({ScanRole::baseline_0, t.ip, t.domain, t.domain});
  const auto outcomes = run_scans(specs, cfg);
  std::vector<DestinationTuple> kept;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    if (outcomes[i].status_code == 200) kept.push_back(tuples[i]);
  }
  return kept;
}

bool needs_retry(const ScanOutcome& outcome) {
  if (outcome.transport_error) return true;
  const bool baseline =
      outcome.spec.role == ScanRole::baseline_0 || outcome.spec.role == ScanRole::baseline_1;
  return baseline && outcome.status_code != 200;
}

std::vector<ScanRecord> retry_failed_sequential(std::vector<ScanRecord> records,
                                                const ScanConfig& cfg) {
  for (auto& record : records) {
    auto& original = record.outcome;
    if (!needs_retry(original)) continue;
    std::this_thread::sleep_for(cfg.retry_delay);
    ScanOutcome retry = execute_scan(original.spec, cfg);

    std::vector<AttemptRecord> history = original.attempts;
    if (history.empty()) history.push_back({original.status_code, original.transport_error});
    history.push_back({retry.status_code, retry.transport_error});

    if (!needs_retry(retry)) original = std::move(retry);
    original.attempts = std::move(history);
  }
  return records;
}

std::vector<ScanOutcome> retry_failed_sequential(std::vector<ScanOutcome> outcomes,
                                                 const ScanConfig& cfg) {
  std::vector<ScanRecord> records;
  records.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) records.push_back({i, std::move(outcomes[i])});
  records = retry_failed_sequential(std::move(records), cfg);
  outcomes.clear();
  for (auto& r : records) outcomes.push_back(std::move(r.outcome));
  return outcomes;
}

}  // namespace dfscan

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "dfscan/http_wire.hpp"
#include "dfscan/ipv4.hpp"
#include "dfscan/sim/test_ca.hpp"
#include "dfscan/tls_util.hpp"

namespace dfscan::sim {

enum class Routing { by_host, by_sni };
enum class SniHostBinding { enforced, ignored };
enum class CertSelection { by_sni, default_always };
enum class MissingSni { serve_default, reject };

struct RewriteRule {
  std::string match_host;
  std::string new_host;

  friend bool operator==(const RewriteRule&, const RewriteRule&) = default;
};

struct EdgePolicy {
  Routing routing = Routing::by_host;
  SniHostBinding sni_host_binding = SniHostBinding::ignored;
  CertSelection cert_selection = CertSelection::by_sni;
  std::optional<std::string> default_cert_domain;
  MissingSni missing_sni = MissingSni::serve_default;
  std::vector<RewriteRule> rewrite_rules;
  // When set, the edge mints one certificate for "*.<zone>" and "<zone>" and
  // serves it for every handshake.
  std::optional<std::string> wildcard_zone;

  friend bool operator==(const EdgePolicy&, const EdgePolicy&) = default;
};

enum class PolicyPreset { strict, fronting_permissive, faking_edge, domainless_ok, wildcard_shared };

std::string_view to_string(PolicyPreset preset);
/// Accepts STRICT / strict, FRONTING_PERMISSIVE / permissive, FAKING_EDGE /
/// faking, DOMAINLESS_OK / domainless, WILDCARD_SHARED / wildcard.
std::optional<PolicyPreset> parse_policy_preset(std::string_view text);

/// `zone` is only used by WILDCARD_SHARED; `default_domain` becomes the
/// default certificate domain for FAKING_EDGE.
EdgePolicy preset_policy(PolicyPreset preset, std::string_view zone = {},
                         std::string_view default_domain = {});

/// ArgumentError when the policy cannot be served (DEFAULT_ALWAYS without a
/// default domain, empty rewrite hosts).
void validate(const EdgePolicy& policy);

/// Deterministic filler of `size` bytes derived from `domain`.
std::string domain_body(std::string_view domain, std::size_t size);

struct OriginBinding {
  std::string domain;
  std::string body;
  http::HeaderList extra_headers;
  int status = 200;
  // Non-zero: every response body is grown or shrunk by up to this many
  // bytes, derived from the request's SNI, Host and path.
  std::size_t jitter = 0;
  // The first `fail_first` requests for this domain are refused with 403,
  // like an origin that rate-limits bursts.
  std::size_t fail_first = 0;
  // Plain-HTTP upstream to proxy to instead of serving `body`.
  std::optional<Endpoint> upstream;
};

/// Checks status range and domain shape. Throws ArgumentError.
void validate(const OriginBinding& binding);

/// What the edge decided for one request. Used for tests and logs.
struct EdgeDecision {
  int status = 0;
  std::string routed_domain;  // empty when unrouted
  std::string reason;
};

/// Pure request routing, independent of sockets.
EdgeDecision decide(const EdgePolicy& policy, const std::map<std::string, std::size_t>& bound,
                    const std::optional<std::string>& sni, std::string_view host);

struct EdgeOptions {
  std::string name = "edge";
  EdgePolicy policy;
  std::vector<OriginBinding> bindings;
  Endpoint listen{*Ipv4Address::parse("127.0.0.1"), 0};
  std::size_t workers = 8;
};

/// A TLS-terminating edge in front of in-process origins. Policy and
/// bindings are fixed at start; connections are served by a small pool.
class EdgeServer {
 public:
  /// Throws StartupError when the listener cannot be bound and
  /// ArgumentError for an invalid policy or binding set.
  static std::unique_ptr<EdgeServer> start(EdgeOptions options, const TestCa& ca);

  ~EdgeServer();
  EdgeServer(const EdgeServer&) = delete;
  EdgeServer& operator=(const EdgeServer&) = delete;

  Endpoint endpoint() const { return endpoint_; }
  const std::string& name() const { return options_.name; }
  const EdgePolicy& policy() const { return options_.policy; }
  const std::vector<OriginBinding>& bindings() const { return options_.bindings; }

  /// Subject CN of the certificate a handshake with `sni` would get.
  std::string certificate_subject(const std::optional<std::string>& sni) const;

  std::size_t requests_served() const { return served_.load(); }

  void stop();

 private:
  explicit EdgeServer(EdgeOptions options) : options_(std::move(options)) {}

  void accept_loop();
  void worker_loop();
  void handle(Socket socket);
  std::string respond(const std::optional<std::string>& sni, const http::RequestHead& request);
  std::string proxy(const OriginBinding& binding, const http::RequestHead& request);
  const LeafCert& select_cert(const std::optional<std::string>& sni) const;

  static int client_hello_cb(SSL* ssl, int* alert, void* arg);

  EdgeOptions options_;
  std::map<std::string, std::size_t> bound_;  // domain -> binding index
  std::map<std::string, LeafCert> certs_;     // domain -> leaf
  std::optional<LeafCert> default_cert_;
  std::vector<std::atomic<std::size_t>> hits_;
  ossl::SslCtxPtr ctx_;
  Socket listener_;
  Endpoint endpoint_;

  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> served_{0};
  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<Socket> queue_;
  std::thread acceptor_;
  std::vector<std::thread> workers_;
};

}  // namespace dfscan::sim

#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dfscan/ipv4.hpp"
#include "dfscan/scan_engine.hpp"
#include "dfscan/sim/edge.hpp"
#include "dfscan/sim/test_ca.hpp"
#include "dfscan/tls_util.hpp"

// Local-only reproduction of the Host-rewrite chain: an in-path rewriter
// swaps the Host for an attacker distribution of equal length and hides the
// original host in the User-Agent prefix; the attacker's origin recovers it
// and proxies the victim's content back through the same edge.
namespace dfscan::sim {

struct VictimRequest {
  std::string sni;
  std::string host;
  std::string path = "/";
};

struct InterceptResult {
  std::string request;
  std::string host_before;
  std::string host_after;
  std::string ua_before;
  std::string ua_after;
};

/// Rewrite a raw request whose Host is a 14-character [a-z0-9] label under
/// `zone`. The request length never changes. ArgumentError when the Host
/// does not match, `attacker_host` differs in length, or the User-Agent is
/// too short to carry the original host.
InterceptResult intercept_rewrite(std::string_view raw_request, std::string_view attacker_host,
                                  std::string_view zone);

/// The attacker's origin: plain HTTP on loopback. Every request must carry
/// the original host at the start of its User-Agent; the origin logs it and
/// fetches that host's content from the edge over TLS.
class AttackerOrigin {
 public:
  static std::unique_ptr<AttackerOrigin> start(std::string zone, ScanConfig client_cfg);
  ~AttackerOrigin();
  AttackerOrigin(const AttackerOrigin&) = delete;
  AttackerOrigin& operator=(const AttackerOrigin&) = delete;

  Endpoint endpoint() const { return endpoint_; }
  /// Where recovered requests are sent. Must be set before traffic arrives.
  void set_edge(Endpoint edge);
  std::vector<std::string> log() const;
  void stop();

 private:
  AttackerOrigin() = default;
  void serve();
  std::string handle(std::string_view raw);

  std::string zone_;
  ScanConfig cfg_;
  Socket listener_;
  Endpoint endpoint_;
  std::optional<Endpoint> edge_;
  mutable std::mutex mutex_;
  std::vector<std::string> log_;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

/// What a network observer sees of one exchange.
struct VisibleArtifacts {
  std::string sni;
  std::string cert_subject;
  std::string destination;

  friend bool operator==(const VisibleArtifacts&, const VisibleArtifacts&) = default;
};

struct DemoTranscript {
  std::string sni;
  std::string cert_subject;
  std::string host_before;
  std::string host_after;
  std::string ua_before;
  std::string ua_after;
  std::optional<std::string> attacker_log_host;
  std::size_t response_len = 0;
  std::optional<int> status;
  std::optional<std::string> transport_error;
  std::size_t request_len_before = 0;
  std::size_t request_len_after = 0;
  std::string response_body;
  bool body_matches_victim_origin = false;
  VisibleArtifacts honest;
  VisibleArtifacts rewritten;
};

/// Send the victim request through the rewriter to `edge`. ArgumentError on
/// a length or pattern mismatch, before any connection is made.
DemoTranscript host_rewrite_demo(const VictimRequest& victim, std::string_view attacker_host,
                                 const Endpoint& edge, AttackerOrigin& origin,
                                 const ScanConfig& cfg, std::string_view zone);

struct DemoSetup {
  EdgePolicy policy;
  std::string zone{"cdn-sim.test"};
  std::string victim_label{"d3k9x2m7q1w5z8"};
  std::string attacker_label{"a7b2c9d4e1f6g3"};
  std::size_t victim_body_size = 2048;
};

/// Stand up an edge with the victim and attacker distributions plus the
/// attacker origin, run the honest and the rewritten request, and tear
/// everything down.
DemoTranscript run_demo(const DemoSetup& setup, const TestCa& ca);

nlohmann::ordered_json to_json(const DemoTranscript& transcript);

}  // namespace dfscan::sim

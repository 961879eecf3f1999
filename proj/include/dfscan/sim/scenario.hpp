#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfscan/candidate_sets.hpp"
#include "dfscan/dns_ingest.hpp"
#include "dfscan/ipv4.hpp"
#include "dfscan/sim/edge.hpp"
#include "dfscan/sim/test_ca.hpp"

namespace dfscan::sim {

inline constexpr std::string_view kDefaultZone = "cdn-sim.test";

struct BindingSpec {
  OriginBinding origin;
  std::optional<Ipv4Address> ip;  // defaults to the edge base address + index
  std::size_t prevalence = 1;     // synthesized DNS observations per binding
};

struct EdgeSpec {
  std::string name;
  EdgePolicy policy;
  std::string cname;  // canonical name every bound alias resolves through
  Ipv4Address base_ip;
  std::uint16_t port = 0;  // 0: ephemeral
  std::vector<BindingSpec> bindings;

  Ipv4Address binding_ip(std::size_t index) const;
};

/// Edges with their bound origins. Each binding answers on a virtual
/// address from a reserved benchmarking range; scans reach it through a
/// redirect to the edge's loopback listener.
struct Scenario {
  std::string name;
  std::string zone{kDefaultZone};
  std::vector<EdgeSpec> edges;
};

/// Parse scenario JSON. FormatError on anything malformed, including
/// invalid policies, duplicate virtual addresses and duplicate domains.
Scenario parse_scenario(std::string_view json_text);
Scenario load_scenario(const std::filesystem::path& path);

/// A preset name ("strict", "permissive", "faking", "domainless",
/// "wildcard", "mixed") or a path to a scenario file.
Scenario resolve_scenario(std::string_view name_or_path, std::size_t domains = 8);

/// One edge of the given preset with `domains` bound origins of distinct
/// body sizes.
Scenario make_preset_scenario(PolicyPreset preset, std::size_t domains = 8,
                              std::string_view zone = kDefaultZone);

/// Two edges sharing one canonical domain: the first FRONTING_PERMISSIVE,
/// the second STRICT, each with `per_edge` bound origins.
Scenario make_mixed_scenario(std::size_t per_edge = 4, std::string_view zone = kDefaultZone);

/// Body size used for the i-th domain of a generated scenario.
std::size_t preset_body_size(std::size_t index);

/// Running edges for a scenario.
class Simulation {
 public:
  static std::unique_ptr<Simulation> start(const Scenario& scenario, const TestCa& ca);

  const Scenario& scenario() const { return scenario_; }
  const std::vector<std::unique_ptr<EdgeServer>>& edges() const { return edges_; }

  /// Virtual address -> loopback endpoint of the edge that owns it.
  const std::map<Ipv4Address, Endpoint>& redirects() const { return redirects_; }

  /// The DNS view of the scenario: alias -> edge cname -> virtual address.
  std::vector<DnsCnameObservation> observations() const;

  void stop();

 private:
  Scenario scenario_;
  std::vector<std::unique_ptr<EdgeServer>> edges_;
  std::map<Ipv4Address, Endpoint> redirects_;
};

}  // namespace dfscan::sim

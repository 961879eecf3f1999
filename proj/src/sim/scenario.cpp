#include "dfscan/sim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dfscan/errors.hpp"
#include "dfscan/public_suffix.hpp"

namespace dfscan::sim {
namespace {

using Json = nlohmann::json;

// 198.18.0.0/15 is reserved for benchmarking and never routed.
constexpr std::uint32_t kVirtualBase = (198u << 24) | (18u << 16);
constexpr std::size_t kAddressesPerEdge = 1024;

Ipv4Address default_base(std::size_t edge_index) {
  return Ipv4Address(kVirtualBase + static_cast<std::uint32_t>(edge_index * kAddressesPerEdge) + 1);
}

template <typename Enum>
Enum parse_enum(const Json& j, const char* field, std::initializer_list<std::pair<const char*, Enum>> names) {
  if (!j.is_string()) throw FormatError(std::string(field) + " must be a string");
  const auto text = j.get<std::string>();
  for (const auto& [name, value] : names) {
    if (text == name) return value;
  }
  throw FormatError(std::string("unknown ") + field + " '" + text + "'");
}

Ipv4Address parse_ip(const Json& j, const char* field) {
  if (!j.is_string()) throw FormatError(std::string(field) + " must be a string");
  auto ip = Ipv4Address::parse(j.get<std::string>());
  if (!ip) throw FormatError(std::string(field) + " is not an IPv4 address");
  return *ip;
}

std::string required_string(const Json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string()) {
    throw FormatError(std::string("missing string field '") + field + "'");
  }
  return j.at(field).get<std::string>();
}

std::size_t size_field(const Json& j, const char* field, std::size_t fallback) {
  if (!j.contains(field)) return fallback;
  const auto& v = j.at(field);
  if (!v.is_number_unsigned()) throw FormatError(std::string(field) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

BindingSpec parse_binding(const Json& j) {
  if (!j.is_object()) throw FormatError("binding must be an object");
  BindingSpec spec;
  auto& o = spec.origin;
  o.domain = normalize_fqdn(required_string(j, "domain"));
  if (j.contains("body")) {
    if (!j.at("body").is_string()) throw FormatError("body must be a string");
    o.body = j.at("body").get<std::string>();
  } else {
    o.body = domain_body(o.domain, size_field(j, "body_size", 1024));
  }
  if (j.contains("status")) {
    if (!j.at("status").is_number_integer()) throw FormatError("status must be an integer");
    o.status = j.at("status").get<int>();
  }
  o.jitter = size_field(j, "jitter", 0);
  o.fail_first = size_field(j, "fail_first", 0);
  if (j.contains("headers")) {
    for (const auto& h : j.at("headers")) {
      if (!h.is_array() || h.size() != 2 || !h[0].is_string() || !h[1].is_string()) {
        throw FormatError("headers must be [name, value] pairs");
      }
      o.extra_headers.push_back({h[0].get<std::string>(), h[1].get<std::string>()});
    }
  }
  if (j.contains("upstream")) {
    auto ep = Endpoint::parse(required_string(j, "upstream"));
    if (!ep || !ep->ip.is_loopback()) throw FormatError("upstream must be a loopback ip:port");
    o.upstream = ep;
  }
  if (j.contains("ip")) spec.ip = parse_ip(j.at("ip"), "ip");
  spec.prevalence = size_field(j, "prevalence", 1);
  if (spec.prevalence == 0) throw FormatError("prevalence must be at least 1");
  return spec;
}

EdgeSpec parse_edge(const Json& j, std::size_t index, const std::string& zone) {
  if (!j.is_object()) throw FormatError("edge must be an object");
  EdgeSpec edge;
  edge.name = j.contains("name") ? required_string(j, "name") : "edge-" + std::to_string(index);
  if (j.contains("preset")) {
    auto preset = parse_policy_preset(required_string(j, "preset"));
    if (!preset) throw FormatError("unknown preset '" + j.at("preset").get<std::string>() + "'");
    const std::string default_domain = "default." + edge.name + "." + zone;
    edge.policy = preset_policy(*preset, zone, default_domain);
  }
  auto& p = edge.policy;
  if (j.contains("routing")) {
    p.routing = parse_enum<Routing>(j.at("routing"), "routing",
                                    {{"BY_HOST", Routing::by_host}, {"BY_SNI", Routing::by_sni}});
  }
  if (j.contains("sni_host_binding")) {
    p.sni_host_binding = parse_enum<SniHostBinding>(
        j.at("sni_host_binding"), "sni_host_binding",
        {{"ENFORCED", SniHostBinding::enforced}, {"IGNORED", SniHostBinding::ignored}});
  }
  if (j.contains("cert_selection")) {
    p.cert_selection = parse_enum<CertSelection>(
        j.at("cert_selection"), "cert_selection",
        {{"BY_SNI", CertSelection::by_sni}, {"DEFAULT_ALWAYS", CertSelection::default_always}});
  }
  if (j.contains("missing_sni")) {
    p.missing_sni = parse_enum<MissingSni>(
        j.at("missing_sni"), "missing_sni",
        {{"SERVE_DEFAULT", MissingSni::serve_default}, {"REJECT", MissingSni::reject}});
  }
  if (j.contains("default_cert_domain")) {
    p.default_cert_domain = normalize_fqdn(required_string(j, "default_cert_domain"));
  }
  if (j.contains("wildcard_zone")) p.wildcard_zone = normalize_fqdn(required_string(j, "wildcard_zone"));
  if (j.contains("rewrite_rules")) {
    for (const auto& r : j.at("rewrite_rules")) {
      p.rewrite_rules.push_back({required_string(r, "match_host"), required_string(r, "new_host")});
    }
  }
  edge.cname = j.contains("cname") ? normalize_fqdn(required_string(j, "cname")) : edge.name + "." + zone;
  edge.base_ip = j.contains("ip") ? parse_ip(j.at("ip"), "ip") : default_base(index);
  if (j.contains("port")) {
    const auto port = size_field(j, "port", 0);
    if (port > 65535) throw FormatError("port out of range");
    edge.port = static_cast<std::uint16_t>(port);
  }
  if (!j.contains("bindings") || !j.at("bindings").is_array() || j.at("bindings").empty()) {
    throw FormatError("edge " + edge.name + " needs a non-empty bindings array");
  }
  for (const auto& b : j.at("bindings")) edge.bindings.push_back(parse_binding(b));
  try {
    validate(edge.policy);
    for (const auto& b : edge.bindings) validate(b.origin);
  } catch (const ArgumentError& e) {
    throw FormatError("edge " + edge.name + ": " + e.what());
  }
  return edge;
}

void check_unique(const Scenario& s) {
  std::set<Ipv4Address> ips;
  std::set<std::string> names;
  for (const auto& edge : s.edges) {
    if (!names.insert(edge.name).second) throw FormatError("duplicate edge name " + edge.name);
    std::set<std::string> domains;
    for (std::size_t i = 0; i < edge.bindings.size(); ++i) {
      const auto ip = edge.binding_ip(i);
      if (ip.is_loopback()) throw FormatError("virtual address " + ip.to_string() + " is loopback");
      if (!ips.insert(ip).second) throw FormatError("virtual address used twice: " + ip.to_string());
      if (!domains.insert(edge.bindings[i].origin.domain).second) {
        throw FormatError("domain bound twice on edge " + edge.name + ": " + edge.bindings[i].origin.domain);
      }
    }
  }
}

std::string two_digit(std::size_t i) {
  return (i < 10 ? "0" : "") + std::to_string(i);
}

EdgeSpec generated_edge(PolicyPreset preset, std::string name, std::size_t edge_index,
                        std::size_t first_domain, std::size_t domains, std::string_view zone) {
  EdgeSpec edge;
  edge.name = std::move(name);
  edge.cname = edge.name + "." + std::string(zone);
  edge.policy = preset_policy(preset, zone, "default." + edge.cname);
  edge.base_ip = default_base(edge_index);
  for (std::size_t i = 0; i < domains; ++i) {
    const std::size_t n = first_domain + i;
    BindingSpec b;
    b.origin.domain = preset == PolicyPreset::wildcard_shared ? "tenant-" + two_digit(n) + "." + std::string(zone)
                                                              : "site-" + two_digit(n) + ".example";
    b.origin.body = domain_body(b.origin.domain, preset_body_size(n));
    edge.bindings.push_back(std::move(b));
  }
  return edge;
}

}  // namespace

Ipv4Address EdgeSpec::binding_ip(std::size_t index) const {
  if (bindings.at(index).ip) return *bindings[index].ip;
  return Ipv4Address(base_ip.value() + static_cast<std::uint32_t>(index));
}

std::size_t preset_body_size(std::size_t index) { return 1000 + 131 * index; }

Scenario parse_scenario(std::string_view json_text) {
  Json j = Json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("scenario is not a JSON object");
  Scenario s;
  s.name = j.contains("name") ? required_string(j, "name") : "scenario";
  if (j.contains("zone")) s.zone = normalize_fqdn(required_string(j, "zone"));
  if (!j.contains("edges") || !j.at("edges").is_array() || j.at("edges").empty()) {
    throw FormatError("scenario needs a non-empty edges array");
  }
  std::size_t index = 0;
  for (const auto& e : j.at("edges")) s.edges.push_back(parse_edge(e, index++, s.zone));
  check_unique(s);
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

Scenario resolve_scenario(std::string_view name_or_path, std::size_t domains) {
  const std::filesystem::path path{std::string(name_or_path)};
  if (std::filesystem::exists(path)) return load_scenario(path);
  if (name_or_path == "mixed") return make_mixed_scenario(domains / 2 == 0 ? 1 : domains / 2);
  if (auto preset = parse_policy_preset(name_or_path)) return make_preset_scenario(*preset, domains);
  throw IoError("no scenario file or preset named '" + std::string(name_or_path) + "'");
}

Scenario make_preset_scenario(PolicyPreset preset, std::size_t domains, std::string_view zone) {
  if (domains == 0 || domains >= kAddressesPerEdge) throw ArgumentError("domain count out of range");
  Scenario s;
  s.name = std::string(to_string(preset));
  s.zone = std::string(zone);
  s.edges.push_back(generated_edge(preset, "edge-0", 0, 0, domains, zone));
  return s;
}

Scenario make_mixed_scenario(std::size_t per_edge, std::string_view zone) {
  if (per_edge == 0 || per_edge >= kAddressesPerEdge) throw ArgumentError("domain count out of range");
  Scenario s;
  s.name = "MIXED";
  s.zone = std::string(zone);
  s.edges.push_back(generated_edge(PolicyPreset::fronting_permissive, "edge-0", 0, 0, per_edge, zone));
  s.edges.push_back(generated_edge(PolicyPreset::strict, "edge-1", 1, per_edge, per_edge, zone));
  return s;
}

std::unique_ptr<Simulation> Simulation::start(const Scenario& scenario, const TestCa& ca) {
  check_unique(scenario);
  auto sim = std::make_unique<Simulation>();
  sim->scenario_ = scenario;
  for (const auto& spec : scenario.edges) {
    EdgeOptions opts;
    opts.name = spec.name;
    opts.policy = spec.policy;
    opts.listen.port = spec.port;
    for (const auto& b : spec.bindings) opts.bindings.push_back(b.origin);
    sim->edges_.push_back(EdgeServer::start(std::move(opts), ca));
    const Endpoint ep = sim->edges_.back()->endpoint();
    for (std::size_t i = 0; i < spec.bindings.size(); ++i) sim->redirects_.emplace(spec.binding_ip(i), ep);
  }
  return sim;
}

std::vector<DnsCnameObservation> Simulation::observations() const {
  std::vector<DnsCnameObservation> out;
  for (const auto& edge : scenario_.edges) {
    for (std::size_t i = 0; i < edge.bindings.size(); ++i) {
      const auto& b = edge.bindings[i];
      auto obs = make_cname_observation(b.origin.domain, edge.cname, edge.binding_ip(i).to_string(),
                                        std::nullopt);
      if (!obs) throw ArgumentError("binding " + b.origin.domain + " cannot form a DNS observation");
      for (std::size_t k = 0; k < b.prevalence; ++k) out.push_back(*obs);
    }
  }
  return out;
}

void Simulation::stop() {
  for (auto& e : edges_) e->stop();
}

}  // namespace dfscan::sim

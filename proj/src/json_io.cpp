#include "dfscan/json_io.hpp"

#include <fstream>
#include <istream>

#include "dfscan/errors.hpp"

namespace dfscan::jsonl {
namespace {

const Json& field(const Json& j, const char* name) {
  if (!j.is_object() || !j.contains(name)) {
    throw FormatError(std::string("missing field '") + name + "'");
  }
  return j.at(name);
}

std::string str(const Json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_string()) throw FormatError(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> opt_str(const Json& j, const char* name) {
  if (!j.contains(name) || j.at(name).is_null()) return std::nullopt;
  return str(j, name);
}

template <typename T>
T integer(const Json& j, const char* name) {
  const auto& v = field(j, name);
  if (!v.is_number_integer()) throw FormatError(std::string("field '") + name + "' must be an integer");
  return v.get<T>();
}

Ipv4Address ip(const Json& j, const char* name) {
  auto parsed = Ipv4Address::parse(str(j, name));
  if (!parsed) throw FormatError(std::string("field '") + name + "' is not an IPv4 address");
  return *parsed;
}

Json technique(const TechniqueResult& r) {
  Json j;
  j["status"] = to_string(r.status);
  j["reason"] = to_string(r.reason);
  return j;
}

TechniqueResult decode_technique(const Json& j) {
  auto status = parse_technique_status(str(j, "status"));
  auto reason = parse_technique_reason(str(j, "reason"));
  if (!status || !reason) throw FormatError("bad technique result");
  return {*status, *reason};
}

}  // namespace

Json encode(const DnsCnameObservation& obs) {
  Json j;
  j["alias"] = obs.alias_fqdn;
  j["cname"] = obs.canonical_fqdn;
  j["cname_domain"] = obs.canonical_domain;
  j["ip"] = obs.resolved_ip.to_string();
  if (obs.observed_at) j["ts"] = *obs.observed_at;
  return j;
}

Json encode(const TlsObservation& obs) {
  Json j;
  j["sni"] = obs.server_name ? Json(*obs.server_name) : Json(nullptr);
  j["dst_ip"] = obs.dst_ip.to_string();
  return j;
}

Json encode(const DestinationTuple& tuple) {
  Json j;
  j["domain"] = tuple.domain;
  j["ip"] = tuple.ip.to_string();
  return j;
}

Json encode(const GroupKey& key) {
  Json j;
  j["kind"] = to_string(key.kind);
  j["value"] = key.value;
  return j;
}

Json encode(const CandidateSet& set) {
  Json j;
  j["kind"] = to_string(set.key.kind);
  j["value"] = set.key.value;
  Json tuples = Json::array();
  for (const auto& wt : set.tuples) {
    Json t = encode(wt.tuple);
    t["prevalence"] = wt.prevalence;
    tuples.push_back(std::move(t));
  }
  j["tuples"] = std::move(tuples);
  return j;
}

Json encode(const ScanPair& pair, std::size_t pair_id) {
  Json j;
  j["pair_id"] = pair_id;
  j["group"] = encode(pair.group);
  j["target"] = encode(pair.target);
  j["front"] = encode(pair.front);
  return j;
}

Json encode(const CertSummary& cert) {
  Json j;
  j["subject_cn"] = cert.subject_common_name ? Json(*cert.subject_common_name) : Json(nullptr);
  j["san"] = cert.san_dns_names;
  return j;
}

Json encode(const ScanOutcome& o) {
  Json j;
  j["role"] = to_string(o.spec.role);
  j["dst_ip"] = o.spec.dst_ip.to_string();
  j["sni"] = o.spec.sni ? Json(*o.spec.sni) : Json(nullptr);
  j["host"] = o.spec.host;
  j["path"] = o.spec.path;
  j["status_code"] = o.status_code ? Json(*o.status_code) : Json(nullptr);
  j["header_names"] = o.header_names;
  j["content_length"] = o.content_length;
  j["leaf_cert"] = o.leaf_cert ? encode(*o.leaf_cert) : Json(nullptr);
  j["transport_error"] = o.transport_error ? Json(*o.transport_error) : Json(nullptr);
  if (!o.attempts.empty()) {
    Json attempts = Json::array();
    for (const auto& a : o.attempts) {
      Json aj;
      aj["status_code"] = a.status_code ? Json(*a.status_code) : Json(nullptr);
      aj["transport_error"] = a.transport_error ? Json(*a.transport_error) : Json(nullptr);
      attempts.push_back(std::move(aj));
    }
    j["attempts"] = std::move(attempts);
  }
  return j;
}

Json encode(const ScanRecord& record) {
  Json j;
  j["pair_id"] = record.pair_id;
  const Json outcome = encode(record.outcome);
  for (const auto& [k, v] : outcome.items()) j[k] = v;
  return j;
}

Json encode(const PairVerdict& v) {
  Json j;
  j["group"] = encode(v.pair.group);
  j["target"] = encode(v.pair.target);
  j["front"] = encode(v.pair.front);
  j["applicable"] = v.applicable;
  j["prune_reason"] = v.prune_reason ? Json(to_string(*v.prune_reason)) : Json(nullptr);
  j["fronting"] = technique(v.fronting);
  j["faking"] = technique(v.faking);
  j["domainless"] = technique(v.domainless);
  return j;
}

DnsCnameObservation decode_cname(const Json& j) {
  DnsCnameObservation obs;
  obs.alias_fqdn = str(j, "alias");
  obs.canonical_fqdn = str(j, "cname");
  obs.canonical_domain = str(j, "cname_domain");
  obs.resolved_ip = ip(j, "ip");
  if (j.contains("ts") && !j.at("ts").is_null()) obs.observed_at = integer<std::int64_t>(j, "ts");
  return obs;
}

TlsObservation decode_tls(const Json& j) { return {opt_str(j, "sni"), ip(j, "dst_ip")}; }

DestinationTuple decode_tuple(const Json& j) { return {str(j, "domain"), ip(j, "ip")}; }

GroupKey decode_group_key(const Json& j) {
  auto kind = parse_group_kind(str(j, "kind"));
  if (!kind) throw FormatError("unknown group kind");
  return {*kind, str(j, "value")};
}

CandidateSet decode_candidate_set(const Json& j) {
  CandidateSet set;
  set.key = decode_group_key(j);
  const auto& tuples = field(j, "tuples");
  if (!tuples.is_array()) throw FormatError("'tuples' must be an array");
  for (const auto& t : tuples) {
    set.tuples.push_back({decode_tuple(t), integer<std::size_t>(t, "prevalence")});
  }
  return set;
}

std::pair<std::size_t, ScanPair> decode_pair(const Json& j) {
  ScanPair pair{decode_tuple(field(j, "target")), decode_tuple(field(j, "front")),
                decode_group_key(field(j, "group"))};
  return {integer<std::size_t>(j, "pair_id"), std::move(pair)};
}

CertSummary decode_cert(const Json& j) {
  CertSummary cert;
  cert.subject_common_name = opt_str(j, "subject_cn");
  const auto& san = field(j, "san");
  if (!san.is_array()) throw FormatError("'san' must be an array");
  for (const auto& s : san) {
    if (!s.is_string()) throw FormatError("san entries must be strings");
    cert.san_dns_names.push_back(s.get<std::string>());
  }
  return cert;
}

ScanOutcome decode_outcome(const Json& j) {
  ScanOutcome o;
  auto role = parse_scan_role(str(j, "role"));
  if (!role) throw FormatError("unknown scan role");
  o.spec.role = *role;
  o.spec.dst_ip = ip(j, "dst_ip");
  o.spec.sni = opt_str(j, "sni");
  o.spec.host = str(j, "host");
  if (j.contains("path")) o.spec.path = str(j, "path");
  if (!field(j, "status_code").is_null()) o.status_code = integer<int>(j, "status_code");
  for (const auto& h : field(j, "header_names")) o.header_names.push_back(h.get<std::string>());
  o.content_length = integer<std::size_t>(j, "content_length");
  if (!field(j, "leaf_cert").is_null()) o.leaf_cert = decode_cert(j.at("leaf_cert"));
  o.transport_error = opt_str(j, "transport_error");
  if (j.contains("attempts")) {
    for (const auto& a : j.at("attempts")) {
      AttemptRecord rec;
      if (!field(a, "status_code").is_null()) rec.status_code = integer<int>(a, "status_code");
      rec.transport_error = opt_str(a, "transport_error");
      o.attempts.push_back(std::move(rec));
    }
  }
  return o;
}

ScanRecord decode_record(const Json& j) {
  return {integer<std::size_t>(j, "pair_id"), decode_outcome(j)};
}

PairVerdict decode_verdict(const Json& j) {
  PairVerdict v;
  v.pair = {decode_tuple(field(j, "target")), decode_tuple(field(j, "front")),
            decode_group_key(field(j, "group"))};
  const auto& applicable = field(j, "applicable");
  if (!applicable.is_boolean()) throw FormatError("'applicable' must be a boolean");
  v.applicable = applicable.get<bool>();
  if (auto reason = opt_str(j, "prune_reason")) {
    v.prune_reason = parse_prune_reason(*reason);
    if (!v.prune_reason) throw FormatError("unknown prune reason");
  }
  v.fronting = decode_technique(field(j, "fronting"));
  v.faking = decode_technique(field(j, "faking"));
  v.domainless = decode_technique(field(j, "domainless"));
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Json> read_lines(std::istream& in) {
  std::vector<Json> docs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw FormatError("line " + std::to_string(line_no) + ": invalid JSON");
    docs.push_back(std::move(j));
  }
  return docs;
}

std::vector<Json> read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_lines(in);
}

}  // namespace dfscan::jsonl

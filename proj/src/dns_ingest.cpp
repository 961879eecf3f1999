#include "dfscan/dns_ingest.hpp"

#include <fstream>
#include <istream>

#include <json.hpp>

#include "dfscan/errors.hpp"

namespace dfscan {
namespace {

using nlohmann::json;

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

bool looks_like_ipv6(std::string_view text) { return text.find(':') != std::string_view::npos; }

void enforce_malformed_ratio(const IngestStats& stats, std::string_view what) {
  if (stats.lines > 0 && stats.malformed * 2 > stats.lines) {
    throw FormatError(std::string(what) + ": " + std::to_string(stats.malformed) + " of " +
                      std::to_string(stats.lines) + " lines malformed");
  }
}

bool valid_name(std::string_view name) {
  if (name.empty() || name.size() > 253) return false;
  if (name.front() == '.' || name.find("..") != std::string_view::npos) return false;
  return name.find_first_of(" \t/\\") == std::string_view::npos;
}

}  // namespace

std::optional<DnsCnameObservation> make_cname_observation(std::string_view alias,
                                                          std::string_view cname,
                                                          std::string_view ip,
                                                          std::optional<std::int64_t> ts,
                                                          const PublicSuffixList& suffixes) {
  auto alias_n = normalize_fqdn(alias);
  auto cname_n = normalize_fqdn(cname);
  auto addr = Ipv4Address::parse(ip);
  if (!addr || !valid_name(alias_n) || !valid_name(cname_n) || alias_n == cname_n) {
    return std::nullopt;
  }
  DnsCnameObservation obs;
  obs.canonical_domain = suffixes.registrable_domain(cname_n);
  obs.alias_fqdn = std::move(alias_n);
  obs.canonical_fqdn = std::move(cname_n);
  obs.resolved_ip = *addr;
  obs.observed_at = ts;
  return obs;
}

IngestResult<DnsCnameObservation> parse_cname_records(std::istream& in,
                                                      const PublicSuffixList& suffixes) {
  IngestResult<DnsCnameObservation> result;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++result.stats.lines;
    const json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (!j.is_object() || !j.contains("alias") || !j["alias"].is_string() ||
        !j.contains("cname") || !j["cname"].is_string() || !j.contains("ip") ||
        !j["ip"].is_string()) {
      ++result.stats.malformed;
      continue;
    }
    const auto& ip = j["ip"].get_ref<const std::string&>();
    if (looks_like_ipv6(ip)) {
      ++result.stats.skipped_ipv6;
      continue;
    }
    std::optional<std::int64_t> ts;
    if (j.contains("ts") && !j["ts"].is_null()) {
      if (!j["ts"].is_number_integer()) {
        ++result.stats.malformed;
        continue;
      }
      ts = j["ts"].get<std::int64_t>();
    }
    auto obs = make_cname_observation(j["alias"].get_ref<const std::string&>(),
                                      j["cname"].get_ref<const std::string&>(), ip, ts, suffixes);
    if (!obs) {
      ++result.stats.malformed;
      continue;
    }
    result.records.push_back(std::move(*obs));
    ++result.stats.accepted;
  }
  if (in.bad()) throw IoError("read error while parsing CNAME records");
  enforce_malformed_ratio(result.stats, "CNAME input");
  return result;
}

IngestResult<DnsCnameObservation> parse_cname_file(const std::filesystem::path& path,
                                                   const PublicSuffixList& suffixes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open CNAME input: " + path.string());
  return parse_cname_records(in, suffixes);
}

IngestResult<TlsObservation> parse_tls_records(std::istream& in) {
  IngestResult<TlsObservation> result;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++result.stats.lines;
    const json j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("dst_ip") || !j["dst_ip"].is_string()) {
      ++result.stats.malformed;
      continue;
    }
    const auto& ip_text = j["dst_ip"].get_ref<const std::string&>();
    if (looks_like_ipv6(ip_text)) {
      ++result.stats.skipped_ipv6;
      continue;
    }
    auto ip = Ipv4Address::parse(ip_text);
    if (!ip) {
      ++result.stats.malformed;
      continue;
    }
    TlsObservation obs{std::nullopt, *ip};
    if (j.contains("sni") && !j["sni"].is_null()) {
      if (!j["sni"].is_string()) {
        ++result.stats.malformed;
        continue;
      }
      auto sni = normalize_fqdn(j["sni"].get_ref<const std::string&>());
      if (!valid_name(sni)) {
        ++result.stats.malformed;
        continue;
      }
      obs.server_name = std::move(sni);
    }
    result.records.push_back(std::move(obs));
    ++result.stats.accepted;
  }
  if (in.bad()) throw IoError("read error while parsing TLS records");
  enforce_malformed_ratio(result.stats, "TLS input");
  return result;
}

IngestResult<TlsObservation> parse_tls_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open TLS input: " + path.string());
  return parse_tls_records(in);
}

}  // namespace dfscan

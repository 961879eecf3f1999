#include "dfscan/sim/demo.hpp"

#include <sys/socket.h>

#include <regex>

#include "dfscan/errors.hpp"
#include "dfscan/http_wire.hpp"
#include "dfscan/public_suffix.hpp"

namespace dfscan::sim {
namespace {

constexpr std::size_t kLabelLength = 14;

std::string regex_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    if (std::string_view(R"(\^$.|?*+()[]{})").find(c) != std::string_view::npos) out += '\\';
    out += c;
  }
  return out;
}

struct LineSpan {
  std::size_t value_begin = 0;
  std::size_t value_end = 0;
};

std::optional<LineSpan> find_header_value(std::string_view raw, std::string_view name) {
  const std::string needle = "\r\n" + std::string(name) + ": ";
  const auto at = raw.find(needle);
  if (at == std::string_view::npos) return std::nullopt;
  const auto begin = at + needle.size();
  const auto end = raw.find("\r\n", begin);
  if (end == std::string_view::npos) return std::nullopt;
  return LineSpan{begin, end};
}

std::string plain_response(int status, std::string_view content_type, std::string_view body) {
  return http::format_response(status,
                               {{"Content-Type", std::string(content_type)},
                                {"Content-Length", std::to_string(body.size())},
                                {"Connection", "close"}},
                               body);
}

}  // namespace

InterceptResult intercept_rewrite(std::string_view raw_request, std::string_view attacker_host,
                                  std::string_view zone) {
  const std::regex matcher("Host: ([a-z0-9]{14})[.]" + regex_escape(zone) + "\r\n");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(raw_request.begin(), raw_request.end(), m, matcher)) {
    throw ArgumentError("request Host does not match the intercepted pattern");
  }
  InterceptResult r;
  r.host_before = m[1].str() + "." + std::string(zone);
  r.host_after = std::string(attacker_host);
  if (r.host_after.size() != r.host_before.size()) {
    throw ArgumentError("attacker host length " + std::to_string(r.host_after.size()) +
                        " differs from victim host length " + std::to_string(r.host_before.size()));
  }
  auto ua = find_header_value(raw_request, "User-Agent");
  if (!ua || ua->value_end - ua->value_begin < r.host_before.size()) {
    throw ArgumentError("User-Agent too short to carry the original host");
  }

  r.request = std::string(raw_request);
  const auto host_pos = static_cast<std::size_t>(m.position(1));
  r.request.replace(host_pos, r.host_before.size(), r.host_after);
  r.ua_before = std::string(raw_request.substr(ua->value_begin, ua->value_end - ua->value_begin));
  r.request.replace(ua->value_begin, r.host_before.size(), r.host_before);
  r.ua_after = r.request.substr(ua->value_begin, ua->value_end - ua->value_begin);
  return r;
}

std::unique_ptr<AttackerOrigin> AttackerOrigin::start(std::string zone, ScanConfig client_cfg) {
  std::unique_ptr<AttackerOrigin> origin(new AttackerOrigin());
  origin->zone_ = normalize_fqdn(zone);
  origin->cfg_ = std::move(client_cfg);
  const Endpoint listen{*Ipv4Address::parse("127.0.0.1"), 0};
  origin->listener_ = tcp_listen(listen);
  origin->endpoint_ = Endpoint{listen.ip, local_port(origin->listener_)};
  origin->thread_ = std::thread([o = origin.get()] { o->serve(); });
  return origin;
}

AttackerOrigin::~AttackerOrigin() { stop(); }

void AttackerOrigin::set_edge(Endpoint edge) {
  std::lock_guard lock(mutex_);
  edge_ = edge;
}

std::vector<std::string> AttackerOrigin::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

void AttackerOrigin::stop() {
  if (stopping_.exchange(true)) return;
  if (listener_) ::shutdown(listener_.get(), SHUT_RDWR);
  if (thread_.joinable()) thread_.join();
  listener_.reset();
}

void AttackerOrigin::serve() {
  while (!stopping_) {
    Socket conn(::accept(listener_.get(), nullptr, nullptr));
    if (!conn) {
      if (stopping_ || (errno != EINTR && errno != ECONNABORTED)) return;
      continue;
    }
    set_io_timeout(conn.get(), std::chrono::milliseconds(5000));
    std::string buffer;
    char chunk[8192];
    std::size_t consumed = 0;
    std::string response;
    try {
      for (;;) {
        const ssize_t n = ::recv(conn.get(), chunk, sizeof(chunk), 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        if (http::parse_request_head(buffer, consumed)) break;
      }
      response = handle(buffer.substr(0, consumed));
    } catch (const FormatError&) {
      response = plain_response(400, "text/plain", "malformed request\n");
    }
    send_all(conn.get(), response);
  }
}

std::string AttackerOrigin::handle(std::string_view raw) {
  std::size_t consumed = 0;
  auto head = http::parse_request_head(raw, consumed);
  if (!head) return plain_response(400, "text/plain", "incomplete request\n");
  const std::string* ua = http::find_header(head->headers, "User-Agent");
  const std::regex carried("^([a-z0-9]{14}[.]" + regex_escape(zone_) + ")");
  std::smatch m;
  if (!ua || !std::regex_search(*ua, m, carried)) {
    return plain_response(400, "text/plain", "no carried host\n");
  }
  const std::string original = m[1].str();
  std::optional<Endpoint> edge;
  {
    std::lock_guard lock(mutex_);
    log_.push_back(original);
    edge = edge_;
  }
  if (!edge) return plain_response(502, "text/plain", "edge not configured\n");

  http::HeaderList headers;
  for (const auto& h : head->headers) {
    if (h.name == "Host") {
      headers.push_back({"Host", original});
    } else {
      headers.push_back(h);
    }
  }
  auto ex = https_exchange(*edge, original, http::format_request(head->method, head->target, headers), cfg_);
  if (ex.transport_error || !ex.status_code) {
    return plain_response(502, "text/plain", "upstream fetch failed: " + ex.transport_error.value_or("?") + "\n");
  }
  return plain_response(*ex.status_code, "application/octet-stream", ex.body);
}

DemoTranscript host_rewrite_demo(const VictimRequest& victim, std::string_view attacker_host,
                                 const Endpoint& edge, AttackerOrigin& origin, const ScanConfig& cfg,
                                 std::string_view zone) {
  ScanSpec spec{ScanRole::baseline_0, edge.ip, victim.sni, victim.host, victim.path};
  const std::string honest_request = build_scan_request(spec, cfg);
  InterceptResult rewrite = intercept_rewrite(honest_request, attacker_host, zone);

  DemoTranscript t;
  t.sni = victim.sni;
  t.host_before = rewrite.host_before;
  t.host_after = rewrite.host_after;
  t.ua_before = rewrite.ua_before;
  t.ua_after = rewrite.ua_after;
  t.request_len_before = honest_request.size();
  t.request_len_after = rewrite.request.size();

  const std::size_t log_before = origin.log().size();
  auto ex = https_exchange(edge, victim.sni, rewrite.request, cfg);
  t.cert_subject = ex.leaf_cert ? ex.leaf_cert->subject_common_name.value_or("") : "";
  t.status = ex.status_code;
  t.transport_error = ex.transport_error;
  t.response_body = ex.body;
  t.response_len = ex.body_length;
  const auto log = origin.log();
  if (log.size() > log_before) t.attacker_log_host = log.back();
  t.rewritten = {victim.sni, t.cert_subject, edge.to_string()};
  return t;
}

DemoTranscript run_demo(const DemoSetup& setup, const TestCa& ca) {
  const std::string zone = normalize_fqdn(setup.zone);
  const std::string victim_host = setup.victim_label + "." + zone;
  const std::string attacker_host = setup.attacker_label + "." + zone;
  if (setup.victim_label.size() != kLabelLength) throw ArgumentError("victim label must be 14 characters");

  ScanConfig cfg;
  cfg.connect_timeout = std::chrono::milliseconds(2000);
  cfg.tls_timeout = std::chrono::milliseconds(2000);
  cfg.total_timeout = std::chrono::milliseconds(8000);

  auto origin = AttackerOrigin::start(zone, cfg);
  EdgeOptions opts;
  opts.name = "demo-edge";
  opts.policy = setup.policy;
  opts.workers = 4;
  OriginBinding victim_binding;
  victim_binding.domain = victim_host;
  victim_binding.body = domain_body(victim_host, setup.victim_body_size);
  OriginBinding attacker_binding;
  attacker_binding.domain = attacker_host;
  attacker_binding.upstream = origin->endpoint();
  opts.bindings = {victim_binding, attacker_binding};
  auto edge = EdgeServer::start(std::move(opts), ca);
  origin->set_edge(edge->endpoint());

  // The same request without the rewriter, for the observer comparison.
  ScanSpec honest_spec{ScanRole::baseline_0, edge->endpoint().ip, victim_host, victim_host, "/"};
  auto honest = https_exchange(edge->endpoint(), victim_host, build_scan_request(honest_spec, cfg), cfg);

  DemoTranscript t = host_rewrite_demo({victim_host, victim_host, "/"}, attacker_host, edge->endpoint(),
                                       *origin, cfg, zone);
  t.honest = {victim_host,
              honest.leaf_cert ? honest.leaf_cert->subject_common_name.value_or("") : "",
              edge->endpoint().to_string()};
  t.body_matches_victim_origin = t.status == 200 && t.response_body == victim_binding.body;
  edge->stop();
  origin->stop();
  return t;
}

nlohmann::ordered_json to_json(const DemoTranscript& t) {
  using J = nlohmann::ordered_json;
  auto artifacts = [](const VisibleArtifacts& a) {
    J j;
    j["sni"] = a.sni;
    j["cert_subject"] = a.cert_subject;
    j["destination"] = a.destination;
    return j;
  };
  J j;
  j["sni"] = t.sni;
  j["cert_subject"] = t.cert_subject;
  j["host_before"] = t.host_before;
  j["host_after"] = t.host_after;
  j["ua_before"] = t.ua_before;
  j["ua_after"] = t.ua_after;
  j["attacker_log_host"] = t.attacker_log_host ? J(*t.attacker_log_host) : J(nullptr);
  j["response_len"] = t.response_len;
  j["status"] = t.status ? J(*t.status) : J(nullptr);
  j["transport_error"] = t.transport_error ? J(*t.transport_error) : J(nullptr);
  j["request_len_before"] = t.request_len_before;
  j["request_len_after"] = t.request_len_after;
  j["body_matches_victim_origin"] = t.body_matches_victim_origin;
  j["honest"] = artifacts(t.honest);
  j["rewritten"] = artifacts(t.rewritten);
  return j;
}

}  // namespace dfscan::sim

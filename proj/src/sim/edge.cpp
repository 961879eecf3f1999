#include "dfscan/sim/edge.hpp"

#include <openssl/err.h>
#include <openssl/tls1.h>
#include <sys/socket.h>

#include <algorithm>
#include <cctype>

#include "dfscan/candidate_sets.hpp"
#include "dfscan/errors.hpp"
#include "dfscan/public_suffix.hpp"

namespace dfscan::sim {
namespace {

constexpr auto kIoTimeout = std::chrono::milliseconds(5000);
constexpr std::string_view kServerName = "dfscan-sim-edge";

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Host header value without port, lowercased.
std::string host_name(std::string_view host) {
  if (auto colon = host.rfind(':'); colon != std::string_view::npos) host = host.substr(0, colon);
  return normalize_fqdn(host);
}

std::string error_response(int status, std::string_view reason) {
  std::string body = std::string(reason) + "\n";
  return http::format_response(status,
                               {{"Server", std::string(kServerName)},
                                {"Content-Type", "text/plain"},
                                {"Content-Length", std::to_string(body.size())},
                                {"Connection", "close"}},
                               body);
}

// SNI host_name from a raw server_name extension body.
std::optional<std::string> parse_sni_extension(const unsigned char* p, std::size_t len) {
  if (len < 2) return std::nullopt;
  std::size_t list_len = (std::size_t{p[0]} << 8) | p[1];
  if (list_len + 2 > len) return std::nullopt;
  std::size_t pos = 2;
  while (pos + 3 <= 2 + list_len) {
    const unsigned type = p[pos];
    const std::size_t name_len = (std::size_t{p[pos + 1]} << 8) | p[pos + 2];
    pos += 3;
    if (pos + name_len > 2 + list_len) return std::nullopt;
    if (type == TLSEXT_NAMETYPE_host_name) {
      return std::string(reinterpret_cast<const char*>(p + pos), name_len);
    }
    pos += name_len;
  }
  return std::nullopt;
}

struct ConnState {
  std::optional<std::string> sni;
};

}  // namespace

std::string_view to_string(PolicyPreset preset) {
  switch (preset) {
    case PolicyPreset::strict: return "STRICT";
    case PolicyPreset::fronting_permissive: return "FRONTING_PERMISSIVE";
    case PolicyPreset::faking_edge: return "FAKING_EDGE";
    case PolicyPreset::domainless_ok: return "DOMAINLESS_OK";
    case PolicyPreset::wildcard_shared: return "WILDCARD_SHARED";
  }
  return "?";
}

std::optional<PolicyPreset> parse_policy_preset(std::string_view text) {
  static const std::pair<std::string_view, PolicyPreset> kShort[] = {
      {"strict", PolicyPreset::strict},
      {"permissive", PolicyPreset::fronting_permissive},
      {"faking", PolicyPreset::faking_edge},
      {"domainless", PolicyPreset::domainless_ok},
      {"wildcard", PolicyPreset::wildcard_shared},
  };
  for (const auto& [name, preset] : kShort) {
    if (text == name || text == to_string(preset)) return preset;
  }
  return std::nullopt;
}

EdgePolicy preset_policy(PolicyPreset preset, std::string_view zone, std::string_view default_domain) {
  EdgePolicy p;
  switch (preset) {
    case PolicyPreset::strict:
      p.sni_host_binding = SniHostBinding::enforced;
      p.missing_sni = MissingSni::reject;
      break;
    case PolicyPreset::fronting_permissive:
    case PolicyPreset::domainless_ok:
      break;
    case PolicyPreset::faking_edge:
      p.cert_selection = CertSelection::default_always;
      if (!default_domain.empty()) p.default_cert_domain = std::string(default_domain);
      break;
    case PolicyPreset::wildcard_shared:
      if (zone.empty()) throw ArgumentError("WILDCARD_SHARED needs a zone");
      p.wildcard_zone = normalize_fqdn(zone);
      break;
  }
  return p;
}

void validate(const EdgePolicy& policy) {
  if (policy.cert_selection == CertSelection::default_always && !policy.default_cert_domain &&
      !policy.wildcard_zone) {
    throw ArgumentError("cert_selection DEFAULT_ALWAYS requires default_cert_domain");
  }
  if (policy.default_cert_domain && policy.default_cert_domain->empty()) {
    throw ArgumentError("default_cert_domain is empty");
  }
  for (const auto& rule : policy.rewrite_rules) {
    if (rule.match_host.empty() || rule.new_host.empty()) throw ArgumentError("empty rewrite rule host");
  }
}

void validate(const OriginBinding& binding) {
  if (normalize_fqdn(binding.domain).empty()) throw ArgumentError("binding without a domain");
  if (binding.status < 100 || binding.status > 599) {
    throw ArgumentError("binding status out of range: " + std::to_string(binding.status));
  }
}

std::string domain_body(std::string_view domain, std::size_t size) {
  static constexpr std::string_view kAlphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  std::uint64_t state = fnv1a(domain);
  std::string body(size, '\0');
  for (auto& c : body) c = kAlphabet[splitmix64(state) % kAlphabet.size()];
  return body;
}

EdgeDecision decide(const EdgePolicy& policy, const std::map<std::string, std::size_t>& bound,
                    const std::optional<std::string>& sni, std::string_view host) {
  EdgeDecision d;
  std::string name = host_name(host);
  const std::optional<std::string> sni_name =
      sni ? std::optional<std::string>(normalize_fqdn(*sni)) : std::nullopt;
  if (name.empty()) {
    d.status = 400;
    d.reason = "missing Host";
    return d;
  }
  if (!sni_name && policy.missing_sni == MissingSni::reject) {
    d.status = 400;
    d.reason = "missing server_name";
    return d;
  }
  if (policy.sni_host_binding == SniHostBinding::enforced) {
    const std::optional<std::string>& expected = sni_name ? sni_name : policy.default_cert_domain;
    if (!expected || *expected != name) {
      d.status = 421;
      d.reason = "Host does not match the TLS server_name";
      return d;
    }
  }
  for (const auto& rule : policy.rewrite_rules) {
    if (normalize_fqdn(rule.match_host) == name) {
      name = normalize_fqdn(rule.new_host);
      break;
    }
  }
  const std::string& key = (policy.routing == Routing::by_sni && sni_name) ? *sni_name : name;
  if (!bound.contains(key)) {
    d.status = 403;
    d.reason = "no origin bound for " + key;
    return d;
  }
  d.status = 200;
  d.routed_domain = key;
  return d;
}

std::unique_ptr<EdgeServer> EdgeServer::start(EdgeOptions options, const TestCa& ca) {
  validate(options.policy);
  if (options.bindings.empty()) throw ArgumentError("edge " + options.name + " has no bindings");
  std::unique_ptr<EdgeServer> edge(new EdgeServer(std::move(options)));
  auto& opts = edge->options_;

  for (std::size_t i = 0; i < opts.bindings.size(); ++i) {
    auto& b = opts.bindings[i];
    validate(b);
    b.domain = normalize_fqdn(b.domain);
    if (!edge->bound_.emplace(b.domain, i).second) {
      throw ArgumentError("domain bound twice on edge " + opts.name + ": " + b.domain);
    }
  }
  edge->hits_ = std::vector<std::atomic<std::size_t>>(opts.bindings.size());

  const auto& policy = opts.policy;
  if (policy.wildcard_zone) {
    edge->default_cert_ = ca.issue({"*." + *policy.wildcard_zone, *policy.wildcard_zone});
  } else {
    for (const auto& b : opts.bindings) edge->certs_.emplace(b.domain, ca.issue({b.domain}));
    const std::string default_domain =
        policy.default_cert_domain ? normalize_fqdn(*policy.default_cert_domain) : opts.bindings[0].domain;
    if (auto it = edge->certs_.find(default_domain); it != edge->certs_.end()) {
      edge->default_cert_ = LeafCert{ossl::share(it->second.cert.get()), ossl::share(it->second.key.get())};
    } else {
      edge->default_cert_ = ca.issue({default_domain});
    }
  }

  edge->ctx_.reset(SSL_CTX_new(TLS_server_method()));
  if (!edge->ctx_) throw StartupError("SSL_CTX_new: " + ossl::last_error());
  SSL_CTX_set_min_proto_version(edge->ctx_.get(), TLS1_2_VERSION);
  SSL_CTX_set_client_hello_cb(edge->ctx_.get(), &EdgeServer::client_hello_cb, edge.get());

  edge->listener_ = tcp_listen(opts.listen);
  edge->endpoint_ = Endpoint{opts.listen.ip, local_port(edge->listener_)};

  const std::size_t workers = std::max<std::size_t>(1, opts.workers);
  for (std::size_t i = 0; i < workers; ++i) edge->workers_.emplace_back([e = edge.get()] { e->worker_loop(); });
  edge->acceptor_ = std::thread([e = edge.get()] { e->accept_loop(); });
  return edge;
}

EdgeServer::~EdgeServer() { stop(); }

void EdgeServer::stop() {
  if (stopping_.exchange(true)) return;
  if (listener_) ::shutdown(listener_.get(), SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  queue_cv_.notify_all();
  for (auto& w : workers_) {
    if (w.joinable()) w.join();
  }
  listener_.reset();
}

void EdgeServer::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listener_.get(), nullptr, nullptr);
    if (fd < 0) {
      if (stopping_) return;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    {
      std::lock_guard lock(queue_mutex_);
      queue_.emplace_back(fd);
    }
    queue_cv_.notify_one();
  }
}

void EdgeServer::worker_loop() {
  for (;;) {
    Socket socket;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      socket = std::move(queue_.front());
      queue_.pop_front();
    }
    handle(std::move(socket));
  }
}

int EdgeServer::client_hello_cb(SSL* ssl, int* alert, void* arg) {
  auto* self = static_cast<EdgeServer*>(arg);
  auto* state = static_cast<ConnState*>(SSL_get_app_data(ssl));
  const unsigned char* ext = nullptr;
  std::size_t ext_len = 0;
  if (SSL_client_hello_get0_ext(ssl, TLSEXT_TYPE_server_name, &ext, &ext_len) == 1) {
    state->sni = parse_sni_extension(ext, ext_len);
  }
  if (!state->sni && self->options_.policy.missing_sni == MissingSni::reject) {
    *alert = SSL_AD_UNRECOGNIZED_NAME;
    return SSL_CLIENT_HELLO_ERROR;
  }
  const LeafCert& leaf = self->select_cert(state->sni);
  if (SSL_use_certificate(ssl, leaf.cert.get()) != 1 || SSL_use_PrivateKey(ssl, leaf.key.get()) != 1) {
    *alert = SSL_AD_INTERNAL_ERROR;
    return SSL_CLIENT_HELLO_ERROR;
  }
  return SSL_CLIENT_HELLO_SUCCESS;
}

const LeafCert& EdgeServer::select_cert(const std::optional<std::string>& sni) const {
  if (options_.policy.wildcard_zone || options_.policy.cert_selection == CertSelection::default_always ||
      !sni) {
    return *default_cert_;
  }
  if (auto it = certs_.find(normalize_fqdn(*sni)); it != certs_.end()) return it->second;
  return *default_cert_;
}

std::string EdgeServer::certificate_subject(const std::optional<std::string>& sni) const {
  auto names = cert_names(select_cert(sni).cert.get());
  return names.common_name.value_or("");
}

void EdgeServer::handle(Socket socket) {
  const int fd = socket.get();
  set_io_timeout(fd, kIoTimeout);
  ossl::SslPtr ssl(SSL_new(ctx_.get()));
  if (!ssl) return;
  ConnState state;
  SSL_set_app_data(ssl.get(), &state);
  SSL_set_fd(ssl.get(), fd);
  if (SSL_accept(ssl.get()) != 1) {
    ERR_clear_error();
    return;
  }

  std::string buffer;
  std::optional<http::RequestHead> request;
  std::string response;
  char chunk[8192];
  try {
    while (!request) {
      std::size_t n = 0;
      if (SSL_read_ex(ssl.get(), chunk, sizeof(chunk), &n) != 1) {
        ERR_clear_error();
        return;
      }
      buffer.append(chunk, n);
      std::size_t consumed = 0;
      request = http::parse_request_head(buffer, consumed);
    }
    response = respond(state.sni, *request);
  } catch (const FormatError&) {
    response = error_response(400, "malformed request");
  }
  ssl_write_all(ssl.get(), response);
  SSL_shutdown(ssl.get());
  ERR_clear_error();
  ++served_;
}

std::string EdgeServer::respond(const std::optional<std::string>& sni, const http::RequestHead& request) {
  const std::string* host = http::find_header(request.headers, "Host");
  const EdgeDecision d = decide(options_.policy, bound_, sni, host ? *host : std::string_view{});
  if (d.status != 200) return error_response(d.status, d.reason);

  const std::size_t index = bound_.at(d.routed_domain);
  const OriginBinding& binding = options_.bindings[index];
  if (hits_[index]++ < binding.fail_first) return error_response(403, "rate limited");
  if (binding.upstream) return proxy(binding, request);

  std::string body = binding.body;
  if (binding.jitter > 0) {
    const std::uint64_t h = fnv1a(sni.value_or("") + "|" + (host ? *host : "") + "|" + request.target);
    const auto span = 2 * binding.jitter + 1;
    const auto delta = static_cast<long long>(h % span) - static_cast<long long>(binding.jitter);
    const auto size = std::max<long long>(0, static_cast<long long>(body.size()) + delta);
    body.resize(static_cast<std::size_t>(size), '.');
  }
  http::HeaderList headers{{"Server", std::string(kServerName)},
                           {"Content-Type", "application/octet-stream"}};
  headers.insert(headers.end(), binding.extra_headers.begin(), binding.extra_headers.end());
  headers.push_back({"Content-Length", std::to_string(body.size())});
  headers.push_back({"Connection", "close"});
  return http::format_response(binding.status, headers, body);
}

std::string EdgeServer::proxy(const OriginBinding& binding, const http::RequestHead& request) {
  auto conn = tcp_connect(*binding.upstream, kIoTimeout);
  if (!conn.socket) return error_response(502, "upstream unreachable: " + conn.error);
  const int fd = conn.socket.get();
  set_io_timeout(fd, kIoTimeout);
  if (!send_all(fd, http::format_request(request.method, request.target, request.headers))) {
    return error_response(502, "upstream write failed");
  }
  http::ResponseReader reader(64 * 1024 * 1024);
  char chunk[8192];
  try {
    for (;;) {
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n > 0) {
        if (reader.feed(std::string_view(chunk, static_cast<std::size_t>(n)))) break;
        continue;
      }
      if (n == 0 && reader.finish()) break;
      return error_response(502, "upstream closed early");
    }
  } catch (const FormatError&) {
    return error_response(502, "malformed upstream response");
  }
  http::HeaderList headers{{"Server", std::string(kServerName)}};
  for (const auto& h : reader.head().headers) {
    std::string lower = h.name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "content-length" || lower == "connection" || lower == "transfer-encoding" ||
        lower == "server") {
      continue;
    }
    headers.push_back(h);
  }
  headers.push_back({"Content-Length", std::to_string(reader.body().size())});
  headers.push_back({"Connection", "close"});
  return http::format_response(reader.head().status, headers, reader.body());
}

}  // namespace dfscan::sim

#pragma once

#include <openssl/ssl.h>
#include <openssl/x509.h>

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dfscan/ipv4.hpp"

namespace dfscan {

namespace ossl {

template <auto Fn>
struct Deleter {
  template <typename T>
  void operator()(T* p) const noexcept {
    Fn(p);
  }
};

using SslCtxPtr = std::unique_ptr<SSL_CTX, Deleter<SSL_CTX_free>>;
using SslPtr = std::unique_ptr<SSL, Deleter<SSL_free>>;
using X509Ptr = std::unique_ptr<X509, Deleter<X509_free>>;
using PkeyPtr = std::unique_ptr<EVP_PKEY, Deleter<EVP_PKEY_free>>;

/// Drain the OpenSSL error queue into one line.
std::string last_error();

/// Shared reference to an X509 (bumps the refcount).
X509Ptr share(X509* cert);
PkeyPtr share(EVP_PKEY* key);

}  // namespace ossl

/// Owning file descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  int release() {
    int fd = fd_;
    fd_ = -1;
    return fd;
  }
  void reset(int fd = -1);

 private:
  int fd_ = -1;
};

/// Connect by address only (no resolver involved). Returns an error string
/// on failure.
struct ConnectResult {
  Socket socket;
  std::string error;
};
ConnectResult tcp_connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

/// Bind + listen on an IPv4 endpoint; port 0 picks an ephemeral port.
/// Throws StartupError.
Socket tcp_listen(const Endpoint& endpoint, int backlog = 128);
std::uint16_t local_port(const Socket& socket);

void set_io_timeout(int fd, std::chrono::milliseconds timeout);

/// Write everything or return false.
bool send_all(int fd, std::string_view data);
bool ssl_write_all(SSL* ssl, std::string_view data);

/// Subject CN and SAN dNSName entries of a certificate.
struct CertNames {
  std::optional<std::string> common_name;
  std::vector<std::string> dns_names;
};
CertNames cert_names(X509* cert);

}  // namespace dfscan

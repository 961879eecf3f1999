#include "dfscan/ipv4.hpp"

#include <arpa/inet.h>

#include <charconv>

#include "dfscan/errors.hpp"

namespace dfscan {

std::optional<Ipv4Address> Ipv4Address::parse(std::string_view text) {
  if (text.empty() || text.size() > 15) return std::nullopt;
  std::string buf(text);
  in_addr addr{};
  if (::inet_pton(AF_INET, buf.c_str(), &addr) != 1) return std::nullopt;
  return Ipv4Address(ntohl(addr.s_addr));
}

std::string Ipv4Address::to_string() const {
  return std::to_string(value_ >> 24) + '.' + std::to_string((value_ >> 16) & 0xff) + '.' +
         std::to_string((value_ >> 8) & 0xff) + '.' + std::to_string(value_ & 0xff);
}

Ipv4Prefix::Ipv4Prefix(Ipv4Address network, unsigned length) : length_(length) {
  if (length > 32) throw ArgumentError("prefix length out of range: " + std::to_string(length));
  network_ = Ipv4Address(network.value() & mask_for(length));
}

std::optional<Ipv4Prefix> Ipv4Prefix::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  auto ip = Ipv4Address::parse(text.substr(0, slash));
  const auto len_text = text.substr(slash + 1);
  unsigned len = 0;
  auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
  if (!ip || ec != std::errc{} || ptr != len_text.data() + len_text.size() || len_text.empty() ||
      len > 32) {
    return std::nullopt;
  }
  return Ipv4Prefix(*ip, len);
}

std::string Ipv4Prefix::to_string() const {
  return network_.to_string() + '/' + std::to_string(length_);
}

std::optional<Endpoint> Endpoint::parse(std::string_view host_port) {
  const auto colon = host_port.rfind(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto ip = Ipv4Address::parse(host_port.substr(0, colon));
  const auto port_text = host_port.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (!ip || ec != std::errc{} || ptr != port_text.data() + port_text.size() || port == 0 ||
      port > 65535) {
    return std::nullopt;
  }
  return Endpoint{*ip, static_cast<std::uint16_t>(port)};
}

std::string Endpoint::to_string() const { return ip.to_string() + ':' + std::to_string(port); }

}  // namespace dfscan

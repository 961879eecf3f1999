#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace dfscan {

/// An IPv4 address in host byte order.
class Ipv4Address {
 public:
  constexpr Ipv4Address() = default;
  constexpr explicit Ipv4Address(std::uint32_t value) : value_(value) {}

  /// Strict dotted-quad parse; rejects IPv6, hostnames and trailing junk.
  static std::optional<Ipv4Address> parse(std::string_view text);

  constexpr std::uint32_t value() const { return value_; }
  constexpr bool is_loopback() const { return (value_ >> 24) == 127; }
  std::string to_string() const;

  friend constexpr auto operator<=>(Ipv4Address, Ipv4Address) = default;

 private:
  std::uint32_t value_ = 0;
};

/// A CIDR block. The network address is always stored masked.
class Ipv4Prefix {
 public:
  constexpr Ipv4Prefix() = default;
  Ipv4Prefix(Ipv4Address network, unsigned length);

  static std::optional<Ipv4Prefix> parse(std::string_view text);

  static constexpr std::uint32_t mask_for(unsigned length) {
    return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  }

  constexpr Ipv4Address network() const { return network_; }
  constexpr unsigned length() const { return length_; }
  constexpr std::uint32_t mask() const { return mask_for(length_); }
  constexpr bool contains(Ipv4Address ip) const {
    return (ip.value() & mask()) == network_.value();
  }
  std::string to_string() const;

  friend constexpr auto operator<=>(const Ipv4Prefix&, const Ipv4Prefix&) = default;

 private:
  Ipv4Address network_;
  unsigned length_ = 0;
};

/// Where a scan actually connects: an address plus TCP port.
struct Endpoint {
  Ipv4Address ip;
  std::uint16_t port = 443;

  static std::optional<Endpoint> parse(std::string_view host_port);
  std::string to_string() const;

  friend constexpr auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

}  // namespace dfscan

template <>
struct std::hash<dfscan::Ipv4Address> {
  std::size_t operator()(dfscan::Ipv4Address ip) const noexcept {
    return std::hash<std::uint32_t>{}(ip.value());
  }
};

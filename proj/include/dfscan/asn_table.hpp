#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dfscan/ipv4.hpp"

namespace dfscan {

struct AsnEntry {
  Ipv4Prefix prefix;
  std::uint32_t asn = 0;
  std::string as_name;

  friend bool operator==(const AsnEntry&, const AsnEntry&) = default;
};

/// Longest-prefix-match table from IPv4 prefixes to autonomous systems.
///
/// Entries are kept sorted by (prefix length desc, network asc); a lookup
/// binary-searches each populated prefix length from /32 down to /0 and
/// stops at the first hit. Duplicate prefixes are rejected at construction,
/// so a match is never ambiguous.
class AsnTable {
 public:
  AsnTable() = default;
  explicit AsnTable(std::vector<AsnEntry> entries);

  /// CSV with a `prefix,asn,name` header. The name is everything after the
  /// second comma, optionally double-quoted, so names containing commas work.
  static AsnTable parse_csv(std::istream& in);
  static AsnTable load_csv(const std::filesystem::path& path);

  const AsnEntry* lookup(Ipv4Address ip) const;

  std::span<const AsnEntry> entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  struct Level {
    unsigned length;
    std::size_t begin;
    std::size_t end;
  };

  std::vector<AsnEntry> entries_;
  std::vector<Level> levels_;
};

}  // namespace dfscan

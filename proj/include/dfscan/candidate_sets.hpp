#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dfscan/asn_table.hpp"
#include "dfscan/dns_ingest.hpp"
#include "dfscan/ipv4.hpp"

namespace dfscan {

/// The atomic scan subject.
struct DestinationTuple {
  std::string domain;
  Ipv4Address ip;

  friend auto operator<=>(const DestinationTuple&, const DestinationTuple&) = default;
  friend bool operator==(const DestinationTuple&, const DestinationTuple&) = default;
};

enum class GroupKind { autonomous_system, cname_domain, cname_fqdn };

std::string_view to_string(GroupKind kind);
std::optional<GroupKind> parse_group_kind(std::string_view text);

struct GroupKey {
  GroupKind kind = GroupKind::cname_domain;
  std::string value;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
  friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

struct WeightedTuple {
  DestinationTuple tuple;
  std::size_t prevalence = 0;

  friend bool operator==(const WeightedTuple&, const WeightedTuple&) = default;
};

/// Related destinations presumed to share infrastructure. Tuples are unique
/// and ordered by prevalence desc, then domain, then ip.
struct CandidateSet {
  GroupKey key;
  std::vector<WeightedTuple> tuples;

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

struct ScanPair {
  DestinationTuple target;
  DestinationTuple front;
  GroupKey group;

  friend bool operator==(const ScanPair&, const ScanPair&) = default;
};

inline constexpr std::size_t kMaxCandidateSetSize = 100'000;
inline constexpr std::size_t kDefaultPairsPerTuple = 5;

/// Group CNAME observations by canonical registrable domain or canonical
/// FQDN. The tuple is (alias, resolved ip); prevalence is the raw count.
std::vector<CandidateSet> build_groups(std::span<const DnsCnameObservation> observations,
                                       GroupKind kind,
                                       std::size_t max_tuples = kMaxCandidateSetSize);

/// Group TLS observations by the autonomous system of their destination.
/// Observations without SNI or outside every tracked prefix are dropped.
std::vector<CandidateSet> build_groups(std::span<const TlsObservation> observations,
                                       const AsnTable& asns,
                                       std::size_t max_tuples = kMaxCandidateSetSize);

/// Key value used for an AS group, e.g. "AS54113 FASTLY".
std::string as_group_value(const AsnEntry& entry);

enum class CanonicalLevel { domain, fqdn };

/// Canonical names ordered by how many distinct aliases map to them.
std::vector<std::pair<std::string, std::size_t>> rank_canonicals(
    std::span<const DnsCnameObservation> observations, CanonicalLevel level);

/// For every tuple, draw up to `pairs_per_tuple` distinct fronts (without
/// replacement, never the same domain as the target). Deterministic in
/// (set, seed) on every platform: the generator and the bounded draw are
/// both implemented here rather than taken from <random>'s distributions.
std::vector<ScanPair> sample_pairs(const CandidateSet& set, std::size_t pairs_per_tuple,
                                   std::uint64_t seed);

/// SplitMix64 step; the seed-mixing primitive used by sample_pairs.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace dfscan

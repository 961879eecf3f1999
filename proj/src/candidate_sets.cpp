#include "dfscan/candidate_sets.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "dfscan/errors.hpp"

namespace dfscan {
namespace {

std::vector<WeightedTuple> rank_tuples(const std::map<DestinationTuple, std::size_t>& counts,
                                       std::size_t max_tuples) {
  std::vector<WeightedTuple> tuples;
  tuples.reserve(counts.size());
  for (const auto& [tuple, count] : counts) tuples.push_back({tuple, count});
  // std::map iteration already gives (domain, ip) order, so a stable sort on
  // prevalence leaves ties lexicographic.
  std::stable_sort(tuples.begin(), tuples.end(), [](const WeightedTuple& a, const WeightedTuple& b) {
    return a.prevalence > b.prevalence;
  });
  if (tuples.size() > max_tuples) tuples.resize(max_tuples);
  return tuples;
}

std::vector<CandidateSet> finish(std::map<GroupKey, std::map<DestinationTuple, std::size_t>>& groups,
                                 std::size_t max_tuples) {
  std::vector<CandidateSet> sets;
  sets.reserve(groups.size());
  for (auto& [key, counts] : groups) sets.push_back({key, rank_tuples(counts, max_tuples)});
  return sets;
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Uniform integer in [0, bound) by rejection; bound > 0.
std::uint64_t bounded(std::uint64_t& state, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t r = splitmix64(state);
    if (r < limit) return r % bound;
  }
}

}  // namespace

std::string_view to_string(GroupKind kind) {
  switch (kind) {
    case GroupKind::autonomous_system: return "AUTONOMOUS_SYSTEM";
    case GroupKind::cname_domain: return "CNAME_DOMAIN";
    case GroupKind::cname_fqdn: return "CNAME_FQDN";
  }
  return "?";
}

std::optional<GroupKind> parse_group_kind(std::string_view text) {
  if (text == "AUTONOMOUS_SYSTEM" || text == "as") return GroupKind::autonomous_system;
  if (text == "CNAME_DOMAIN" || text == "cname-domain") return GroupKind::cname_domain;
  if (text == "CNAME_FQDN" || text == "cname-fqdn") return GroupKind::cname_fqdn;
  return std::nullopt;
}

std::string as_group_value(const AsnEntry& entry) {
  std::string value = "AS" + std::to_string(entry.asn);
  if (!entry.as_name.empty()) value += " " + entry.as_name;
  return value;
}

std::vector<CandidateSet> build_groups(std::span<const DnsCnameObservation> observations,
                                       GroupKind kind, std::size_t max_tuples) {
  if (kind == GroupKind::autonomous_system) {
    throw ArgumentError("CNAME observations group by CNAME_DOMAIN or CNAME_FQDN only");
  }
  std::map<GroupKey, std::map<DestinationTuple, std::size_t>> groups;
  for (const auto& obs : observations) {
    GroupKey key{kind, kind == GroupKind::cname_domain ? obs.canonical_domain : obs.canonical_fqdn};
    ++groups[std::move(key)][DestinationTuple{obs.alias_fqdn, obs.resolved_ip}];
  }
  return finish(groups, max_tuples);
}

std::vector<CandidateSet> build_groups(std::span<const TlsObservation> observations,
                                       const AsnTable& asns, std::size_t max_tuples) {
  std::map<GroupKey, std::map<DestinationTuple, std::size_t>> groups;
  for (const auto& obs : observations) {
    if (!obs.server_name) continue;
    const AsnEntry* entry = asns.lookup(obs.dst_ip);
    if (entry == nullptr) continue;
    ++groups[GroupKey{GroupKind::autonomous_system, as_group_value(*entry)}]
            [DestinationTuple{*obs.server_name, obs.dst_ip}];
  }
  return finish(groups, max_tuples);
}

std::vector<std::pair<std::string, std::size_t>> rank_canonicals(
    std::span<const DnsCnameObservation> observations, CanonicalLevel level) {
  std::map<std::string, std::set<std::string>> aliases;
  for (const auto& obs : observations) {
    const auto& name = level == CanonicalLevel::domain ? obs.canonical_domain : obs.canonical_fqdn;
    aliases[name].insert(obs.alias_fqdn);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [name, set] : aliases) ranked.emplace_back(name, set.size());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<ScanPair> sample_pairs(const CandidateSet& set, std::size_t pairs_per_tuple,
                                   std::uint64_t seed) {
  if (pairs_per_tuple < 1) throw ArgumentError("pairs_per_tuple must be >= 1");
  std::vector<ScanPair> pairs;
  const auto& tuples = set.tuples;
  if (tuples.size() < 2) return pairs;

  std::uint64_t state = seed ^ fnv1a(to_string(set.key.kind)) ^ (fnv1a(set.key.value) << 1);
  std::map<std::string_view, std::size_t> per_domain;
  for (const auto& wt : tuples) ++per_domain[wt.tuple.domain];

  const std::size_t n = tuples.size();
  std::vector<std::size_t> pool;
  std::vector<std::size_t> chosen;
  for (std::size_t t = 0; t < n; ++t) {
    const auto& target = tuples[t].tuple;
    const std::size_t eligible = n - per_domain[target.domain];
    const std::size_t draws = std::min(pairs_per_tuple, eligible);
    chosen.clear();
    if (draws * 4 < eligible && eligible * 2 > n) {
      // Sparse draw from a large set: rejection keeps this O(draws).
      while (chosen.size() < draws) {
        const auto f = static_cast<std::size_t>(bounded(state, n));
        if (tuples[f].tuple.domain == target.domain) continue;
        if (std::find(chosen.begin(), chosen.end(), f) != chosen.end()) continue;
        chosen.push_back(f);
      }
    } else {
      pool.clear();
      for (std::size_t f = 0; f < n; ++f) {
        if (tuples[f].tuple.domain != target.domain) pool.push_back(f);
      }
      // Partial Fisher-Yates: the first `draws` slots become the sample.
      for (std::size_t i = 0; i < draws; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(bounded(state, pool.size() - i));
        std::swap(pool[i], pool[j]);
        chosen.push_back(pool[i]);
      }
    }
    for (std::size_t f : chosen) pairs.push_back({target, tuples[f].tuple, set.key});
  }
  return pairs;
}

}  // namespace dfscan

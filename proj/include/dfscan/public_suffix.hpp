#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_set>

namespace dfscan {

/// Public suffix rules in the publicsuffix.org file format.
///
/// Plain, wildcard (`*.ck`) and exception (`!www.ck`) rules are honoured.
/// Only the ICANN section is loaded; rules after `===BEGIN PRIVATE DOMAINS===`
/// are skipped so provider zones group as single registrable domains.
class PublicSuffixList {
 public:
  /// The snapshot compiled into the library.
  static const PublicSuffixList& bundled();

  static PublicSuffixList parse(std::istream& in);
  static PublicSuffixList load(const std::filesystem::path& path);

  /// Number of labels in the public suffix of `fqdn` (at least 1: the
  /// implicit `*` rule).
  std::size_t suffix_label_count(std::string_view fqdn) const;
  bool is_public_suffix(std::string_view fqdn) const;

  /// eTLD+1. When `fqdn` is itself a public suffix, its last two labels.
  std::string registrable_domain(std::string_view fqdn) const;

  std::size_t rule_count() const { return exact_.size() + wildcard_.size() + exception_.size(); }

 private:
  void add_rule(std::string_view rule);

  std::unordered_set<std::string> exact_;
  std::unordered_set<std::string> wildcard_;   // stored without the "*." prefix
  std::unordered_set<std::string> exception_;  // stored without the "!"
};

/// Lowercase and strip one trailing dot. DNS names compare case-insensitively.
std::string normalize_fqdn(std::string_view name);

/// Convenience wrapper over the bundled snapshot. Throws ArgumentError on an
/// empty name.
std::string registrable_domain(std::string_view fqdn,
                               const PublicSuffixList& suffixes = PublicSuffixList::bundled());

}  // namespace dfscan
